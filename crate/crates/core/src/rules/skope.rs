use std::collections::HashSet;

use ndarray::ArrayView2;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{extract_paths, grow, Presorted, TreeParams};
use super::{Rule, RuleStats};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkopeConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub precision_min: f64,
    pub recall_min: f64,
    /// Fraction of rows drawn (without replacement) for each tree.
    pub sample_fraction: f64,
    pub seed: u64,
}

impl Default for SkopeConfig {
    fn default() -> Self {
        Self {
            n_trees: 20,
            max_depth: 3,
            precision_min: 1.0,
            recall_min: 0.2,
            sample_fraction: 0.63,
            seed: 0,
        }
    }
}

impl SkopeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.max_depth == 0 {
            return Err(Error::Config("skope needs at least one tree of depth ≥ 1".into()));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "sample_fraction must lie in (0, 1], got {}",
                self.sample_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.precision_min) || !(0.0..=1.0).contains(&self.recall_min) {
            return Err(Error::Config("precision_min and recall_min must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRule {
    pub rule: Rule,
    pub stats: RuleStats,
}

/// Rule miner bound to one design matrix, so repeated fits with different
/// labels share the presort.
#[derive(Debug, Clone)]
pub struct RuleMiner {
    pre: Presorted,
}

impl RuleMiner {
    pub fn new(x: &ArrayView2<f64>) -> Self {
        Self {
            pre: Presorted::new(x),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.pre.n_rows()
    }

    fn stats(&self, rule: &Rule, y: &[bool], positives: usize) -> RuleStats {
        let mut cov = 0;
        let mut support = 0;
        for (r, &label) in y.iter().enumerate() {
            if rule
                .conditions()
                .iter()
                .all(|c| c.holds(self.pre.value(r, c.feature)))
            {
                support += 1;
                cov += usize::from(label);
            }
        }
        RuleStats::from_counts(cov, support, positives)
    }

    /// Rules with precision ≥ `precision_min` and recall ≥ `recall_min` on
    /// the full `(x, y)`, best recall first, shorter rules first on ties.
    pub fn fit(&self, y: &[bool], cfg: &SkopeConfig) -> Result<Vec<ScoredRule>> {
        cfg.validate()?;
        let n = self.pre.n_rows();
        if y.len() != n {
            return Err(Error::shape("rule miner labels", n, y.len()));
        }
        let positives = y.iter().filter(|&&v| v).count();
        if positives == 0 {
            return Err(Error::NoPositives);
        }
        let labels: Vec<usize> = y.iter().map(|&v| usize::from(v)).collect();
        let k = ((cfg.sample_fraction * n as f64).round() as usize).clamp(1, n);
        let params = TreeParams {
            max_depth: cfg.max_depth,
            min_samples_split: 2,
            min_samples_leaf: 1,
        };

        let trees: Vec<_> = (0..cfg.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::derive(cfg.seed, "skope-tree", t as u64));
                let mut rows = index::sample(&mut rng, n, k).into_vec();
                rows.sort_unstable();
                let mut count = [0usize; 2];
                for &r in &rows {
                    count[labels[r]] += 1;
                }
                let weight: Vec<f64> = count
                    .iter()
                    .map(|&c| if c == 0 { 1.0 } else { k as f64 / (2.0 * c as f64) })
                    .collect();
                grow(&self.pre, &labels, 2, &rows, &weight, &params)
            })
            .collect();

        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for rule in extract_paths(&trees) {
            if !seen.insert(rule.key()) {
                continue;
            }
            let stats = self.stats(&rule, y, positives);
            if passes(&stats, positives, cfg) {
                out.push(ScoredRule { rule, stats });
            }
        }
        out.sort_by(|a, b| {
            b.stats
                .recall
                .total_cmp(&a.stats.recall)
                .then(a.rule.len().cmp(&b.rule.len()))
                .then_with(|| a.rule.canonical_cmp(&b.rule))
        });
        Ok(out)
    }
}

fn passes(s: &RuleStats, positives: usize, cfg: &SkopeConfig) -> bool {
    if s.support == 0 {
        return false;
    }
    let precision_ok = if cfg.precision_min >= 1.0 {
        s.coverage_count == s.support
    } else {
        s.precision >= cfg.precision_min
    };
    // integer form of recall ≥ recall_min avoids rounding at the boundary
    let recall_ok = s.coverage_count as f64 >= cfg.recall_min * positives as f64 - 1e-9;
    precision_ok && recall_ok
}

pub fn skope_fit(x: &ArrayView2<f64>, y: &[bool], cfg: &SkopeConfig) -> Result<Vec<ScoredRule>> {
    RuleMiner::new(x).fit(y, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{evaluate_rule, Condition, Op};
    use ndarray::Array2;
    use rand::Rng;

    /// All conjunctions of up to `depth` literals drawn from the midpoint
    /// thresholds of every feature.
    fn brute_force(x: &Array2<f64>, y: &[bool], depth: usize, recall_min: f64) -> Option<f64> {
        let mut literals = Vec::new();
        for f in 0..x.ncols() {
            let mut vals: Vec<f64> = x.column(f).to_vec();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = 0.5 * (w[0] + w[1]);
                literals.push(Condition::new(f, Op::Le, t));
                literals.push(Condition::new(f, Op::Gt, t));
            }
        }
        let mut best: Option<f64> = None;
        let mut stack: Vec<usize> = Vec::new();
        fn rec(
            start: usize,
            literals: &[Condition],
            stack: &mut Vec<usize>,
            depth: usize,
            x: &Array2<f64>,
            y: &[bool],
            recall_min: f64,
            best: &mut Option<f64>,
        ) {
            if !stack.is_empty() {
                if let Some(rule) = Rule::new(stack.iter().map(|&i| literals[i])) {
                    let s = evaluate_rule(&rule, &x.view(), y);
                    if s.support > 0 && s.coverage_count == s.support && s.recall >= recall_min {
                        *best = Some(best.map_or(s.recall, |b| b.max(s.recall)));
                    }
                }
            }
            if stack.len() == depth {
                return;
            }
            for i in start..literals.len() {
                stack.push(i);
                rec(i + 1, literals, stack, depth, x, y, recall_min, best);
                stack.pop();
            }
        }
        rec(0, &literals, &mut stack, depth, x, y, recall_min, &mut best);
        best
    }

    #[test]
    fn recovers_planted_box() {
        let mut rng = seed::rng(5);
        let x = Array2::from_shape_fn((200, 2), |_| rng.gen_range(0.0..1.0));
        let y: Vec<bool> = x.outer_iter().map(|r| r[0] > 0.5 && r[1] > 0.5).collect();
        let cfg = SkopeConfig {
            max_depth: 2,
            ..Default::default()
        };
        let rules = skope_fit(&x.view(), &y, &cfg).unwrap();
        let top = &rules[0];
        assert_eq!(top.stats.precision, 1.0);
        assert_eq!(top.stats.recall, 1.0);
        assert_eq!(top.rule.len(), 2);
        let oracle = brute_force(&x, &y, 2, 0.2).unwrap();
        assert_eq!(oracle, 1.0);
        for (i, r) in x.outer_iter().enumerate() {
            assert_eq!(top.rule.matches(r.as_slice().unwrap()), y[i]);
        }
    }

    #[test]
    fn noisy_overlap_gives_nothing_at_full_precision() {
        // every cell of the grid holds both labels, so no pure conjunction exists
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                for label in [false, true] {
                    rows.push(vec![a as f64, b as f64]);
                    y.push(label);
                }
            }
        }
        let x = crate::matrix::from_rows(&rows, 2);
        assert!(brute_force(&x, &y, 3, 0.2).is_none());
        assert!(skope_fit(&x.view(), &y, &SkopeConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn contract_holds_and_is_deterministic() {
        let mut rng = seed::rng(8);
        let x = Array2::from_shape_fn((150, 4), |_| rng.gen_range(0.0..1.0));
        let y: Vec<bool> = x
            .outer_iter()
            .map(|r| r[2] < 0.3 || (r[0] > 0.7 && r[1] < 0.5))
            .collect();
        let cfg = SkopeConfig::default();
        let a = skope_fit(&x.view(), &y, &cfg).unwrap();
        let b = skope_fit(&x.view(), &y, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
        for s in &a {
            assert_eq!(s.stats.precision, 1.0);
            assert!(s.stats.recall >= 0.2);
            assert!((1..=3).contains(&s.rule.len()));
            assert_eq!(evaluate_rule(&s.rule, &x.view(), &y), s.stats);
        }
        for w in a.windows(2) {
            assert!(w[0].stats.recall >= w[1].stats.recall);
        }
        let keys: HashSet<_> = a.iter().map(|s| s.rule.key()).collect();
        assert_eq!(keys.len(), a.len());
    }

    #[test]
    fn no_positives_is_an_error() {
        let x = Array2::zeros((10, 2));
        assert!(matches!(
            skope_fit(&x.view(), &[false; 10], &SkopeConfig::default()),
            Err(Error::NoPositives)
        ));
    }

    #[test]
    fn all_positive_labels_never_violate_the_contract() {
        let x = Array2::from_shape_fn((20, 1), |(i, _)| i as f64);
        let rules = skope_fit(&x.view(), &[true; 20], &SkopeConfig::default()).unwrap();
        assert!(rules.iter().all(|s| s.stats.precision == 1.0));
    }
}

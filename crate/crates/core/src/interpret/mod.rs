//! Semantics for dictionary features, local explanations and the global
//! report.

mod explain;
mod report;

pub use explain::{explain_batch, explain_instance, render_explanation, LocalExplanation, Term};
pub use report::{
    global_report, write_bundle, write_heatmap_svg, write_sweep_csv, GlobalReport, RuleRow, Summary,
};

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::EncodedColumn;
use crate::error::{Error, Result};
use crate::merged::MergedModel;
use crate::rules::{render_rule, Rule, RuleMiner, RuleStats, SkopeConfig};
use crate::seed;

pub const DEFAULT_P: [u32; 5] = [90, 80, 70, 60, 50];

/// Codes of every training instance, one column per dictionary feature.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix {
    pub a: Array2<f64>,
}

impl ActivationMatrix {
    pub fn n_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn d_hid(&self) -> usize {
        self.a.ncols()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.a.column(j)
    }

    pub fn is_dead(&self, j: usize) -> bool {
        self.a.column(j).iter().all(|&v| v <= 0.0)
    }
}

pub fn collect_activations(m: &MergedModel, x: &ArrayView2<f64>) -> Result<ActivationMatrix> {
    Ok(ActivationMatrix { a: m.codes(x)? })
}

/// How `T_j^p` is read from a neuron's activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopSubsetMode {
    /// The ⌈|P|·p/100⌉ strongest of the positively activating instances.
    #[default]
    TopFraction,
    /// Instances whose activation is positive and strictly above the p-th
    /// percentile (nearest rank) of the whole column.
    Quantile,
}

/// Indices of `T_j^p`, ascending.
pub fn top_subset(column: ArrayView1<f64>, p: u32, mode: TopSubsetMode) -> Vec<usize> {
    let mut out = match mode {
        TopSubsetMode::TopFraction => {
            let mut pos: Vec<usize> = (0..column.len()).filter(|&i| column[i] > 0.0).collect();
            let k = (pos.len() * p as usize).div_ceil(100);
            pos.sort_by(|&a, &b| column[b].total_cmp(&column[a]).then(a.cmp(&b)));
            pos.truncate(k);
            pos
        }
        TopSubsetMode::Quantile => {
            if column.is_empty() {
                return Vec::new();
            }
            let mut sorted = column.to_vec();
            sorted.sort_by(f64::total_cmp);
            let rank = (sorted.len() * p as usize).div_ceil(100).max(1);
            let cut = sorted[rank - 1];
            (0..column.len())
                .filter(|&i| column[i] > 0.0 && column[i] > cut)
                .collect()
        }
    };
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemanticsConfig {
    pub p_candidates: Vec<u32>,
    pub mode: TopSubsetMode,
    pub skope: SkopeConfig,
}

impl Default for SemanticsConfig {
    fn default() -> Self {
        Self {
            p_candidates: DEFAULT_P.to_vec(),
            mode: TopSubsetMode::TopFraction,
            skope: SkopeConfig::default(),
        }
    }
}

impl SemanticsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_candidates.is_empty() {
            return Err(Error::Config("p_candidates is empty".into()));
        }
        if let Some(p) = self.p_candidates.iter().find(|&&p| p == 0 || p > 100) {
            return Err(Error::Config(format!("p candidate {p} outside 1..=100")));
        }
        self.skope.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryFeature {
    pub j: usize,
    pub p: u32,
    pub subset_size: usize,
    pub rule: Rule,
    pub text: String,
    pub stats: RuleStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub p: u32,
    /// Features that obtained a rule.
    pub n_features: usize,
    pub n_alive: usize,
    /// `n_features / n_alive`, 0 when every neuron is dead.
    pub proportion: f64,
    /// Mean recall of the obtained rules, 0 when there are none.
    pub avg_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDictionary {
    pub d_hid: usize,
    pub chosen_p: u32,
    pub mode: TopSubsetMode,
    /// Sorted by `j`.
    pub features: Vec<DictionaryFeature>,
    pub dead: Vec<usize>,
    pub uncovered: Vec<usize>,
    pub sweep: Vec<SweepEntry>,
}

impl FeatureDictionary {
    pub fn get(&self, j: usize) -> Option<&DictionaryFeature> {
        self.features
            .binary_search_by_key(&j, |f| f.j)
            .ok()
            .map(|k| &self.features[k])
    }

    /// Rule text, or a placeholder for features without one.
    pub fn label(&self, j: usize) -> String {
        self.get(j)
            .map_or_else(|| format!("unlabeled feature {j}"), |f| f.text.clone())
    }

    /// A dictionary with no labeled features, used when rule mining finds
    /// nothing at any p.
    pub fn empty(a: &ActivationMatrix, sweep: Vec<SweepEntry>, mode: TopSubsetMode) -> Self {
        let dead: Vec<usize> = (0..a.d_hid()).filter(|&j| a.is_dead(j)).collect();
        let uncovered = (0..a.d_hid()).filter(|&j| !a.is_dead(j)).collect();
        Self {
            d_hid: a.d_hid(),
            chosen_p: sweep.first().map_or(0, |s| s.p),
            mode,
            features: Vec::new(),
            dead,
            uncovered,
            sweep,
        }
    }
}

/// Label `T_j^p` as positive and keep the best-recall rule mined on the
/// training design matrix.
pub fn describe_feature(
    j: usize,
    p: u32,
    a: &ActivationMatrix,
    miner: &RuleMiner,
    col_map: &[EncodedColumn],
    cfg: &SemanticsConfig,
) -> Result<Option<DictionaryFeature>> {
    let t = top_subset(a.column(j), p, cfg.mode);
    if t.is_empty() {
        return Ok(None);
    }
    let mut y = vec![false; a.n_rows()];
    for &i in &t {
        y[i] = true;
    }
    let skope = SkopeConfig {
        seed: seed::derive(cfg.skope.seed, "skope-feature", ((p as u64) << 32) | j as u64),
        ..cfg.skope
    };
    let rules = miner.fit(&y, &skope)?;
    Ok(rules.into_iter().next().map(|best| DictionaryFeature {
        j,
        p,
        subset_size: t.len(),
        text: render_rule(&best.rule, col_map),
        rule: best.rule,
        stats: best.stats,
    }))
}

/// Result of one p in the sweep: the sweep row and the features found.
fn sweep_once(
    p: u32,
    a: &ActivationMatrix,
    miner: &RuleMiner,
    col_map: &[EncodedColumn],
    cfg: &SemanticsConfig,
) -> Result<(SweepEntry, Vec<DictionaryFeature>)> {
    let found: Vec<Option<DictionaryFeature>> = (0..a.d_hid())
        .into_par_iter()
        .map(|j| describe_feature(j, p, a, miner, col_map, cfg))
        .collect::<Result<_>>()?;
    let features: Vec<DictionaryFeature> = found.into_iter().flatten().collect();
    let n_alive = (0..a.d_hid()).filter(|&j| !a.is_dead(j)).count();
    let n = features.len();
    let entry = SweepEntry {
        p,
        n_features: n,
        n_alive,
        proportion: if n_alive == 0 { 0.0 } else { n as f64 / n_alive as f64 },
        avg_recall: if n == 0 {
            0.0
        } else {
            features.iter().map(|f| f.stats.recall).sum::<f64>() / n as f64
        },
    };
    Ok((entry, features))
}

/// Index of the winning sweep entry: most features with a rule, then
/// higher average recall, then higher p.
pub fn choose_p(sweep: &[SweepEntry]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, s) in sweep.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let o = &sweep[b];
                (s.n_features, s.avg_recall, s.p) > (o.n_features, o.avg_recall, o.p)
            }
        };
        if better {
            best = Some(k);
        }
    }
    best.filter(|&k| sweep[k].n_features > 0)
}

/// Run the p sweep and keep the dictionary at the winning p.
pub fn select_threshold(
    a: &ActivationMatrix,
    x_train: &ArrayView2<f64>,
    col_map: &[EncodedColumn],
    cfg: &SemanticsConfig,
) -> Result<FeatureDictionary> {
    match select_threshold_or_empty(a, x_train, col_map, cfg)? {
        (d, true) => Ok(d),
        (_, false) => Err(Error::NoSemanticsFound),
    }
}

/// As [`select_threshold`], but when no p yields a rule returns an empty
/// dictionary (with the full sweep) and `false`.
pub fn select_threshold_or_empty(
    a: &ActivationMatrix,
    x_train: &ArrayView2<f64>,
    col_map: &[EncodedColumn],
    cfg: &SemanticsConfig,
) -> Result<(FeatureDictionary, bool)> {
    cfg.validate()?;
    if x_train.nrows() != a.n_rows() {
        return Err(Error::shape("activations vs training rows", x_train.nrows(), a.n_rows()));
    }
    let miner = RuleMiner::new(x_train);
    let mut sweep = Vec::with_capacity(cfg.p_candidates.len());
    let mut found = Vec::with_capacity(cfg.p_candidates.len());
    for &p in &cfg.p_candidates {
        let (entry, features) = sweep_once(p, a, &miner, col_map, cfg)?;
        sweep.push(entry);
        found.push(features);
    }
    let Some(k) = choose_p(&sweep) else {
        return Ok((FeatureDictionary::empty(a, sweep, cfg.mode), false));
    };
    let features = std::mem::take(&mut found[k]);
    let dead: Vec<usize> = (0..a.d_hid()).filter(|&j| a.is_dead(j)).collect();
    let uncovered: Vec<usize> = (0..a.d_hid())
        .filter(|&j| !a.is_dead(j) && features.binary_search_by_key(&j, |f| f.j).is_err())
        .collect();
    let dict = FeatureDictionary {
        d_hid: a.d_hid(),
        chosen_p: sweep[k].p,
        mode: cfg.mode,
        features,
        dead,
        uncovered,
        sweep,
    };
    Ok((dict, true))
}

/// `{ j : code_j > 0 }`.
pub fn active_features(codes: ArrayView1<f64>) -> Vec<usize> {
    (0..codes.len()).filter(|&j| codes[j] > 0.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use rand::Rng;

    #[test]
    fn top_fraction_examples() {
        let col = array![0.9, 0.5, 0.1, 0.0];
        assert_eq!(top_subset(col.view(), 50, TopSubsetMode::TopFraction), vec![0, 1]);
        assert!(top_subset(Array1::zeros(5).view(), 90, TopSubsetMode::TopFraction).is_empty());
        let col = Array1::from_iter((1..=10).map(f64::from));
        assert_eq!(top_subset(col.view(), 90, TopSubsetMode::TopFraction), (1..10).collect::<Vec<_>>());
    }

    #[test]
    fn ties_go_to_lower_index() {
        let col = array![0.5, 0.5, 0.5, 0.5];
        assert_eq!(top_subset(col.view(), 50, TopSubsetMode::TopFraction), vec![0, 1]);
    }

    #[test]
    fn quantile_mode() {
        let col = Array1::from_iter((0..10).map(f64::from));
        // 50th percentile by nearest rank is the 5th value, 4.0
        assert_eq!(top_subset(col.view(), 50, TopSubsetMode::Quantile), vec![5, 6, 7, 8, 9]);
        assert_eq!(top_subset(col.view(), 90, TopSubsetMode::Quantile), vec![9]);
    }

    #[test]
    fn zero_encoder_gives_zero_activations() {
        let m = MergedModel {
            hidden: vec![],
            encoder_m: Array2::zeros((3, 2)),
            encoder_b: Array1::zeros(3),
            head_w: Array2::zeros((2, 3)),
            head_b: Array1::zeros(2),
        };
        let a = collect_activations(&m, &array![[1.0, -2.0], [0.3, 4.0]].view()).unwrap();
        assert!(a.a.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn active_feature_sets() {
        assert!(active_features(Array1::zeros(4).view()).is_empty());
        assert_eq!(active_features(array![0.0, 0.2, 0.0, 3.1].view()), vec![1, 3]);
    }

    fn entry(p: u32, n: usize, r: f64) -> SweepEntry {
        SweepEntry {
            p,
            n_features: n,
            n_alive: 4,
            proportion: n as f64 / 4.0,
            avg_recall: r,
        }
    }

    #[test]
    fn choose_p_tie_breaks() {
        let s = vec![entry(90, 2, 0.6), entry(80, 2, 0.8), entry(70, 1, 1.0)];
        assert_eq!(s[choose_p(&s).unwrap()].p, 80);
        let s = vec![entry(90, 2, 0.7), entry(50, 2, 0.7)];
        assert_eq!(s[choose_p(&s).unwrap()].p, 90);
        assert!(choose_p(&[entry(90, 0, 0.0)]).is_none());
    }

    /// Codes where the top 70% of each neuron's support is a box on
    /// `x_{2j}` alone and the remainder shares the box with noise.
    #[test]
    fn planted_box_found_at_its_own_p() {
        let n = 400;
        let mut rng = seed::rng(21);
        let x = Array2::from_shape_fn((n, 4), |_| rng.gen_range(0.0..1.0));
        let mut a = Array2::zeros((n, 2));
        for i in 0..n {
            a[[i, 0]] = if x[[i, 0]] > 0.5 { 1.0 + x[[i, 0]] } else { 0.0 };
            a[[i, 1]] = x[[i, 2]];
        }
        let am = ActivationMatrix { a };
        let cfg = SemanticsConfig::default();
        let miner = RuleMiner::new(&x.view());
        let f = describe_feature(0, 50, &am, &miner, &[], &cfg).unwrap().unwrap();
        assert_eq!(f.stats.recall, 1.0);
        assert_eq!(f.stats.precision, 1.0);
        let d = select_threshold(&am, &x.view(), &[], &cfg).unwrap();
        assert_eq!(d.sweep.len(), 5);
        let mut all: Vec<usize> = d.features.iter().map(|f| f.j).collect();
        all.extend(&d.dead);
        all.extend(&d.uncovered);
        all.sort_unstable();
        assert_eq!(all, vec![0, 1]);
    }

    #[test]
    fn fraction_subsets_are_nested() {
        let mut rng = seed::rng(4);
        let col = Array1::from_shape_fn(300, |_| {
            if rng.gen_bool(0.3) {
                0.0
            } else {
                (rng.gen_range(0..20) as f64) / 4.0
            }
        });
        let mut prev: Option<Vec<usize>> = None;
        for p in [50, 60, 70, 80, 90] {
            let t = top_subset(col.view(), p, TopSubsetMode::TopFraction);
            if let Some(prev) = &prev {
                assert!(prev.iter().all(|i| t.binary_search(i).is_ok()));
            }
            prev = Some(t);
        }
    }

    /// Best recall of any pure conjunction of up to three literals over
    /// binary columns, `None` if none reaches `recall_min`.
    fn binary_oracle(x: &Array2<f64>, y: &[bool], recall_min: f64) -> Option<f64> {
        use crate::rules::{evaluate_rule, Condition, Op};
        let lits: Vec<Condition> = (0..x.ncols())
            .flat_map(|f| [Condition::new(f, Op::Le, 0.5), Condition::new(f, Op::Gt, 0.5)])
            .collect();
        let mut best: Option<f64> = None;
        let n = lits.len();
        for a in 0..n {
            for b in a..n {
                for c in b..n {
                    let Some(rule) = Rule::new([lits[a], lits[b], lits[c]]) else { continue };
                    let s = evaluate_rule(&rule, &x.view(), y);
                    if s.support > 0 && s.coverage_count == s.support && s.recall >= recall_min {
                        best = Some(best.map_or(s.recall, |v: f64| v.max(s.recall)));
                    }
                }
            }
        }
        best
    }

    /// Neurons 0..3 each own 100 rows with distinct activations; rows at
    /// ranks 56..=70 carry a private marker bit. Only the 70% subset makes
    /// the marker a pure rule with recall ≥ 0.2. Neuron 3 has no marker.
    #[test]
    fn only_p70_yields_rules_for_three_of_four() {
        let per = 100;
        let mut x = Array2::zeros((4 * per, 4));
        let mut a = Array2::zeros((4 * per, 4));
        for j in 0..4 {
            for rank in 1..=per {
                let i = j * per + rank - 1;
                a[[i, j]] = (per + 1 - rank) as f64;
                if j < 3 && (56..=70).contains(&rank) {
                    x[[i, j]] = 1.0;
                }
            }
        }
        let am = ActivationMatrix { a };
        let cfg = SemanticsConfig::default();
        for &p in &DEFAULT_P {
            let expected = (0..4)
                .filter(|&j| {
                    let t = top_subset(am.column(j), p, cfg.mode);
                    let mut y = vec![false; 4 * per];
                    t.iter().for_each(|&i| y[i] = true);
                    binary_oracle(&x, &y, cfg.skope.recall_min).is_some()
                })
                .count();
            assert_eq!(expected, if p == 70 { 3 } else { 0 }, "oracle at p = {p}");
        }
        let d = select_threshold(&am, &x.view(), &[], &cfg).unwrap();
        assert_eq!(d.chosen_p, 70);
        assert_eq!(d.features.iter().map(|f| f.j).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(d.uncovered, vec![3]);
        for s in &d.sweep {
            assert_eq!(s.n_features, if s.p == 70 { 3 } else { 0 });
        }
        assert!(d.features.iter().all(|f| f.subset_size == 70 && f.stats.coverage_count == 15));
    }
}

//! Axis-aligned conjunctive rules, CART trees and the bagged
//! high-precision rule miner.

mod render;
mod skope;
mod tree;

pub use render::{render_condition, render_rule};
pub use skope::{skope_fit, RuleMiner, ScoredRule, SkopeConfig};
pub use tree::{extract_paths, fit_tree, DecisionTree, Node, Presorted, TreeParams};

use std::cmp::Ordering;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Le,
    Gt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: usize,
    pub op: Op,
    pub threshold: f64,
}

impl Condition {
    pub fn new(feature: usize, op: Op, threshold: f64) -> Self {
        Self {
            feature,
            op,
            threshold,
        }
    }

    #[inline]
    pub fn holds(&self, value: f64) -> bool {
        match self.op {
            Op::Le => value <= self.threshold,
            Op::Gt => value > self.threshold,
        }
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.feature
            .cmp(&other.feature)
            .then(self.op.cmp(&other.op))
            .then(self.threshold.total_cmp(&other.threshold))
    }
}

/// A non-empty conjunction with at most one bound of each direction per
/// feature, stored in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    conditions: Vec<Condition>,
}

impl Rule {
    /// Tighten to one bound per (feature, op); `None` if the result is
    /// empty or contradictory (`x > a ∧ x ≤ b` with `a ≥ b`).
    pub fn new(conditions: impl IntoIterator<Item = Condition>) -> Option<Self> {
        let mut tight: Vec<Condition> = Vec::new();
        for c in conditions {
            match tight
                .iter_mut()
                .find(|t| t.feature == c.feature && t.op == c.op)
            {
                Some(t) => {
                    t.threshold = match c.op {
                        Op::Le => t.threshold.min(c.threshold),
                        Op::Gt => t.threshold.max(c.threshold),
                    }
                }
                None => tight.push(c),
            }
        }
        if tight.is_empty() {
            return None;
        }
        tight.sort_by(Condition::canonical_cmp);
        for pair in tight.windows(2) {
            if pair[0].feature == pair[1].feature && pair[1].threshold >= pair[0].threshold {
                // sorted Le before Gt: pair[0] is x ≤ b, pair[1] is x > a
                return None;
            }
        }
        Some(Self { conditions: tight })
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    pub fn matches(&self, row: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(row[c.feature]))
    }

    pub fn matches_at(&self, x: &ArrayView2<f64>, i: usize) -> bool {
        self.conditions.iter().all(|c| c.holds(x[[i, c.feature]]))
    }

    /// Hashable identity of the canonical form.
    pub fn key(&self) -> Vec<(usize, Op, u64)> {
        self.conditions
            .iter()
            .map(|c| (c.feature, c.op, c.threshold.to_bits()))
            .collect()
    }

    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.conditions.iter().zip(&other.conditions) {
            let o = a.canonical_cmp(b);
            if o != Ordering::Equal {
                return o;
            }
        }
        self.len().cmp(&other.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleStats {
    pub precision: f64,
    pub recall: f64,
    /// Matched positives.
    pub coverage_count: usize,
    /// Matched rows.
    pub support: usize,
}

impl RuleStats {
    pub fn from_counts(coverage_count: usize, support: usize, positives: usize) -> Self {
        Self {
            precision: if support == 0 {
                0.0
            } else {
                coverage_count as f64 / support as f64
            },
            recall: if positives == 0 {
                0.0
            } else {
                coverage_count as f64 / positives as f64
            },
            coverage_count,
            support,
        }
    }
}

pub fn evaluate_rule(rule: &Rule, x: &ArrayView2<f64>, y: &[bool]) -> RuleStats {
    let mut cov = 0;
    let mut support = 0;
    for (i, &label) in y.iter().enumerate() {
        if rule.matches_at(x, i) {
            support += 1;
            cov += usize::from(label);
        }
    }
    RuleStats::from_counts(cov, support, y.iter().filter(|&&v| v).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn tightens_bounds() {
        let r = Rule::new([Condition::new(0, Op::Le, 5.0), Condition::new(0, Op::Le, 3.0)]).unwrap();
        assert_eq!(r.conditions(), &[Condition::new(0, Op::Le, 3.0)]);
        let r = Rule::new([
            Condition::new(1, Op::Gt, 0.2),
            Condition::new(0, Op::Le, 1.0),
            Condition::new(1, Op::Gt, 0.7),
        ])
        .unwrap();
        assert_eq!(r.conditions(), &[Condition::new(0, Op::Le, 1.0), Condition::new(1, Op::Gt, 0.7)]);
    }

    #[test]
    fn rejects_contradictions_and_empty() {
        assert!(Rule::new([Condition::new(0, Op::Le, 1.0), Condition::new(0, Op::Gt, 1.0)]).is_none());
        assert!(Rule::new([Condition::new(0, Op::Le, 1.0), Condition::new(0, Op::Gt, 2.0)]).is_none());
        assert!(Rule::new([Condition::new(0, Op::Le, 2.0), Condition::new(0, Op::Gt, 1.0)]).is_some());
        assert!(Rule::new([]).is_none());
    }

    #[test]
    fn stats_conventions() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = [false, false, true, true];
        let exact = Rule::new([Condition::new(0, Op::Gt, 1.5)]).unwrap();
        let s = evaluate_rule(&exact, &x.view(), &y);
        assert_eq!((s.precision, s.recall, s.coverage_count, s.support), (1.0, 1.0, 2, 2));
        let none = Rule::new([Condition::new(0, Op::Gt, 10.0)]).unwrap();
        let s = evaluate_rule(&none, &x.view(), &y);
        assert_eq!((s.precision, s.recall, s.support), (0.0, 0.0, 0));
    }

    #[test]
    fn reported_recall_arithmetic() {
        let s = RuleStats::from_counts(153, 153, 212);
        // 153/212 = 0.722 against a reported 0.73
        assert!((s.recall - 0.73).abs() < 0.01);
        assert_eq!(s.precision, 1.0);
    }
}

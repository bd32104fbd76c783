use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{Condition, Op, Rule};
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;
const GAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 3,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Routed training rows per class.
        counts: Vec<usize>,
        /// Class-weighted mass per class; decides the prediction.
        weighted: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
    pub n_classes: usize,
    pub params: TreeParams,
}

/// Column-major copy of a design matrix with every column's row order
/// sorted by value. Built once and shared by all trees on the same rows.
#[derive(Debug, Clone)]
pub struct Presorted {
    cols: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &ArrayView2<f64>) -> Self {
        let cols: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
        let order = cols
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { cols, order }
    }

    pub fn n_rows(&self) -> usize {
        self.cols.first().map_or(0, Vec::len)
    }

    pub fn n_features(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.cols[feature][row]
    }
}

struct NodeStats {
    counts: Vec<usize>,
    weighted: Vec<f64>,
}

impl NodeStats {
    fn new(c: usize) -> Self {
        Self {
            counts: vec![0; c],
            weighted: vec![0.0; c],
        }
    }

    fn n(&self) -> usize {
        self.counts.iter().sum()
    }

    fn is_pure(&self) -> bool {
        self.counts.iter().filter(|&&k| k > 0).count() <= 1
    }
}

/// Weighted Gini impurity times total weight.
fn gini_mass(w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    total - w.iter().map(|v| v * v).sum::<f64>() / total
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct SweepState {
    left_w: Vec<f64>,
    left_n: usize,
    last: f64,
}

/// Grow a CART tree on `rows` of a presorted matrix. `class_weight` scales
/// every row of class `c` by `class_weight[c]` in the impurity.
pub(crate) fn grow(
    pre: &Presorted,
    y: &[usize],
    n_classes: usize,
    rows: &[usize],
    class_weight: &[f64],
    params: &TreeParams,
) -> DecisionTree {
    let n_all = pre.n_rows();
    let mut node_of = vec![NONE; n_all];
    let mut root = NodeStats::new(n_classes);
    for &r in rows {
        node_of[r] = 0;
        root.counts[y[r]] += 1;
        root.weighted[y[r]] += class_weight[y[r]];
    }
    let mut nodes: Vec<Option<Node>> = vec![None];
    let mut stats: Vec<Option<NodeStats>> = vec![Some(root)];
    let mut frontier: Vec<usize> = vec![0];
    let min_leaf = params.min_samples_leaf.max(1);

    for _depth in 0..params.max_depth {
        let open: Vec<usize> = frontier
            .iter()
            .copied()
            .filter(|&id| {
                let s = stats[id].as_ref().expect("frontier node has stats");
                let n = s.n();
                !s.is_pure() && n >= params.min_samples_split && n >= 2 * min_leaf
            })
            .collect();
        if open.is_empty() {
            break;
        }
        let mut slot_of = vec![NONE; nodes.len()];
        for (k, &id) in open.iter().enumerate() {
            slot_of[id] = k as u32;
        }
        let mut best: Vec<Option<Candidate>> = (0..open.len()).map(|_| None).collect();
        let parent_mass: Vec<f64> = open
            .iter()
            .map(|&id| gini_mass(&stats[id].as_ref().unwrap().weighted))
            .collect();
        let mut state: Vec<SweepState> = (0..open.len())
            .map(|_| SweepState {
                left_w: vec![0.0; n_classes],
                left_n: 0,
                last: f64::NEG_INFINITY,
            })
            .collect();
        let mut right_w = vec![0.0; n_classes];

        for f in 0..pre.n_features() {
            for s in state.iter_mut() {
                s.left_w.iter_mut().for_each(|v| *v = 0.0);
                s.left_n = 0;
                s.last = f64::NEG_INFINITY;
            }
            let col = &pre.cols[f];
            for &r in &pre.order[f] {
                let r = r as usize;
                let node = node_of[r];
                if node == NONE {
                    continue;
                }
                let slot = slot_of[node as usize];
                if slot == NONE {
                    continue;
                }
                let slot = slot as usize;
                let v = col[r];
                let st = &mut state[slot];
                if st.left_n > 0 && v > st.last {
                    let ns = stats[open[slot]].as_ref().unwrap();
                    let n = ns.n();
                    if st.left_n >= min_leaf && n - st.left_n >= min_leaf {
                        for c in 0..n_classes {
                            right_w[c] = ns.weighted[c] - st.left_w[c];
                        }
                        let gain = parent_mass[slot] - gini_mass(&st.left_w) - gini_mass(&right_w);
                        let better = match &best[slot] {
                            None => true,
                            Some(b) => gain > b.gain + GAIN_TOL,
                        };
                        if better {
                            let mut threshold = 0.5 * (st.last + v);
                            if threshold >= v {
                                threshold = st.last;
                            }
                            best[slot] = Some(Candidate {
                                gain,
                                feature: f,
                                threshold,
                            });
                        }
                    }
                }
                st.left_w[y[r]] += class_weight[y[r]];
                st.left_n += 1;
                st.last = v;
            }
        }

        let mut next = Vec::new();
        let mut child_of = vec![(NONE, NONE); open.len()];
        for (slot, cand) in best.iter().enumerate() {
            if let Some(c) = cand {
                if c.gain < -GAIN_TOL {
                    continue;
                }
                let l = nodes.len();
                nodes.push(None);
                nodes.push(None);
                stats.push(Some(NodeStats::new(n_classes)));
                stats.push(Some(NodeStats::new(n_classes)));
                nodes[open[slot]] = Some(Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left: l,
                    right: l + 1,
                });
                child_of[slot] = (l as u32, l as u32 + 1);
                next.push(l);
                next.push(l + 1);
            }
        }
        for r in 0..n_all {
            let node = node_of[r];
            if node == NONE {
                continue;
            }
            let slot = slot_of[node as usize];
            if slot == NONE {
                continue;
            }
            let (l, rt) = child_of[slot as usize];
            if l == NONE {
                continue;
            }
            let Some(Node::Split {
                feature, threshold, ..
            }) = &nodes[node as usize]
            else {
                unreachable!()
            };
            let child = if pre.cols[*feature][r] <= *threshold { l } else { rt };
            node_of[r] = child;
            let s = stats[child as usize].as_mut().unwrap();
            s.counts[y[r]] += 1;
            s.weighted[y[r]] += class_weight[y[r]];
        }
        frontier = next;
    }

    let nodes = nodes
        .into_iter()
        .zip(stats)
        .map(|(node, st)| match node {
            Some(n) => n,
            None => {
                let st = st.expect("leaf has stats");
                Node::Leaf {
                    counts: st.counts,
                    weighted: st.weighted,
                }
            }
        })
        .collect();
    DecisionTree {
        nodes,
        n_features: pre.n_features(),
        n_classes,
        params: *params,
    }
}

/// Unweighted CART with Gini impurity on all rows of `x`.
pub fn fit_tree(x: &ArrayView2<f64>, y: &[usize], n_classes: usize, params: &TreeParams) -> Result<DecisionTree> {
    if x.nrows() != y.len() {
        return Err(Error::shape("tree labels", x.nrows(), y.len()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::LabelOutOfRange {
            label: bad,
            classes: n_classes,
        });
    }
    let pre = Presorted::new(x);
    let rows: Vec<usize> = (0..y.len()).collect();
    Ok(grow(&pre, y, n_classes, &rows, &vec![1.0; n_classes], params))
}

fn argmax_f(w: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in w.iter().enumerate() {
        if v > w[best] {
            best = i;
        }
    }
    best
}

impl DecisionTree {
    fn leaf_for(&self, row: impl Fn(usize) -> f64) -> &Node {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row(*feature) <= *threshold { *left } else { *right },
                leaf => return leaf,
            }
        }
    }

    pub fn predict_row(&self, row: ArrayView1<f64>) -> usize {
        match self.leaf_for(|f| row[f]) {
            Node::Leaf { weighted, .. } => argmax_f(weighted),
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn predict(&self, x: &ArrayView2<f64>) -> Result<Vec<usize>> {
        if x.ncols() != self.n_features {
            return Err(Error::shape("tree input", self.n_features, x.ncols()));
        }
        Ok(x.outer_iter().map(|r| self.predict_row(r)).collect())
    }

    /// Length of the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, id: usize) -> usize {
            match &t.nodes[id] {
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

/// Every root-to-leaf path ending in a leaf whose weighted majority is
/// class 1, simplified to one bound per feature and direction.
pub fn extract_paths(trees: &[DecisionTree]) -> Vec<Rule> {
    fn go(t: &DecisionTree, id: usize, path: &mut Vec<Condition>, out: &mut Vec<Rule>) {
        match &t.nodes[id] {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                path.push(Condition::new(*feature, Op::Le, *threshold));
                go(t, *left, path, out);
                path.pop();
                path.push(Condition::new(*feature, Op::Gt, *threshold));
                go(t, *right, path, out);
                path.pop();
            }
            Node::Leaf { weighted, .. } => {
                if weighted.len() > 1 && weighted[1] > weighted[0] {
                    if let Some(rule) = Rule::new(path.iter().copied()) {
                        out.push(rule);
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    for t in trees {
        go(t, 0, &mut Vec::new(), &mut out);
    }
    out
}

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const N_FOLDS: usize = 5;
const VAL_FRACTION: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSet {
    pub folds: Vec<Fold>,
    pub seed: u64,
}

/// Stratified 5-fold split with a 65/15/20 train/val/test layout per fold.
///
/// Each class is shuffled and dealt round-robin onto the five test folds,
/// with one running counter across classes so fold sizes differ by at most
/// one. The remaining 80% of each fold is split into validation and
/// training parts by interleaving the shuffled class lists.
pub fn make_folds(n: usize, y: &[usize], seed: u64) -> Result<FoldSet> {
    if y.len() != n {
        return Err(Error::shape("make_folds labels", n, y.len()));
    }
    if n < 10 {
        return Err(Error::TooFewInstances(n));
    }
    let n_classes = y.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in y.iter().enumerate() {
        by_class[c].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < N_FOLDS {
            return Err(Error::StratificationImpossible {
                class: c,
                count: members.len(),
            });
        }
    }

    let mut rng = seed::rng(seed::derive(seed, "folds", 0));
    let mut test_fold = vec![0usize; n];
    let mut counter = 0usize;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            test_fold[i] = counter % N_FOLDS;
            counter += 1;
        }
    }

    let n_val = (VAL_FRACTION * n as f64).round() as usize;
    let mut folds = Vec::with_capacity(N_FOLDS);
    for k in 0..N_FOLDS {
        let mut fold_rng = seed::rng(seed::derive(seed, "val-split", k as u64));
        let mut keyed: Vec<(f64, usize, usize)> = Vec::new();
        for (c, members) in by_class.iter().enumerate() {
            let mut rest: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&i| test_fold[i] != k)
                .collect();
            rest.sort_unstable();
            rest.shuffle(&mut fold_rng);
            let len = rest.len() as f64;
            keyed.extend(
                rest.into_iter()
                    .enumerate()
                    .map(|(pos, i)| ((pos as f64 + 0.5) / len, c, i)),
            );
        }
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut val: Vec<usize> = keyed[..n_val].iter().map(|t| t.2).collect();
        let mut train: Vec<usize> = keyed[n_val..].iter().map(|t| t.2).collect();
        let test: Vec<usize> = (0..n).filter(|&i| test_fold[i] == k).collect();
        val.sort_unstable();
        train.sort_unstable();
        folds.push(Fold { train, val, test });
    }
    Ok(FoldSet { folds, seed })
}

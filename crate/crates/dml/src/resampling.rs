//! K-fold partitions for cross-fitting, repeated splits, externally supplied
//! splits, and the two-way split used when cross-fitting is disabled.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

/// One train/test pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Raw splits for one repetition, as supplied externally.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepSplits {
    pub train_ids: Vec<Vec<usize>>,
    pub test_ids: Vec<Vec<usize>>,
}

/// A validated resampling plan: per repetition, a sequence of train/test
/// pairs.
///
/// With cross-fitting on, the test sets of each repetition partition
/// `0..n_obs`. Plans drawn by [`draw_folds`] additionally make every train
/// set the exact complement of its test set; externally supplied plans may
/// reuse or overlap train sets as long as each train set stays disjoint
/// from its own test set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_obs: usize,
    pub n_folds: usize,
    pub n_rep: usize,
    pub cross_fitting: bool,
    splits: Vec<Vec<Split>>,
}

impl FoldPlan {
    pub fn splits(&self, rep: usize) -> &[Split] {
        &self.splits[rep]
    }

    /// Number of observations that receive a score in each repetition
    /// (all of them under cross-fitting, the test half otherwise).
    pub fn n_scored(&self) -> usize {
        self.splits[0].iter().map(|s| s.test.len()).sum()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let plan: FoldPlan = serde_json::from_str(s).map_err(|e| Error::ParseError {
            row: 0,
            col: 0,
            msg: format!("fold plan: {e}"),
        })?;
        // Re-validate: files can be edited by hand.
        let reps: Vec<RepSplits> = plan
            .splits
            .iter()
            .map(|rep| RepSplits {
                train_ids: rep.iter().map(|s| s.train.clone()).collect(),
                test_ids: rep.iter().map(|s| s.test.clone()).collect(),
            })
            .collect();
        validate_external_plan(&reps, plan.n_obs)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Draws `n_rep` uniformly random K-fold partitions of `0..n_obs`.
///
/// Fold sizes are `n/K` rounded down or up; the remainder observations go
/// one-per-fold to the first `n mod K` folds. Each repetition draws from its
/// own substream of `seed`, so plans are identical no matter how many
/// workers consume them.
pub fn draw_folds(n_obs: usize, n_folds: usize, n_rep: usize, seed: u64) -> Result<FoldPlan> {
    if n_folds < 2 {
        return Err(Error::InvalidFoldCount(format!("n_folds = {n_folds}, need at least 2")));
    }
    if n_obs < n_folds {
        return Err(Error::InvalidFoldCount(format!(
            "n_obs = {n_obs} smaller than n_folds = {n_folds}"
        )));
    }
    if n_rep < 1 {
        return Err(Error::InvalidFoldCount("n_rep must be at least 1".into()));
    }

    let mut splits = Vec::with_capacity(n_rep);
    for rep in 0..n_rep {
        let mut order: Vec<usize> = (0..n_obs).collect();
        let mut rng = substream(seed, &[FOLD_STREAM, rep as u64]);
        order.shuffle(&mut rng);

        let base = n_obs / n_folds;
        let extra = n_obs % n_folds;
        let mut rep_splits = Vec::with_capacity(n_folds);
        let mut offset = 0;
        for k in 0..n_folds {
            let size = base + usize::from(k < extra);
            let mut test: Vec<usize> = order[offset..offset + size].to_vec();
            test.sort_unstable();
            let mut train: Vec<usize> =
                order[..offset].iter().chain(&order[offset + size..]).copied().collect();
            train.sort_unstable();
            rep_splits.push(Split { train, test });
            offset += size;
        }
        splits.push(rep_splits);
    }

    Ok(FoldPlan { n_obs, n_folds, n_rep, cross_fitting: true, splits })
}

// Stream tags separating the two draw kinds from other consumers of the seed.
const FOLD_STREAM: u64 = 0x464f_4c44;
const SPLIT_STREAM: u64 = 0x5350_4c54;

/// Splits the sample into a random train half and its complement, for
/// estimation without cross-fitting.
pub fn draw_no_crossfit(n_obs: usize, seed: u64) -> Result<FoldPlan> {
    if n_obs < 4 {
        return Err(Error::InvalidFoldCount(format!(
            "n_obs = {n_obs} too small for a two-way split"
        )));
    }
    let mut order: Vec<usize> = (0..n_obs).collect();
    let mut rng = substream(seed, &[SPLIT_STREAM, 0]);
    order.shuffle(&mut rng);
    let n_train = n_obs.div_ceil(2);
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(FoldPlan {
        n_obs,
        n_folds: 1,
        n_rep: 1,
        cross_fitting: false,
        splits: vec![vec![Split { train, test }]],
    })
}

/// Validates externally supplied splits and wraps them in a [`FoldPlan`].
///
/// Test sets must partition `0..n_obs` within every repetition; train sets
/// may overlap each other (a single train set may serve several test folds)
/// but must be disjoint from their own test set. A single train/test pair
/// per repetition is interpreted as a no-cross-fitting plan and must
/// partition the sample.
pub fn validate_external_plan(reps: &[RepSplits], n_obs: usize) -> Result<FoldPlan> {
    if reps.is_empty() {
        return Err(Error::LengthMismatch("no repetitions supplied".into()));
    }
    let n_folds = reps[0].test_ids.len();
    if n_folds == 0 {
        return Err(Error::LengthMismatch("no folds supplied".into()));
    }

    let mut splits = Vec::with_capacity(reps.len());
    for rep in reps {
        if rep.train_ids.len() != rep.test_ids.len() {
            return Err(Error::LengthMismatch(format!(
                "{} train sets vs {} test sets",
                rep.train_ids.len(),
                rep.test_ids.len()
            )));
        }
        if rep.test_ids.len() != n_folds {
            return Err(Error::LengthMismatch(format!(
                "repetitions disagree on fold count ({} vs {n_folds})",
                rep.test_ids.len()
            )));
        }

        let mut seen = vec![false; n_obs];
        let mut covered = 0usize;
        for (train, test) in rep.train_ids.iter().zip(&rep.test_ids) {
            if train.is_empty() || test.is_empty() {
                return Err(Error::LengthMismatch("empty train or test set".into()));
            }
            for &i in train.iter().chain(test) {
                if i >= n_obs {
                    return Err(Error::IndexOutOfRange { index: i, n_obs });
                }
            }
            let mut in_test = vec![false; n_obs];
            for &i in test {
                if seen[i] {
                    return Err(Error::NotAPartition(format!(
                        "index {i} appears in more than one test set"
                    )));
                }
                seen[i] = true;
                in_test[i] = true;
                covered += 1;
            }
            let mut in_train = vec![false; n_obs];
            for &i in train {
                if in_test[i] {
                    return Err(Error::NotAPartition(format!(
                        "index {i} appears in both train and test of the same fold"
                    )));
                }
                if in_train[i] {
                    return Err(Error::LengthMismatch(format!(
                        "index {i} duplicated within a train set"
                    )));
                }
                in_train[i] = true;
            }
        }
        if n_folds >= 2 && covered != n_obs {
            return Err(Error::NotAPartition(format!(
                "test sets cover {covered} of {n_obs} indices"
            )));
        }
        if n_folds == 1 {
            let pair_total = rep.train_ids[0].len() + rep.test_ids[0].len();
            if pair_total != n_obs {
                return Err(Error::NotAPartition(format!(
                    "two-way split covers {pair_total} of {n_obs} indices"
                )));
            }
        }

        splits.push(
            rep.train_ids
                .iter()
                .zip(&rep.test_ids)
                .map(|(tr, te)| Split { train: tr.clone(), test: te.clone() })
                .collect(),
        );
    }

    Ok(FoldPlan {
        n_obs,
        n_folds,
        n_rep: reps.len(),
        cross_fitting: n_folds >= 2,
        splits,
    })
}

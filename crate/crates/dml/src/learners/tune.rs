//! Hyperparameter tuning by exhaustive grid search with cross-validated
//! scoring.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::lasso::gather_rows;
use super::{LearnerKind, LearnerSpec, NuisanceLearner, Task, DEFAULT_CLIP_EPS};
use crate::error::{Error, Result};
use crate::resampling::draw_folds;
use crate::rng::derive_seed;

const TUNE_STREAM: u64 = 0x5455_4e45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Mse,
    ClassificationError,
}

/// Grid-search configuration.
///
/// `grid` maps tunable parameter names to candidate values; candidates are
/// the cartesian product, enumerated with the last listed parameter varying
/// fastest. Ties keep the earliest candidate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneSettings {
    pub grid: Vec<(String, Vec<f64>)>,
    #[serde(default = "default_cv_folds")]
    pub cv_folds: usize,
    #[serde(default)]
    pub measure: Option<Measure>,
    /// When on, the estimator re-tunes on every cross-fitting training fold
    /// instead of once on the whole sample.
    #[serde(default)]
    pub tune_on_folds: bool,
}

fn default_cv_folds() -> usize {
    5
}

fn task_of(template: &LearnerSpec) -> Task {
    match &template.kind {
        LearnerKind::Logistic { .. } => Task::Classification,
        LearnerKind::RandomForest { task, .. } => *task,
        _ => Task::Regression,
    }
}

/// Scores every grid point by cross-validation and returns the best
/// specification. All candidates share the same fold plan and per-fold
/// seeds, so identical specifications score identically.
pub fn tune_grid_search(
    template: &LearnerSpec,
    settings: &TuneSettings,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    seed: u64,
) -> Result<LearnerSpec> {
    Ok(tune_grid_search_detailed(template, settings, x, y, seed)?.0)
}

/// Like [`tune_grid_search`], additionally returning every evaluated
/// candidate with its cross-validated score, in evaluation order.
pub fn tune_grid_search_detailed(
    template: &LearnerSpec,
    settings: &TuneSettings,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    seed: u64,
) -> Result<(LearnerSpec, Vec<(LearnerSpec, f64)>)> {
    if settings.grid.is_empty() || settings.grid.iter().any(|(_, vals)| vals.is_empty()) {
        return Err(Error::EmptyGrid);
    }
    if settings.cv_folds < 2 {
        return Err(Error::InvalidLearnerSpec(format!(
            "cv_folds must be >= 2, got {}",
            settings.cv_folds
        )));
    }

    let task = task_of(template);
    let measure = settings.measure.unwrap_or(match task {
        Task::Regression => Measure::Mse,
        Task::Classification => Measure::ClassificationError,
    });

    // cartesian product, last parameter fastest
    let mut candidates: Vec<LearnerSpec> = vec![template.clone()];
    for (name, values) in &settings.grid {
        let mut next = Vec::with_capacity(candidates.len() * values.len());
        for base in &candidates {
            for &v in values {
                next.push(base.with_param(name, v)?);
            }
        }
        candidates = next;
    }

    let n = x.nrows();
    let plan = draw_folds(n, settings.cv_folds, 1, derive_seed(seed, &[TUNE_STREAM]))?;

    let mut evaluated = Vec::with_capacity(candidates.len());
    let mut best: Option<usize> = None;
    for (ci, candidate) in candidates.iter().enumerate() {
        let mut total = 0.0;
        for (fold, split) in plan.splits(0).iter().enumerate() {
            let x_train = gather_rows(x, &split.train);
            let y_train: ndarray::Array1<f64> = split.train.iter().map(|&i| y[i]).collect();
            let x_test = gather_rows(x, &split.test);
            let fit_seed = derive_seed(seed, &[TUNE_STREAM, fold as u64]);
            let model =
                candidate.fit(task, x_train.view(), y_train.view(), fit_seed, DEFAULT_CLIP_EPS)?;
            let pred = model.predict(x_test.view());
            for (&i, p) in split.test.iter().zip(&pred) {
                total += match measure {
                    Measure::Mse => {
                        let e = y[i] - p;
                        e * e
                    }
                    Measure::ClassificationError => {
                        let class = if *p > 0.5 { 1.0 } else { 0.0 };
                        if class == y[i] {
                            0.0
                        } else {
                            1.0
                        }
                    }
                };
            }
        }
        let score = total / n as f64;
        evaluated.push((candidate.clone(), score));
        if best.is_none_or(|b| score < evaluated[b].1) {
            best = Some(ci);
        }
    }

    let winner = evaluated[best.expect("at least one candidate")].0.clone();
    Ok((winner, evaluated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use ndarray::{Array1, Array2};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn grid_11() -> Vec<f64> {
        (0..11).map(|i| 0.05 + 0.005 * i as f64).collect()
    }

    #[test]
    fn evaluates_every_grid_point_once() {
        let mut rng = substream(1, &[3]);
        let x = Array2::from_shape_fn((50, 4), |_| rng.sample::<f64, _>(StandardNormal));
        let y: Array1<f64> = x.column(0).to_owned()
            + Array1::from_shape_fn(50, |_| rng.sample::<f64, _>(StandardNormal));
        let settings = TuneSettings {
            grid: vec![("lambda".into(), grid_11())],
            cv_folds: 5,
            measure: None,
            tune_on_folds: false,
        };
        let (winner, evaluated) =
            tune_grid_search_detailed(&LearnerSpec::lasso(0.0), &settings, x.view(), y.view(), 7)
                .unwrap();
        assert_eq!(evaluated.len(), 11);
        assert!(grid_11().iter().any(|&l| LearnerSpec::lasso(l) == winner));
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let x = Array2::from_shape_fn((20, 2), |(i, j)| (i * 2 + j) as f64);
        let y = Array1::from_shape_fn(20, |i| i as f64);
        let settings = TuneSettings {
            grid: vec![("lambda".into(), vec![0.25])],
            cv_folds: 2,
            measure: None,
            tune_on_folds: false,
        };
        let winner =
            tune_grid_search(&LearnerSpec::ridge(1.0), &settings, x.view(), y.view(), 0).unwrap();
        assert_eq!(winner, LearnerSpec::ridge(0.25));
    }

    #[test]
    fn ties_keep_the_earlier_candidate() {
        // both penalties exceed lambda_max, so both fit the null model and
        // score identically; the first must win
        let mut rng = substream(2, &[4]);
        let x = Array2::from_shape_fn((40, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let y: Array1<f64> = Array1::from_shape_fn(40, |_| rng.sample::<f64, _>(StandardNormal));
        let lmax = super::super::lambda_max(x.view(), y.view());
        let settings = TuneSettings {
            grid: vec![("lambda".into(), vec![5.0 * lmax, 7.0 * lmax])],
            cv_folds: 4,
            measure: None,
            tune_on_folds: false,
        };
        let winner =
            tune_grid_search(&LearnerSpec::lasso(0.0), &settings, x.view(), y.view(), 3).unwrap();
        assert_eq!(winner, LearnerSpec::lasso(5.0 * lmax));
    }

    #[test]
    fn empty_grid_is_rejected() {
        let x = Array2::zeros((10, 1));
        let y = Array1::zeros(10);
        let settings = TuneSettings {
            grid: vec![],
            cv_folds: 2,
            measure: None,
            tune_on_folds: false,
        };
        assert!(matches!(
            tune_grid_search(&LearnerSpec::ridge(1.0), &settings, x.view(), y.view(), 0),
            Err(Error::EmptyGrid)
        ));
    }
}

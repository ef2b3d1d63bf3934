//! Built-in nuisance estimators.
//!
//! All learners are implemented in this crate: ordinary and ridge least
//! squares, lasso via cyclic coordinate descent (with an optional
//! cross-validated penalty choice), L2-penalized logistic regression, and
//! bagged CART random forests. Classification learners return probabilities
//! clipped into `[clip_eps, 1 - clip_eps]`.
//!
//! Lasso and ridge standardize columns internally (centering, population
//! standard deviation) and report coefficients on the original scale.
//! Zero-variance columns get zero coefficients and are never chosen for
//! forest splits.

mod forest;
mod lasso;
mod linear;
mod logistic;
mod tune;

pub use forest::{fit_random_forest, ForestParams, ForestPredictor};
pub use lasso::{fit_lasso_cd, fit_lasso_cv, lambda_max, LassoPredictor};
pub use linear::{fit_ols, fit_ridge, LinearPredictor};
pub use logistic::{fit_logistic, LogisticPredictor};
pub use tune::{tune_grid_search, Measure, TuneSettings};

use std::sync::Arc;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Default probability clipping bound for classification predictors.
pub const DEFAULT_CLIP_EPS: f64 = 0.01;

/// Prediction target type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Regression,
    Classification,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Regression => write!(f, "regression"),
            Task::Classification => write!(f, "classification"),
        }
    }
}

/// A fitted model exposing prediction on new feature rows.
pub trait Predictor: Send + Sync {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64>;
}

/// Anything that can fit a nuisance model on a data subset.
///
/// The estimator pipeline passes a fully derived `seed` identifying the
/// (repetition, fold, treatment, slot) the fit belongs to, which keeps
/// results independent of scheduling.
pub trait NuisanceLearner: Send + Sync {
    fn fit(
        &self,
        task: Task,
        x: ArrayView2<'_, f64>,
        y: ArrayView1<'_, f64>,
        seed: u64,
        clip_eps: f64,
    ) -> Result<Box<dyn Predictor>>;
}

impl<F> NuisanceLearner for F
where
    F: Fn(Task, ArrayView2<'_, f64>, ArrayView1<'_, f64>, u64, f64) -> Result<Box<dyn Predictor>>
        + Send
        + Sync,
{
    fn fit(
        &self,
        task: Task,
        x: ArrayView2<'_, f64>,
        y: ArrayView1<'_, f64>,
        seed: u64,
        clip_eps: f64,
    ) -> Result<Box<dyn Predictor>> {
        self(task, x, y, seed, clip_eps)
    }
}

/// Learner choice plus hyperparameters, expressible in config files as a
/// `kind` tag with a parameter map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LearnerKind {
    #[serde(rename = "ols")]
    Ols,
    #[serde(rename = "ridge")]
    Ridge { lambda: f64 },
    #[serde(rename = "lasso")]
    Lasso { lambda: f64 },
    #[serde(rename = "lasso_cv")]
    LassoCv {
        #[serde(default)]
        lambda_grid: Option<Vec<f64>>,
        #[serde(default = "default_cv_folds")]
        cv_folds: usize,
    },
    #[serde(rename = "logistic")]
    Logistic {
        #[serde(default)]
        l2_lambda: f64,
    },
    #[serde(rename = "random_forest")]
    RandomForest {
        num_trees: usize,
        mtry: usize,
        min_node_size: usize,
        max_depth: usize,
        #[serde(default)]
        task: Task,
    },
}

fn default_cv_folds() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    #[serde(flatten)]
    pub kind: LearnerKind,
    #[serde(default)]
    pub seed: u64,
}

impl LearnerSpec {
    pub fn ols() -> Self {
        Self { kind: LearnerKind::Ols, seed: 0 }
    }

    pub fn ridge(lambda: f64) -> Self {
        Self { kind: LearnerKind::Ridge { lambda }, seed: 0 }
    }

    pub fn lasso(lambda: f64) -> Self {
        Self { kind: LearnerKind::Lasso { lambda }, seed: 0 }
    }

    /// Lasso with cross-validated penalty over the default grid of 100
    /// log-spaced values.
    pub fn lasso_cv(cv_folds: usize) -> Self {
        Self { kind: LearnerKind::LassoCv { lambda_grid: None, cv_folds }, seed: 0 }
    }

    pub fn lasso_cv_with_grid(grid: Vec<f64>, cv_folds: usize) -> Self {
        Self { kind: LearnerKind::LassoCv { lambda_grid: Some(grid), cv_folds }, seed: 0 }
    }

    pub fn logistic(l2_lambda: f64) -> Self {
        Self { kind: LearnerKind::Logistic { l2_lambda }, seed: 0 }
    }

    pub fn random_forest(
        num_trees: usize,
        mtry: usize,
        min_node_size: usize,
        max_depth: usize,
        task: Task,
    ) -> Self {
        Self {
            kind: LearnerKind::RandomForest { num_trees, mtry, min_node_size, max_depth, task },
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn name(&self) -> &'static str {
        match self.kind {
            LearnerKind::Ols => "ols",
            LearnerKind::Ridge { .. } => "ridge",
            LearnerKind::Lasso { .. } => "lasso",
            LearnerKind::LassoCv { .. } => "lasso_cv",
            LearnerKind::Logistic { .. } => "logistic",
            LearnerKind::RandomForest { .. } => "random_forest",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidLearnerSpec(msg));
        match &self.kind {
            LearnerKind::Ols => Ok(()),
            LearnerKind::Ridge { lambda } | LearnerKind::Lasso { lambda } => {
                if *lambda < 0.0 {
                    bad(format!("lambda must be >= 0, got {lambda}"))
                } else {
                    Ok(())
                }
            }
            LearnerKind::LassoCv { lambda_grid, cv_folds } => {
                if lambda_grid.as_ref().is_some_and(|g| g.is_empty()) {
                    return bad("lambda_grid must be non-empty".into());
                }
                if lambda_grid.as_ref().is_some_and(|g| g.iter().any(|l| *l < 0.0)) {
                    return bad("lambda_grid values must be >= 0".into());
                }
                if *cv_folds < 2 {
                    return bad(format!("cv_folds must be >= 2, got {cv_folds}"));
                }
                Ok(())
            }
            LearnerKind::Logistic { l2_lambda } => {
                if *l2_lambda < 0.0 {
                    bad(format!("l2_lambda must be >= 0, got {l2_lambda}"))
                } else {
                    Ok(())
                }
            }
            LearnerKind::RandomForest { num_trees, mtry, min_node_size, max_depth, .. } => {
                if *num_trees < 1 {
                    return bad("num_trees must be >= 1".into());
                }
                if *mtry < 1 {
                    return bad("mtry must be >= 1".into());
                }
                if *min_node_size < 1 {
                    return bad("min_node_size must be >= 1".into());
                }
                if *max_depth < 1 {
                    return bad("max_depth must be >= 1".into());
                }
                Ok(())
            }
        }
    }

    /// Replaces one tunable parameter by name; used by grid search.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let learner = self.name();
        let unknown = move || {
            Err(Error::InvalidLearnerSpec(format!(
                "learner `{learner}` has no tunable parameter `{name}`"
            )))
        };
        let mut spec = self.clone();
        match &mut spec.kind {
            LearnerKind::Ridge { lambda } | LearnerKind::Lasso { lambda } if name == "lambda" => {
                *lambda = value;
            }
            LearnerKind::Logistic { l2_lambda } if name == "l2_lambda" => {
                *l2_lambda = value;
            }
            LearnerKind::RandomForest { num_trees, mtry, min_node_size, max_depth, .. } => {
                match name {
                    "num_trees" => *num_trees = value as usize,
                    "mtry" => *mtry = value as usize,
                    "min_node_size" => *min_node_size = value as usize,
                    "max_depth" => *max_depth = value as usize,
                    _ => return unknown(),
                }
            }
            _ => return unknown(),
        }
        Ok(spec)
    }
}

impl NuisanceLearner for LearnerSpec {
    fn fit(
        &self,
        task: Task,
        x: ArrayView2<'_, f64>,
        y: ArrayView1<'_, f64>,
        seed: u64,
        clip_eps: f64,
    ) -> Result<Box<dyn Predictor>> {
        self.validate()?;
        let seed = derive_seed(self.seed, &[seed]);
        let mismatch = || {
            Err(Error::LearnerTaskMismatch { learner: self.name().into(), task: task.to_string() })
        };
        match (&self.kind, task) {
            (LearnerKind::Ols, Task::Regression) => {
                Ok(Box::new(fit_ols(x, y)?) as Box<dyn Predictor>)
            }
            (LearnerKind::Ridge { lambda }, Task::Regression) => {
                Ok(Box::new(fit_ridge(x, y, *lambda)?))
            }
            (LearnerKind::Lasso { lambda }, Task::Regression) => {
                Ok(Box::new(fit_lasso_cd(x, y, *lambda)?))
            }
            (LearnerKind::LassoCv { lambda_grid, cv_folds }, Task::Regression) => {
                Ok(Box::new(fit_lasso_cv(x, y, lambda_grid.as_deref(), *cv_folds, seed)?))
            }
            (LearnerKind::Logistic { l2_lambda }, Task::Classification) => {
                Ok(Box::new(fit_logistic(x, y, *l2_lambda)?.with_clip_eps(clip_eps)))
            }
            (LearnerKind::RandomForest { task: spec_task, .. }, _) if *spec_task != task => {
                mismatch()
            }
            (
                LearnerKind::RandomForest { num_trees, mtry, min_node_size, max_depth, task },
                _,
            ) => {
                let params = ForestParams {
                    num_trees: *num_trees,
                    mtry: *mtry,
                    min_node_size: *min_node_size,
                    max_depth: *max_depth,
                    task: *task,
                };
                Ok(Box::new(fit_random_forest(x, y, &params, seed)?.with_clip_eps(clip_eps)))
            }
            _ => mismatch(),
        }
    }
}

/// A "learner" backed by a fixed function of the feature rows; fitting is a
/// no-op. Useful for oracle analyses where the true nuisance function is
/// known.
#[derive(Clone)]
pub struct FunctionLearner(pub Arc<dyn Fn(ArrayView2<'_, f64>) -> Array1<f64> + Send + Sync>);

impl FunctionLearner {
    pub fn new(f: impl Fn(ArrayView2<'_, f64>) -> Array1<f64> + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }
}

struct FunctionPredictor(Arc<dyn Fn(ArrayView2<'_, f64>) -> Array1<f64> + Send + Sync>);

impl Predictor for FunctionPredictor {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        (self.0)(x)
    }
}

impl NuisanceLearner for FunctionLearner {
    fn fit(
        &self,
        _task: Task,
        _x: ArrayView2<'_, f64>,
        _y: ArrayView1<'_, f64>,
        _seed: u64,
        _clip_eps: f64,
    ) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(FunctionPredictor(self.0.clone())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learner_spec_toml_round_trip() {
        let toml_str = r#"
kind = "random_forest"
num_trees = 100
mtry = 20
min_node_size = 2
max_depth = 5
"#;
        let spec: LearnerSpec = toml::from_str(toml_str).unwrap();
        assert_eq!(
            spec,
            LearnerSpec::random_forest(100, 20, 2, 5, Task::Regression)
        );

        let spec: LearnerSpec = toml::from_str("kind = \"lasso_cv\"\n").unwrap();
        assert_eq!(spec, LearnerSpec::lasso_cv(5));
    }

    #[test]
    fn task_mismatch_is_rejected() {
        let x = ndarray::Array2::zeros((4, 1));
        let y = ndarray::array![0.0, 1.0, 0.0, 1.0];
        let err = LearnerSpec::ols().fit(Task::Classification, x.view(), y.view(), 0, 0.01);
        assert!(matches!(err, Err(Error::LearnerTaskMismatch { .. })));
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(LearnerSpec::ridge(-1.0).validate().is_err());
        assert!(LearnerSpec::random_forest(0, 1, 1, 1, Task::Regression).validate().is_err());
    }
}

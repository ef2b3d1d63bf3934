//! Double/debiased machine learning for causal inference.
//!
//! The crate estimates causal parameters in partially linear and interactive
//! (instrumental-variable) models by combining three ingredients:
//!
//! 1. **Neyman-orthogonal score functions** whose moment conditions are
//!    first-order insensitive to estimation error in nuisance functions
//!    ([`scores`]),
//! 2. **machine-learning nuisance estimators** built into the crate
//!    ([`learners`]): least squares, ridge, coordinate-descent lasso with
//!    cross-validated penalty choice, penalized logistic regression, and
//!    bagged CART random forests,
//! 3. **cross-fitting** over repeated K-fold sample splits ([`resampling`],
//!    [`estimator`]).
//!
//! On top of point estimation, [`inference`] provides a multiplier bootstrap
//! for simultaneous confidence bands and Romano-Wolf / Bonferroni / Holm
//! p-value adjustments. [`dgp`] contains the synthetic data-generating
//! processes used by the simulation harness in [`sim`], which reproduces
//! coverage and family-wise error rate experiments at desk scale.
//!
//! A worked guide lives in the `book/` directory of the repository; its code
//! listings compile as doc-tests of this crate (see [`book`]).
//!
//! # Quick start
//!
//! ```
//! use dml::dgp;
//! use dml::estimator::{DmlConfig, DmlProcedure, Model};
//! use dml::learners::LearnerSpec;
//! use dml::scores::ScoreSpec;
//!
//! // A partially linear data set with known effect 0.5.
//! let sample = dgp::gen_plr_ccddhnr2018(0.5, 200, 5, 42);
//!
//! let cfg = DmlConfig::new(Model::Plr, ScoreSpec::PlrPartiallingOut)
//!     .with_n_folds(2)
//!     .with_seed(7)
//!     .with_ml_l(LearnerSpec::lasso_cv(5))
//!     .with_ml_m(LearnerSpec::lasso_cv(5));
//!
//! let fit = dml::estimator::fit(&sample.dataset, &cfg).unwrap();
//! let (lo, hi) = fit.confint(0.95).unwrap()[0];
//! assert!(lo < 0.5 && 0.5 < hi);
//! ```

pub mod book;
pub mod dataset;
pub mod dgp;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod learners;
pub mod resampling;
pub mod rng;
pub mod scores;
pub mod sim;

pub use error::{Error, Result};

//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ---- data backend ----
    #[error("column `{0}` is assigned to more than one variable role")]
    DuplicateRole(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("non-finite value in column `{column}` at row {row}")]
    NonFiniteValue { column: String, row: usize },
    #[error("parse error at row {row}, column {col}: {msg}")]
    ParseError { row: usize, col: usize, msg: String },
    #[error("treatment index {index} out of range (have {n_treat} treatments)")]
    TreatmentIndexOutOfRange { index: usize, n_treat: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),

    // ---- resampling ----
    #[error("invalid fold count: {0}")]
    InvalidFoldCount(String),
    #[error("test sets do not partition the observation indices: {0}")]
    NotAPartition(String),
    #[error("observation index {index} out of range for n_obs = {n_obs}")]
    IndexOutOfRange { index: usize, n_obs: usize },
    #[error("length mismatch in sample splitting: {0}")]
    LengthMismatch(String),

    // ---- learners ----
    #[error("singular design matrix; add regularization or drop collinear columns")]
    SingularDesign,
    #[error("coordinate descent did not converge within {max_iter} iterations (last max update {last_delta:.3e})")]
    NonConvergence { max_iter: usize, last_delta: f64, last_iterate: Vec<f64> },
    #[error("perfect separation detected in logistic regression; set l2_lambda > 0")]
    SeparationDetected,
    #[error("empty tuning grid")]
    EmptyGrid,
    #[error("invalid learner specification: {0}")]
    InvalidLearnerSpec(String),
    #[error("learner `{learner}` cannot handle {task} tasks")]
    LearnerTaskMismatch { learner: String, task: String },

    // ---- scores ----
    #[error("score input length mismatch: {0}")]
    ScoreLengthMismatch(String),
    #[error("propensity value {value} outside ({lo}, {hi})")]
    PropensityOutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("no treated observations: P(D=1) estimate is zero")]
    ZeroTreatedShare,
    #[error("custom score returned invalid output: {0}")]
    BadCustomReturn(String),

    // ---- estimator ----
    #[error("missing learner for nuisance slot `{0}`")]
    MissingLearner(&'static str),
    #[error("treatment `{0}` must be binary (0/1) for interactive models")]
    NonBinaryTreatment(String),
    #[error("instrument `{0}` must be binary (0/1) for the interactive IV model")]
    NonBinaryInstrument(String),
    #[error("model requires an instrument column but the dataset declares none")]
    NoInstrument,
    #[error("model supports exactly one instrument; dataset declares {0}")]
    UnsupportedInstrumentCount(usize),
    #[error("fold {fold} has a degenerate score (sum of psi_a is numerically zero)")]
    DegenerateFold { fold: usize },
    #[error("degenerate score: pooled sum of psi_a is numerically zero")]
    DegenerateScore,
    #[error("required training subsample is empty: {0}")]
    EmptyArm(String),
    #[error("dataset too small: n_obs = {n_obs} but the plan needs at least {min}")]
    TooFewObservations { n_obs: usize, min: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    // ---- inference ----
    #[error("fit has not been run")]
    FitNotRun,
    #[error("bootstrap has not been run or has too few draws ({got} < {need})")]
    BootstrapNotRun { got: usize, need: usize },
    #[error("confidence level must lie strictly between 0 and 1, got {0}")]
    InvalidLevel(f64),
    #[error("p-value {0} outside [0, 1]")]
    InvalidPValue(f64),
}

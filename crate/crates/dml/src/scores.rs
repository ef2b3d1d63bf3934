//! Neyman-orthogonal score functions.
//!
//! Every built-in score is linear in the target parameter,
//! `psi(W; theta, eta) = psi_a(W; eta) * theta + psi_b(W; eta)`,
//! so the estimating equation has the closed-form solution
//! `theta = -sum(psi_b) / sum(psi_a)`. This module computes the per-
//! observation `psi_a`/`psi_b` pairs for all seven built-in model/score
//! combinations, adopts user-supplied custom scores, and provides a
//! numerical check of the orthogonality property itself.
//!
//! Nuisance naming: `l` is `E[Y|X]`, `m` is `E[D|X]` (or `P[D=1|X]`, or
//! `P[Z=1|X]` in the interactive IV model), `r` is `E[D|X]` in the partially
//! linear IV model (or `P[D=1|Z,X]` in the interactive one), and `g` is
//! `E[Y - D theta|X]`. Parts of the literature write `g` for what is called
//! `l` here; this crate uses the convention above throughout.

use std::sync::Arc;

use ndarray::{Array1, Array3, ArrayView1};

use crate::error::{Error, Result};
use crate::resampling::Split;

/// Per-observation score decomposition indexed by
/// `(observation, repetition, treatment)`.
///
/// When a repetition scores only a subset of observations (no-cross-fitting
/// plans), rows outside that subset hold zero.
#[derive(Debug, Clone)]
pub struct ScorePanel {
    pub psi_a: Array3<f64>,
    pub psi_b: Array3<f64>,
}

impl ScorePanel {
    pub fn zeros(n_obs: usize, n_rep: usize, n_treat: usize) -> Self {
        ScorePanel {
            psi_a: Array3::zeros((n_obs, n_rep, n_treat)),
            psi_b: Array3::zeros((n_obs, n_rep, n_treat)),
        }
    }
}

/// The score `psi` at a given parameter value; linearity is exact because
/// this is the only evaluation path.
pub fn evaluate_at(psi_a: &Array1<f64>, psi_b: &Array1<f64>, theta: f64) -> Array1<f64> {
    psi_a * theta + psi_b
}

/// Everything a custom score routine receives: the outcome, the active
/// treatment, the available nuisance predictions, and the sample splits of
/// the repetition under consideration.
pub struct CustomScoreArgs<'a> {
    pub y: ArrayView1<'a, f64>,
    pub d: ArrayView1<'a, f64>,
    pub l_hat: ArrayView1<'a, f64>,
    pub m_hat: ArrayView1<'a, f64>,
    pub g_hat: Option<ArrayView1<'a, f64>>,
    pub splits: &'a [Split],
}

pub type CustomScoreFn =
    dyn Fn(&CustomScoreArgs<'_>) -> Result<(Array1<f64>, Array1<f64>)> + Send + Sync;

/// A user-supplied score routine returning per-observation `psi_a`, `psi_b`.
#[derive(Clone)]
pub struct CustomScore(pub Arc<CustomScoreFn>);

impl CustomScore {
    pub fn new(
        f: impl Fn(&CustomScoreArgs<'_>) -> Result<(Array1<f64>, Array1<f64>)>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        CustomScore(Arc::new(f))
    }
}

impl std::fmt::Debug for CustomScore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CustomScore(..)")
    }
}

/// Score choice for a model.
#[derive(Debug, Clone)]
pub enum ScoreSpec {
    PlrPartiallingOut,
    PlrIvType,
    PlivPartiallingOut,
    PlivIvType,
    IrmAte,
    IrmAtte,
    IivmLate,
    Custom(CustomScore),
}

impl ScoreSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ScoreSpec::PlrPartiallingOut | ScoreSpec::PlivPartiallingOut => "partialling out",
            ScoreSpec::PlrIvType | ScoreSpec::PlivIvType => "IV-type",
            ScoreSpec::IrmAte => "ATE",
            ScoreSpec::IrmAtte => "ATTE",
            ScoreSpec::IivmLate => "LATE",
            ScoreSpec::Custom(_) => "custom",
        }
    }
}

fn check_len(n: usize, len: usize, what: &str) -> Result<()> {
    if len != n {
        return Err(Error::ScoreLengthMismatch(format!("{what} has length {len}, expected {n}")));
    }
    Ok(())
}

fn check_prob(v: ArrayView1<'_, f64>) -> Result<()> {
    for p in v {
        if !(*p > 0.0 && *p < 1.0) {
            return Err(Error::PropensityOutOfRange { value: *p, lo: 0.0, hi: 1.0 });
        }
    }
    Ok(())
}

/// Partialling-out score for the partially linear model:
/// `psi_a = -(d - m)^2`, `psi_b = (y - l)(d - m)`.
pub fn plr_partialling_out(
    y: ArrayView1<'_, f64>,
    d: ArrayView1<'_, f64>,
    l_hat: ArrayView1<'_, f64>,
    m_hat: ArrayView1<'_, f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = y.len();
    check_len(n, d.len(), "d")?;
    check_len(n, l_hat.len(), "l_hat")?;
    check_len(n, m_hat.len(), "m_hat")?;
    let mut psi_a = Array1::zeros(n);
    let mut psi_b = Array1::zeros(n);
    for i in 0..n {
        let v = d[i] - m_hat[i];
        psi_a[i] = -(v * v);
        psi_b[i] = (y[i] - l_hat[i]) * v;
    }
    Ok((psi_a, psi_b))
}

/// IV-type score for the partially linear model:
/// `psi_a = -d (d - m)`, `psi_b = (y - g)(d - m)`.
pub fn plr_iv_type(
    y: ArrayView1<'_, f64>,
    d: ArrayView1<'_, f64>,
    g_hat: ArrayView1<'_, f64>,
    m_hat: ArrayView1<'_, f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = y.len();
    check_len(n, d.len(), "d")?;
    check_len(n, g_hat.len(), "g_hat")?;
    check_len(n, m_hat.len(), "m_hat")?;
    let mut psi_a = Array1::zeros(n);
    let mut psi_b = Array1::zeros(n);
    for i in 0..n {
        let v = d[i] - m_hat[i];
        psi_a[i] = -d[i] * v;
        psi_b[i] = (y[i] - g_hat[i]) * v;
    }
    Ok((psi_a, psi_b))
}

/// Partialling-out score for the partially linear IV model:
/// `psi_a = -(d - r)(z - m)`, `psi_b = (y - l)(z - m)`.
pub fn pliv_partialling_out(
    y: ArrayView1<'_, f64>,
    d: ArrayView1<'_, f64>,
    z: ArrayView1<'_, f64>,
    l_hat: ArrayView1<'_, f64>,
    m_hat: ArrayView1<'_, f64>,
    r_hat: ArrayView1<'_, f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = y.len();
    check_len(n, d.len(), "d")?;
    check_len(n, z.len(), "z")?;
    check_len(n, l_hat.len(), "l_hat")?;
    check_len(n, m_hat.len(), "m_hat")?;
    check_len(n, r_hat.len(), "r_hat")?;
    let mut psi_a = Array1::zeros(n);
    let mut psi_b = Array1::zeros(n);
    for i in 0..n {
        let w = z[i] - m_hat[i];
        psi_a[i] = -(d[i] - r_hat[i]) * w;
        psi_b[i] = (y[i] - l_hat[i]) * w;
    }
    Ok((psi_a, psi_b))
}

/// IV-type score for the partially linear IV model:
/// `psi_a = -d (z - m)`, `psi_b = (y - g)(z - m)`.
pub fn pliv_iv_type(
    y: ArrayView1<'_, f64>,
    d: ArrayView1<'_, f64>,
    z: ArrayView1<'_, f64>,
    g_hat: ArrayView1<'_, f64>,
    m_hat: ArrayView1<'_, f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = y.len();
    check_len(n, d.len(), "d")?;
    check_len(n, z.len(), "z")?;
    check_len(n, g_hat.len(), "g_hat")?;
    check_len(n, m_hat.len(), "m_hat")?;
    let mut psi_a = Array1::zeros(n);
    let mut psi_b = Array1::zeros(n);
    for i in 0..n {
        let w = z[i] - m_hat[i];
        psi_a[i] = -d[i] * w;
        psi_b[i] = (y[i] - g_hat[i]) * w;
    }
    Ok((psi_a, psi_b))
}

/// Doubly robust ATE score for the interactive regression model:
/// `psi_a = -1`,
/// `psi_b = (g1 - g0) + d (y - g1)/m - (1 - d)(y - g0)/(1 - m)`.
pub fn irm_ate(
    y: ArrayView1<'_, f64>,
    d: ArrayView1<'_, f64>,
    g0_hat: ArrayView1<'_, f64>,
    g1_hat: ArrayView1<'_, f64>,
    m_hat: ArrayView1<'_, f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = y.len();
    check_len(n, d.len(), "d")?;
    check_len(n, g0_hat.len(), "g0_hat")?;
    check_len(n, g1_hat.len(), "g1_hat")?;
    check_len(n, m_hat.len(), "m_hat")?;
    check_prob(m_hat)?;
    let mut psi_a = Array1::zeros(n);
    let mut psi_b = Array1::zeros(n);
    for i in 0..n {
        psi_a[i] = -1.0;
        psi_b[i] = (g1_hat[i] - g0_hat[i]) + d[i] * (y[i] - g1_hat[i]) / m_hat[i]
            - (1.0 - d[i]) * (y[i] - g0_hat[i]) / (1.0 - m_hat[i]);
    }
    Ok((psi_a, psi_b))
}

/// ATTE score for the interactive regression model; `p_hat` estimates
/// `P(D=1)`. Does not require an estimate of `E[Y|D=1,X]`.
pub fn irm_atte(
    y: ArrayView1<'_, f64>,
    d: ArrayView1<'_, f64>,
    g0_hat: ArrayView1<'_, f64>,
    m_hat: ArrayView1<'_, f64>,
    p_hat: f64,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = y.len();
    check_len(n, d.len(), "d")?;
    check_len(n, g0_hat.len(), "g0_hat")?;
    check_len(n, m_hat.len(), "m_hat")?;
    if p_hat <= 0.0 {
        return Err(Error::ZeroTreatedShare);
    }
    if p_hat >= 1.0 {
        return Err(Error::PropensityOutOfRange { value: p_hat, lo: 0.0, hi: 1.0 });
    }
    check_prob(m_hat)?;
    let mut psi_a = Array1::zeros(n);
    let mut psi_b = Array1::zeros(n);
    for i in 0..n {
        let u0 = y[i] - g0_hat[i];
        psi_a[i] = -d[i] / p_hat;
        psi_b[i] = d[i] * u0 / p_hat - m_hat[i] * (1.0 - d[i]) * u0 / (p_hat * (1.0 - m_hat[i]));
    }
    Ok((psi_a, psi_b))
}

/// LATE score for the interactive IV model; `m` is the instrument
/// propensity `P[Z=1|X]`, `r0`/`r1` are `P[D=1|Z=z,X]`, `g0`/`g1` are
/// `E[Y|Z=z,X]`.
#[allow(clippy::too_many_arguments)]
pub fn iivm_late(
    y: ArrayView1<'_, f64>,
    d: ArrayView1<'_, f64>,
    z: ArrayView1<'_, f64>,
    g0_hat: ArrayView1<'_, f64>,
    g1_hat: ArrayView1<'_, f64>,
    m_hat: ArrayView1<'_, f64>,
    r0_hat: ArrayView1<'_, f64>,
    r1_hat: ArrayView1<'_, f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = y.len();
    check_len(n, d.len(), "d")?;
    check_len(n, z.len(), "z")?;
    check_len(n, g0_hat.len(), "g0_hat")?;
    check_len(n, g1_hat.len(), "g1_hat")?;
    check_len(n, m_hat.len(), "m_hat")?;
    check_len(n, r0_hat.len(), "r0_hat")?;
    check_len(n, r1_hat.len(), "r1_hat")?;
    check_prob(m_hat)?;
    let mut psi_a = Array1::zeros(n);
    let mut psi_b = Array1::zeros(n);
    for i in 0..n {
        let w1 = z[i] / m_hat[i];
        let w0 = (1.0 - z[i]) / (1.0 - m_hat[i]);
        psi_b[i] = (g1_hat[i] - g0_hat[i]) + w1 * (y[i] - g1_hat[i]) - w0 * (y[i] - g0_hat[i]);
        psi_a[i] = -((r1_hat[i] - r0_hat[i]) + w1 * (d[i] - r1_hat[i]) - w0 * (d[i] - r0_hat[i]));
    }
    Ok((psi_a, psi_b))
}

/// Runs a custom score routine and validates its output: two vectors of
/// length `n` with finite entries.
pub fn evaluate_custom(
    score: &CustomScore,
    args: &CustomScoreArgs<'_>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = args.y.len();
    let (psi_a, psi_b) = (score.0)(args)?;
    if psi_a.len() != n || psi_b.len() != n {
        return Err(Error::BadCustomReturn(format!(
            "expected two vectors of length {n}, got {} and {}",
            psi_a.len(),
            psi_b.len()
        )));
    }
    if psi_a.iter().chain(psi_b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::BadCustomReturn("non-finite score value".into()));
    }
    Ok((psi_a, psi_b))
}

/// Predicted nuisance values consumed by the built-in scores; only the
/// fields the active score needs have to be present. The same container
/// carries oracle (true) nuisance values in simulation settings.
#[derive(Debug, Clone, Default)]
pub struct NuisanceValues {
    pub l: Option<Array1<f64>>,
    pub m: Option<Array1<f64>>,
    pub g: Option<Array1<f64>>,
    pub r: Option<Array1<f64>>,
    pub g0: Option<Array1<f64>>,
    pub g1: Option<Array1<f64>>,
    pub r0: Option<Array1<f64>>,
    pub r1: Option<Array1<f64>>,
    pub p: Option<f64>,
}

macro_rules! need {
    ($nv:expr, $field:ident) => {
        $nv.$field
            .as_ref()
            .ok_or_else(|| {
                Error::ScoreLengthMismatch(format!(
                    "nuisance component `{}` missing",
                    stringify!($field)
                ))
            })?
            .view()
    };
}

/// Dispatches a built-in score over a [`NuisanceValues`] container.
pub fn evaluate_builtin(
    score: &ScoreSpec,
    y: ArrayView1<'_, f64>,
    d: ArrayView1<'_, f64>,
    z: Option<ArrayView1<'_, f64>>,
    nv: &NuisanceValues,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let need_z =
        || z.ok_or_else(|| Error::ScoreLengthMismatch("instrument column missing".into()));
    match score {
        ScoreSpec::PlrPartiallingOut => plr_partialling_out(y, d, need!(nv, l), need!(nv, m)),
        ScoreSpec::PlrIvType => plr_iv_type(y, d, need!(nv, g), need!(nv, m)),
        ScoreSpec::PlivPartiallingOut => {
            pliv_partialling_out(y, d, need_z()?, need!(nv, l), need!(nv, m), need!(nv, r))
        }
        ScoreSpec::PlivIvType => pliv_iv_type(y, d, need_z()?, need!(nv, g), need!(nv, m)),
        ScoreSpec::IrmAte => irm_ate(y, d, need!(nv, g0), need!(nv, g1), need!(nv, m)),
        ScoreSpec::IrmAtte => {
            irm_atte(y, d, need!(nv, g0), need!(nv, m), nv.p.ok_or(Error::ZeroTreatedShare)?)
        }
        ScoreSpec::IivmLate => iivm_late(
            y,
            d,
            need_z()?,
            need!(nv, g0),
            need!(nv, g1),
            need!(nv, m),
            need!(nv, r0),
            need!(nv, r1),
        ),
        ScoreSpec::Custom(_) => Err(Error::ScoreLengthMismatch(
            "custom scores are evaluated through the estimator, not the builtin dispatcher".into(),
        )),
    }
}

/// Nuisance components a score can be perturbed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NuisanceComponent {
    L,
    M,
    G,
    R,
    G0,
    G1,
    R0,
    R1,
    P,
}

impl NuisanceComponent {
    fn of_score(score: &ScoreSpec) -> Vec<NuisanceComponent> {
        use NuisanceComponent::*;
        match score {
            ScoreSpec::PlrPartiallingOut => vec![L, M],
            ScoreSpec::PlrIvType => vec![G, M],
            ScoreSpec::PlivPartiallingOut => vec![L, M, R],
            ScoreSpec::PlivIvType => vec![G, M],
            ScoreSpec::IrmAte => vec![G0, G1, M],
            ScoreSpec::IrmAtte => vec![G0, M, P],
            ScoreSpec::IivmLate => vec![G0, G1, M, R0, R1],
            ScoreSpec::Custom(_) => vec![L, M, G],
        }
    }

    /// Whether this component is probability-valued for the given score.
    fn is_probability(self, score: &ScoreSpec) -> bool {
        use NuisanceComponent::*;
        matches!(
            (score, self),
            (ScoreSpec::IrmAte | ScoreSpec::IrmAtte, M) | (ScoreSpec::IivmLate, M | R0 | R1)
        )
    }
}

/// One numerical Gateaux derivative: the centered finite difference of the
/// mean score at `theta0` under an additive perturbation `h * direction` of
/// one nuisance component.
#[derive(Debug, Clone)]
pub struct OrthogonalityResult {
    pub component: NuisanceComponent,
    pub derivative: f64,
}

fn perturbed(nv: &NuisanceValues, c: NuisanceComponent, shift: &Array1<f64>) -> NuisanceValues {
    let mut out = nv.clone();
    let apply = |field: &Option<Array1<f64>>| field.as_ref().map(|v| v + shift);
    match c {
        NuisanceComponent::L => out.l = apply(&nv.l),
        NuisanceComponent::M => out.m = apply(&nv.m),
        NuisanceComponent::G => out.g = apply(&nv.g),
        NuisanceComponent::R => out.r = apply(&nv.r),
        NuisanceComponent::G0 => out.g0 = apply(&nv.g0),
        NuisanceComponent::G1 => out.g1 = apply(&nv.g1),
        NuisanceComponent::R0 => out.r0 = apply(&nv.r0),
        NuisanceComponent::R1 => out.r1 = apply(&nv.r1),
        NuisanceComponent::P => out.p = nv.p.map(|p| p + shift[0]),
    }
    out
}

fn mean_score(
    score: &ScoreSpec,
    y: ArrayView1<'_, f64>,
    d: ArrayView1<'_, f64>,
    z: Option<ArrayView1<'_, f64>>,
    nv: &NuisanceValues,
    theta: f64,
) -> Result<f64> {
    let (psi_a, psi_b) = evaluate_builtin(score, y, d, z, nv)?;
    let n = y.len() as f64;
    Ok((psi_a.sum() * theta + psi_b.sum()) / n)
}

/// Centered finite-difference Gateaux derivative of the mean score in one
/// component along an explicit direction.
#[allow(clippy::too_many_arguments)]
pub fn orthogonality_derivative(
    score: &ScoreSpec,
    y: ArrayView1<'_, f64>,
    d: ArrayView1<'_, f64>,
    z: Option<ArrayView1<'_, f64>>,
    oracle: &NuisanceValues,
    component: NuisanceComponent,
    direction: &Array1<f64>,
    h: f64,
) -> Result<f64> {
    let (psi_a, psi_b) = evaluate_builtin(score, y, d, z, oracle)?;
    let sum_a = psi_a.sum();
    if sum_a == 0.0 {
        return Err(Error::DegenerateScore);
    }
    let theta0 = -psi_b.sum() / sum_a;

    let shift = direction * h;
    let up = perturbed(oracle, component, &shift);
    let down = perturbed(oracle, component, &shift.mapv(|v| -v));
    let mean_up = mean_score(score, y, d, z, &up, theta0)?;
    let mean_down = mean_score(score, y, d, z, &down, theta0)?;
    Ok((mean_up - mean_down) / (2.0 * h))
}

/// Checks Neyman orthogonality of a built-in score at oracle nuisances: for
/// every component the score uses, the Gateaux derivative of the mean score
/// at the (empirically solved) `theta0` is computed by centered finite
/// differences.
///
/// Directions: constant one for regression-valued components and the
/// treated-share scalar; `m (1 - m)`-shaped for probability-valued
/// components, which keeps the perturbed values inside `(0, 1)` (a logit
/// shift to first order).
pub fn check_orthogonality(
    score: &ScoreSpec,
    y: ArrayView1<'_, f64>,
    d: ArrayView1<'_, f64>,
    z: Option<ArrayView1<'_, f64>>,
    oracle: &NuisanceValues,
    h: f64,
) -> Result<Vec<OrthogonalityResult>> {
    let n = y.len();
    let mut out = Vec::new();
    for component in NuisanceComponent::of_score(score) {
        let direction = if component.is_probability(score) {
            let field = match component {
                NuisanceComponent::M => oracle.m.as_ref(),
                NuisanceComponent::R0 => oracle.r0.as_ref(),
                NuisanceComponent::R1 => oracle.r1.as_ref(),
                _ => None,
            };
            let probs = field.ok_or_else(|| {
                Error::ScoreLengthMismatch("probability component missing from oracle".into())
            })?;
            probs.mapv(|p| p * (1.0 - p))
        } else {
            Array1::ones(n)
        };
        let derivative =
            orthogonality_derivative(score, y, d, z, oracle, component, &direction, h)?;
        out.push(OrthogonalityResult { component, derivative });
    }
    Ok(out)
}

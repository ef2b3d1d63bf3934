//! L2-penalized logistic regression via damped Newton steps.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::linear::{cholesky_solve, standardize};
use super::{Predictor, DEFAULT_CLIP_EPS};
use crate::error::{Error, Result};

const MAX_NEWTON_ITER: usize = 100;
const OBJ_TOL: f64 = 1e-12;
/// A standardized-scale coefficient beyond this is treated as divergence.
const SEPARATION_BOUND: f64 = 30.0;

/// Logistic model returning clipped probabilities.
#[derive(Debug, Clone)]
pub struct LogisticPredictor {
    coef: Array1<f64>,
    intercept: f64,
    clip_eps: f64,
}

impl LogisticPredictor {
    pub fn coefficients(&self) -> &Array1<f64> {
        &self.coef
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn with_clip_eps(mut self, clip_eps: f64) -> Self {
        self.clip_eps = clip_eps;
        self
    }
}

impl Predictor for LogisticPredictor {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        let lin = x.dot(&self.coef) + self.intercept;
        lin.mapv(|v| logistic(v).clamp(self.clip_eps, 1.0 - self.clip_eps))
    }
}

pub(crate) fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Mean negative log-likelihood plus `l2_lambda/2 * ||slopes||^2`
/// (the intercept is unpenalized).
fn objective(eta: &Array1<f64>, y: ArrayView1<'_, f64>, beta: &Array1<f64>, lambda: f64) -> f64 {
    let n = y.len() as f64;
    let mut nll = 0.0;
    for (e, yi) in eta.iter().zip(y) {
        // log(1 + exp(e)) - y*e, stabilized
        let log1pexp = if *e > 30.0 { *e } else { (1.0 + e.exp()).ln() };
        nll += log1pexp - yi * e;
    }
    let penalty: f64 = beta.iter().skip(1).map(|b| b * b).sum();
    nll / n + 0.5 * lambda * penalty
}

/// Penalized logistic regression of a 0/1 response.
///
/// Standardizes columns internally and reports coefficients on the original
/// scale. With `l2_lambda = 0` and separable data the maximizer does not
/// exist; divergence is detected and reported as [`Error::SeparationDetected`].
pub fn fit_logistic(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    l2_lambda: f64,
) -> Result<LogisticPredictor> {
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::LengthMismatch(format!("{n} rows vs {} targets", y.len())));
    }
    if l2_lambda < 0.0 {
        return Err(Error::InvalidLearnerSpec(format!(
            "l2_lambda must be >= 0, got {l2_lambda}"
        )));
    }
    for v in y {
        if *v != 0.0 && *v != 1.0 {
            return Err(Error::InvalidLearnerSpec(format!(
                "logistic regression needs a 0/1 response, found {v}"
            )));
        }
    }

    let p = x.ncols();
    let std = standardize(x);
    // augmented design [1, X_std]
    let mut xa = Array2::ones((n, p + 1));
    xa.slice_mut(ndarray::s![.., 1..]).assign(&std.x);

    let nf = n as f64;
    let mut beta: Array1<f64> = Array1::zeros(p + 1);
    let mut eta = Array1::zeros(n);
    let mut obj = objective(&eta, y, &beta, l2_lambda);

    for _ in 0..MAX_NEWTON_ITER {
        let probs = eta.mapv(logistic);
        // gradient of the mean objective
        let mut grad = xa.t().dot(&(&probs - &y)) / nf;
        for j in 1..=p {
            grad[j] += l2_lambda * beta[j];
        }

        // Hessian: X' W X / n + lambda on the slope block
        let w = probs.mapv(|pi| (pi * (1.0 - pi)).max(1e-10));
        let mut xw = xa.clone();
        for (mut row, wi) in xw.rows_mut().into_iter().zip(&w) {
            row.mapv_inplace(|v| v * wi);
        }
        let mut hess = xa.t().dot(&xw) / nf;
        for j in 1..=p {
            hess[[j, j]] += l2_lambda;
            if !std.active[j - 1] {
                // dropped zero-variance column: pin its coefficient at zero
                hess[[j, j]] += 1.0;
            }
        }

        let step = cholesky_solve(&hess, &grad)?;

        // damped update: halve until the objective does not increase
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let candidate = &beta - &(step.clone() * t);
            let eta_candidate = xa.dot(&candidate);
            let obj_candidate = objective(&eta_candidate, y, &candidate, l2_lambda);
            if obj_candidate <= obj + 1e-14 {
                let improvement = obj - obj_candidate;
                beta = candidate;
                eta = eta_candidate;
                obj = obj_candidate;
                accepted = true;
                if improvement < OBJ_TOL {
                    return finish(&std, beta, l2_lambda);
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return finish(&std, beta, l2_lambda);
        }
        if l2_lambda == 0.0 && beta.iter().any(|b| b.abs() > SEPARATION_BOUND) {
            return Err(Error::SeparationDetected);
        }
    }
    finish(&std, beta, l2_lambda)
}

fn finish(
    std: &super::linear::Standardized,
    beta: Array1<f64>,
    _lambda: f64,
) -> Result<LogisticPredictor> {
    let p = beta.len() - 1;
    let mut coef = Array1::zeros(p);
    for j in 0..p {
        if std.active[j] {
            coef[j] = beta[j + 1] / std.scale[j];
        }
    }
    let intercept = beta[0] - coef.dot(&std.mean);
    Ok(LogisticPredictor { coef, intercept, clip_eps: DEFAULT_CLIP_EPS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn uninformative_features_predict_base_rate() {
        let x = array![[0.0], [0.0], [0.0], [0.0]];
        let y = array![0.0, 1.0, 0.0, 1.0];
        let fit = fit_logistic(x.view(), y.view(), 0.0).unwrap();
        let p = fit.predict(x.view());
        for v in &p {
            assert!((v - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn separation_is_detected_without_penalty() {
        let x = array![[-2.0], [-1.0], [1.0], [2.0]];
        let y = array![0.0, 0.0, 1.0, 1.0];
        assert!(matches!(
            fit_logistic(x.view(), y.view(), 0.0),
            Err(Error::SeparationDetected)
        ));
        // a positive penalty keeps the problem well-posed
        let fit = fit_logistic(x.view(), y.view(), 0.1).unwrap();
        let p = fit.predict(x.view());
        assert!(p[0] < 0.5 && p[3] > 0.5);
    }

    /// Simulate from a 1-D logistic model and refit: coefficients must come
    /// back within 0.1 at n = 10^4.
    #[test]
    fn recovers_known_coefficients() {
        let mut rng = substream(4, &[55]);
        let n = 10_000;
        let (b0, b1) = (0.4, -0.9);
        let mut xv = Vec::with_capacity(n);
        let mut yv = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.sample(StandardNormal);
            let p = logistic(b0 + b1 * x);
            let y = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
            xv.push(x);
            yv.push(y);
        }
        let x = Array2::from_shape_vec((n, 1), xv).unwrap();
        let y = Array1::from_vec(yv);
        let fit = fit_logistic(x.view(), y.view(), 1e-8).unwrap();
        assert!((fit.intercept() - b0).abs() < 0.1, "intercept {}", fit.intercept());
        assert!((fit.coefficients()[0] - b1).abs() < 0.1, "slope {}", fit.coefficients()[0]);
    }

    #[test]
    fn probabilities_are_clipped() {
        let x = array![[-10.0], [-5.0], [5.0], [10.0], [0.0], [1.0], [-1.0], [2.0]];
        let y = array![0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let fit = fit_logistic(x.view(), y.view(), 0.001).unwrap().with_clip_eps(0.05);
        let p = fit.predict(array![[-100.0], [100.0]].view());
        assert_eq!(p[0], 0.05);
        assert_eq!(p[1], 0.95);
    }

    #[test]
    fn rejects_non_binary_response() {
        let x = array![[1.0], [2.0]];
        let y = array![0.0, 0.5];
        assert!(fit_logistic(x.view(), y.view(), 0.0).is_err());
    }
}

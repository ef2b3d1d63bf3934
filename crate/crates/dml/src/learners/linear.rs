//! Least-squares learners and the shared standardization / solve machinery.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::Predictor;
use crate::error::{Error, Result};

/// Columns centered and scaled by the population standard deviation.
///
/// Zero-variance columns are left as zeros and flagged inactive; penalized
/// learners assign them zero coefficients.
pub(crate) struct Standardized {
    pub x: Array2<f64>,
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
    pub active: Vec<bool>,
}

pub(crate) fn standardize(x: ArrayView2<'_, f64>) -> Standardized {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let mut out = x.to_owned();
    let mut mean = Array1::zeros(p);
    let mut scale = Array1::ones(p);
    let mut active = vec![true; p];
    for j in 0..p {
        let col_mean = x.column(j).sum() / n;
        mean[j] = col_mean;
        let mut var = 0.0;
        for v in x.column(j) {
            var += (v - col_mean) * (v - col_mean);
        }
        var /= n;
        if var <= 0.0 {
            active[j] = false;
            out.column_mut(j).fill(0.0);
            continue;
        }
        let sd = var.sqrt();
        scale[j] = sd;
        out.column_mut(j).mapv_inplace(|v| (v - col_mean) / sd);
    }
    Standardized { x: out, mean, scale, active }
}

/// Solves `A b = rhs` for symmetric positive definite `A` in place.
/// Fails with [`Error::SingularDesign`] when a pivot collapses.
pub(crate) fn cholesky_solve(a: &Array2<f64>, rhs: &Array1<f64>) -> Result<Array1<f64>> {
    let p = a.nrows();
    debug_assert_eq!(a.ncols(), p);
    debug_assert_eq!(rhs.len(), p);

    let max_diag = (0..p).map(|i| a[[i, i]].abs()).fold(0.0f64, f64::max);
    let tol = 1e-10 * max_diag.max(1e-300);

    let mut l = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= tol {
                    return Err(Error::SingularDesign);
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }

    // forward then backward substitution
    let mut y = rhs.clone();
    for i in 0..p {
        for k in 0..i {
            let v = l[[i, k]] * y[k];
            y[i] -= v;
        }
        y[i] /= l[[i, i]];
    }
    let mut b = y;
    for i in (0..p).rev() {
        for k in i + 1..p {
            let v = l[[k, i]] * b[k];
            b[i] -= v;
        }
        b[i] /= l[[i, i]];
    }
    Ok(b)
}

/// Linear model on the original data scale.
#[derive(Debug, Clone)]
pub struct LinearPredictor {
    coef: Array1<f64>,
    intercept: f64,
    /// Penalty used for cross-validation bookkeeping; `None` for plain OLS.
    lambda: Option<f64>,
}

impl LinearPredictor {
    pub(crate) fn new(coef: Array1<f64>, intercept: f64, lambda: Option<f64>) -> Self {
        Self { coef, intercept, lambda }
    }

    pub fn coefficients(&self) -> &Array1<f64> {
        &self.coef
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }
}

impl Predictor for LinearPredictor {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        x.dot(&self.coef) + self.intercept
    }
}

/// Ordinary least squares with an intercept.
///
/// Requires a full-rank (centered) design; rank deficiency is an error
/// rather than silently regularized.
pub fn fit_ols(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<LinearPredictor> {
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::LengthMismatch(format!("{n} rows vs {} targets", y.len())));
    }
    if n == 0 {
        return Err(Error::LengthMismatch("empty sample".into()));
    }
    let p = x.ncols();
    let y_mean = y.sum() / n as f64;
    if p == 0 {
        return Ok(LinearPredictor::new(Array1::zeros(0), y_mean, None));
    }

    let mut xc = x.to_owned();
    let mut x_mean = Array1::zeros(p);
    for j in 0..p {
        let m = x.column(j).sum() / n as f64;
        x_mean[j] = m;
        xc.column_mut(j).mapv_inplace(|v| v - m);
    }
    let yc = y.to_owned() - y_mean;

    let gram = xc.t().dot(&xc);
    let rhs = xc.t().dot(&yc);
    let coef = cholesky_solve(&gram, &rhs)?;
    let intercept = y_mean - coef.dot(&x_mean);
    Ok(LinearPredictor::new(coef, intercept, None))
}

/// Ridge regression: solves `(X'X + lambda n I) b = X'y` on standardized
/// columns, with an unpenalized intercept, and reports coefficients on the
/// original scale.
pub fn fit_ridge(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda: f64,
) -> Result<LinearPredictor> {
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::LengthMismatch(format!("{n} rows vs {} targets", y.len())));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidLearnerSpec(format!("lambda must be >= 0, got {lambda}")));
    }
    let p = x.ncols();
    let y_mean = y.sum() / n as f64;
    if p == 0 {
        return Ok(LinearPredictor::new(Array1::zeros(0), y_mean, Some(lambda)));
    }

    let std = standardize(x);
    let yc = y.to_owned() - y_mean;
    let mut gram = std.x.t().dot(&std.x);
    for j in 0..p {
        gram[[j, j]] += lambda * n as f64;
        if !std.active[j] {
            // keep the system non-singular for dropped columns
            gram[[j, j]] += n as f64;
        }
    }
    let rhs = std.x.t().dot(&yc);
    let beta = cholesky_solve(&gram, &rhs)?;

    let mut coef = Array1::zeros(p);
    for j in 0..p {
        if std.active[j] {
            coef[j] = beta[j] / std.scale[j];
        }
    }
    let intercept = y_mean - coef.dot(&std.mean);
    Ok(LinearPredictor::new(coef, intercept, Some(lambda)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn ols_recovers_exact_line() {
        let x = array![[1.0], [2.0], [3.0]];
        let y = array![2.0, 4.0, 6.0];
        let fit = fit_ols(x.view(), y.view()).unwrap();
        let pred = fit.predict(x.view());
        for (p, t) in pred.iter().zip(&y) {
            assert!((p - t).abs() < 1e-12);
        }
    }

    #[test]
    fn ols_constant_target() {
        let x = array![[1.0], [2.0], [4.0]];
        let y = array![3.0, 3.0, 3.0];
        let fit = fit_ols(x.view(), y.view()).unwrap();
        assert!(fit.coefficients()[0].abs() < 1e-12);
        assert!((fit.intercept() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ols_rejects_duplicated_column() {
        let x = array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [5.0, 5.0]];
        let y = array![1.0, 2.0, 3.0, 4.0];
        assert!(matches!(fit_ols(x.view(), y.view()), Err(Error::SingularDesign)));
    }

    #[test]
    fn ridge_limits() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = array![1.0, 2.0, 2.5, 4.0];
        let ols = fit_ols(x.view(), y.view()).unwrap();
        let near_ols = fit_ridge(x.view(), y.view(), 1e-10).unwrap();
        assert!((ols.coefficients()[0] - near_ols.coefficients()[0]).abs() < 1e-6);

        let heavy = fit_ridge(x.view(), y.view(), 1e9).unwrap();
        assert!(heavy.coefficients()[0].abs() < 1e-6);
        let y_mean = y.sum() / 4.0;
        assert!((heavy.intercept() - y_mean).abs() < 1e-6);
    }

    /// One standardized predictor, lambda = 1, n = 4: the standardized-scale
    /// solution is (x'y/n) / (1 + lambda).
    #[test]
    fn ridge_one_dimensional_closed_form() {
        let x = array![[2.0], [4.0], [6.0], [8.0]];
        let y = array![1.0, 3.0, 2.0, 6.0];
        let lambda = 1.0;
        let fit = fit_ridge(x.view(), y.view(), lambda).unwrap();

        let std = standardize(x.view());
        let n = 4.0;
        let yc = &y - y.sum() / n;
        let xty_n = std.x.column(0).dot(&yc) / n;
        let beta_std_expected = xty_n / (1.0 + lambda);
        let beta_std_actual = fit.coefficients()[0] * std.scale[0];
        assert!((beta_std_actual - beta_std_expected).abs() < 1e-12);
    }

    #[test]
    fn ridge_norm_shrinks_with_lambda() {
        let x = array![
            [0.2, 1.0],
            [1.3, -0.4],
            [2.4, 0.8],
            [-0.7, 2.2],
            [1.1, -1.5],
            [0.4, 0.3]
        ];
        let y = array![1.0, 0.2, 2.4, -0.7, 1.9, 0.1];
        let mut prev = f64::INFINITY;
        for lambda in [0.01, 0.1, 1.0, 10.0] {
            let fit = fit_ridge(x.view(), y.view(), lambda).unwrap();
            let norm = fit.coefficients().dot(fit.coefficients()).sqrt();
            assert!(norm <= prev + 1e-12, "norm must shrink as lambda grows");
            prev = norm;
        }
    }

    #[test]
    fn zero_variance_column_gets_zero_coefficient() {
        let x = array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0], [4.0, 5.0]];
        let y = array![1.0, 2.0, 3.0, 4.0];
        let fit = fit_ridge(x.view(), y.view(), 0.1).unwrap();
        assert_eq!(fit.coefficients()[1], 0.0);
        assert!(fit.predict(x.view()).iter().all(|v| v.is_finite()));
    }
}

//! Lasso via cyclic coordinate descent.
//!
//! Minimizes `(1/2n) ||y - b0 - X b||^2 + lambda ||b||_1` on standardized
//! columns. Updates use precomputed inner products (the covariance trick),
//! so one full cycle costs `O(p^2)` after an `O(n p^2)` setup. Paths over a
//! descending penalty grid are warm-started.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::linear::{standardize, Standardized};
use super::Predictor;
use crate::error::{Error, Result};
use crate::resampling::draw_folds;

const CD_TOL: f64 = 1e-7;
const CD_MAX_ITER: usize = 100_000;

/// Smallest penalty that zeroes every coefficient:
/// `max_j |x_j' (y - mean(y))| / n` on standardized columns.
pub fn lambda_max(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
    let std = standardize(x);
    let n = x.nrows() as f64;
    let yc = y.to_owned() - y.sum() / n;
    let mut best = 0.0f64;
    for j in 0..x.ncols() {
        if std.active[j] {
            best = best.max((std.x.column(j).dot(&yc) / n).abs());
        }
    }
    best
}

/// Precomputed quantities for coordinate descent on one design.
struct CdWorkspace {
    /// X'X / n on standardized columns (unit diagonal on active columns).
    gram: Array2<f64>,
    /// X'y / n against the centered response.
    xty: Array1<f64>,
    active: Vec<bool>,
}

impl CdWorkspace {
    fn new(std: &Standardized, yc: &Array1<f64>) -> Self {
        let n = std.x.nrows() as f64;
        let gram = std.x.t().dot(&std.x) / n;
        let xty = std.x.t().dot(yc) / n;
        CdWorkspace { gram, xty, active: std.active.clone() }
    }

    /// Runs cyclic coordinate descent from `beta` until the largest
    /// coefficient change in a cycle drops below `CD_TOL`.
    fn solve(&self, lambda: f64, beta: &mut Array1<f64>) -> Result<()> {
        let p = beta.len();
        // s_j = (G beta)_j, kept incrementally.
        let mut s = self.gram.dot(beta);
        let mut last_delta = f64::INFINITY;
        for _ in 0..CD_MAX_ITER {
            let mut max_change = 0.0f64;
            for j in 0..p {
                if !self.active[j] {
                    continue;
                }
                let old = beta[j];
                // partial residual correlation; the gram diagonal is 1
                let rho = self.xty[j] - s[j] + old;
                let new = soft_threshold(rho, lambda);
                if new != old {
                    let delta = new - old;
                    beta[j] = new;
                    let row = self.gram.row(j);
                    for k in 0..p {
                        s[k] += row[k] * delta;
                    }
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < CD_TOL {
                return Ok(());
            }
            last_delta = max_change;
        }
        Err(Error::NonConvergence {
            max_iter: CD_MAX_ITER,
            last_delta,
            last_iterate: beta.to_vec(),
        })
    }
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Lasso fit on the original data scale.
#[derive(Debug, Clone)]
pub struct LassoPredictor {
    coef: Array1<f64>,
    intercept: f64,
    lambda: f64,
    cv_mse: Option<Vec<(f64, f64)>>,
}

impl LassoPredictor {
    pub fn coefficients(&self) -> &Array1<f64> {
        &self.coef
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// The penalty the model was (re)fit with; for cross-validated fits this
    /// is the selected value.
    pub fn selected_lambda(&self) -> f64 {
        self.lambda
    }

    /// `(lambda, mean cv mse)` pairs in evaluation order, when the fit was
    /// cross-validated.
    pub fn cv_curve(&self) -> Option<&[(f64, f64)]> {
        self.cv_mse.as_deref()
    }
}

impl Predictor for LassoPredictor {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        x.dot(&self.coef) + self.intercept
    }
}

fn destandardize(
    std: &Standardized,
    beta_std: &Array1<f64>,
    y_mean: f64,
    lambda: f64,
    cv_mse: Option<Vec<(f64, f64)>>,
) -> LassoPredictor {
    let p = beta_std.len();
    let mut coef = Array1::zeros(p);
    for j in 0..p {
        if std.active[j] {
            coef[j] = beta_std[j] / std.scale[j];
        }
    }
    let intercept = y_mean - coef.dot(&std.mean);
    LassoPredictor { coef, intercept, lambda, cv_mse }
}

/// Lasso at a fixed penalty.
pub fn fit_lasso_cd(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda: f64,
) -> Result<LassoPredictor> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch(format!("{} rows vs {} targets", x.nrows(), y.len())));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidLearnerSpec(format!("lambda must be >= 0, got {lambda}")));
    }
    let n = x.nrows() as f64;
    let y_mean = y.sum() / n;
    let std = standardize(x);
    let yc = y.to_owned() - y_mean;
    let ws = CdWorkspace::new(&std, &yc);
    let mut beta = Array1::zeros(x.ncols());
    ws.solve(lambda, &mut beta)?;
    Ok(destandardize(&std, &beta, y_mean, lambda, None))
}

/// The default path: 100 log-spaced penalties from `lambda_max` down to
/// `0.001 lambda_max`.
pub(crate) fn default_grid(lmax: f64) -> Vec<f64> {
    if lmax <= 0.0 {
        return vec![0.0];
    }
    let lmin = 1e-3 * lmax;
    let n_grid = 100;
    (0..n_grid)
        .map(|i| {
            let t = i as f64 / (n_grid - 1) as f64;
            (lmax.ln() + t * (lmin.ln() - lmax.ln())).exp()
        })
        .collect()
}

/// Lasso with the penalty chosen by `cv_folds`-fold cross-validation:
/// the grid value minimizing mean squared prediction error wins (largest
/// such value on ties), then the model is refit on all data.
pub fn fit_lasso_cv(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda_grid: Option<&[f64]>,
    cv_folds: usize,
    seed: u64,
) -> Result<LassoPredictor> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch(format!("{} rows vs {} targets", x.nrows(), y.len())));
    }
    if lambda_grid.is_some_and(|g| g.is_empty()) {
        return Err(Error::EmptyGrid);
    }
    let n = x.nrows();
    let p = x.ncols();

    // Descending grid for warm starts.
    let mut grid = match lambda_grid {
        Some(g) => g.to_vec(),
        None => default_grid(lambda_max(x, y)),
    };
    grid.sort_by(|a, b| b.partial_cmp(a).expect("finite lambdas"));
    grid.dedup();

    if grid.len() == 1 {
        return fit_lasso_cd(x, y, grid[0]);
    }

    let plan = draw_folds(n, cv_folds, 1, seed)?;
    let mut sq_err = vec![0.0f64; grid.len()];
    for split in plan.splits(0) {
        let x_train = gather_rows(x, &split.train);
        let y_train: Array1<f64> = split.train.iter().map(|&i| y[i]).collect();
        let n_train = x_train.nrows() as f64;
        let y_mean = y_train.sum() / n_train;
        let std = standardize(x_train.view());
        let yc = &y_train - y_mean;
        let ws = CdWorkspace::new(&std, &yc);

        let mut beta = Array1::zeros(p);
        for (gi, &lambda) in grid.iter().enumerate() {
            ws.solve(lambda, &mut beta)?;
            let model = destandardize(&std, &beta, y_mean, lambda, None);
            for &i in &split.test {
                let pred = model.intercept + x.row(i).dot(&model.coef);
                let err = y[i] - pred;
                sq_err[gi] += err * err;
            }
        }
    }

    let mut best = 0usize;
    for gi in 1..grid.len() {
        if sq_err[gi] < sq_err[best] {
            best = gi;
        }
    }

    let n_f = n as f64;
    let curve: Vec<(f64, f64)> = grid.iter().zip(&sq_err).map(|(&l, &e)| (l, e / n_f)).collect();

    // Refit on all data, warm-starting along the path down to the winner.
    let y_mean = y.sum() / n_f;
    let std = standardize(x);
    let yc = y.to_owned() - y_mean;
    let ws = CdWorkspace::new(&std, &yc);
    let mut beta = Array1::zeros(p);
    for &lambda in grid.iter().take(best + 1) {
        ws.solve(lambda, &mut beta)?;
    }
    Ok(destandardize(&std, &beta, y_mean, grid[best], Some(curve)))
}

pub(crate) fn gather_rows(x: ArrayView2<'_, f64>, ids: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((ids.len(), x.ncols()));
    for (r, &i) in ids.iter().enumerate() {
        out.row_mut(r).assign(&x.row(i));
    }
    out
}

//! Least squares with leave-one-out error, and hybrid LARS-OLS selection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type DesignMatrix = DMatrix<f64>;

/// Relative singular-value cutoff of the pseudo-inverse.
pub const SVD_CUTOFF: f64 = 1e-10;

/// LARS stops once this many consecutive steps fail to improve the LOO error.
pub const LARS_PATIENCE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub coefficients: Vec<f64>,
    /// Mean squared LOO residual over the sample variance of `y`.
    pub loo_error: f64,
    /// Σr²/dof, absent when `dof = 0`.
    pub residual_variance: Option<f64>,
    pub residual_sum_squares: f64,
    pub dof: usize,
    pub rank_deficient: bool,
}

fn sample_variance(y: &DVector<f64>) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let mean = y.mean();
    y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

fn relative_loo(loo_sq_sum: f64, n: usize, y: &DVector<f64>) -> f64 {
    let num = loo_sq_sum / n as f64;
    let var = sample_variance(y);
    if var > 0.0 {
        num / var
    } else if num <= f64::EPSILON * y.amax().max(1.0).powi(2) {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Ordinary least squares through a truncated-SVD pseudo-inverse.
///
/// The LOO error uses the hat-matrix identity `r_i/(1 − h_ii)`.
pub fn ols_fit(a: &DesignMatrix, y: &DVector<f64>) -> Result<FitDiagnostics> {
    let (n, p) = a.shape();
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidConfig("empty design".into()));
    }
    if p > n {
        return Err(Error::Underdetermined { rows: n, cols: p });
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.max();
    let cut = SVD_CUTOFF * smax;
    let mut coef = DVector::zeros(p);
    let mut hat = vec![0.0; n];
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cut || s == 0.0 {
            continue;
        }
        rank += 1;
        let uk = u.column(k);
        let proj = uk.dot(y) / s;
        coef.axpy(proj, &vt.row(k).transpose(), 1.0);
        for (h, v) in hat.iter_mut().zip(uk.iter()) {
            *h += v * v;
        }
    }
    let resid = y - a * &coef;
    Ok(finish(coef, &resid, &hat, y, n - p, rank < p))
}

fn finish(
    coef: DVector<f64>,
    resid: &DVector<f64>,
    hat: &[f64],
    y: &DVector<f64>,
    dof: usize,
    rank_deficient: bool,
) -> FitDiagnostics {
    let n = y.len();
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let mut loo_sq = 0.0;
    for (r, h) in resid.iter().zip(hat) {
        let denom = 1.0 - h;
        if denom <= 1e-12 {
            if r.abs() > 0.0 {
                loo_sq = f64::INFINITY;
            }
            continue;
        }
        loo_sq += (r / denom).powi(2);
    }
    let loo_error = if loo_sq.is_finite() {
        relative_loo(loo_sq, n, y)
    } else {
        f64::INFINITY
    };
    FitDiagnostics {
        coefficients: coef.iter().copied().collect(),
        loo_error,
        residual_variance: (dof >= 1).then(|| rss / dof as f64),
        residual_sum_squares: rss,
        dof,
        rank_deficient,
    }
}

/// σ̂² = Σr²/(n_E − params), where `params` counts every fitted quantity.
pub fn residual_variance(residuals: &[f64], n_e: usize, params: usize) -> Result<f64> {
    if n_e <= params {
        return Err(Error::InsufficientDoe { n: n_e, params });
    }
    Ok(residuals.iter().map(|r| r * r).sum::<f64>() / (n_e - params) as f64)
}

/// Solve `G x = b` for symmetric positive semidefinite `G`.
///
/// Cholesky is used when the factor is well conditioned; otherwise the
/// minimum-norm solution from the eigen pseudo-inverse is returned.
pub fn spd_solve(g: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if b.iter().all(|&v| v == 0.0) {
        return DVector::zeros(b.len());
    }
    if let Some(ch) = g.clone().cholesky() {
        let l = ch.l_dirty();
        let diag = l.diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        if lo > 0.0 && lo * lo > SVD_CUTOFF * hi * hi {
            let x = ch.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return x;
            }
        }
    }
    spd_pinv(g).0 * b
}

/// Eigen pseudo-inverse of a symmetric PSD matrix. The flag is set when any
/// eigenvalue was discarded.
pub fn spd_pinv(g: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let n = g.nrows();
    let eig = nalgebra::SymmetricEigen::new(g.clone());
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let cut = SVD_CUTOFF * lmax;
    let mut out = DMatrix::zeros(n, n);
    let mut truncated = false;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam <= cut || lam <= 0.0 {
            truncated = true;
            continue;
        }
        let v = eig.eigenvectors.column(k);
        out.ger(1.0 / lam, &v, &v, 1.0);
    }
    (out, truncated)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LarsStep {
    /// Column indices of `A` in the order they entered.
    pub active: Vec<usize>,
    /// OLS re-fit on `[1, A_active]`: coefficient 0 is the intercept.
    pub fit: FitDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LarsPath {
    pub steps: Vec<LarsStep>,
    /// Index into `steps` of the smallest LOO error.
    pub best: usize,
}

impl LarsPath {
    pub fn best_step(&self) -> &LarsStep {
        &self.steps[self.best]
    }
}

fn ols_on_active(a: &DesignMatrix, y: &DVector<f64>, active: &[usize]) -> Result<FitDiagnostics> {
    let n = a.nrows();
    let mut x = DMatrix::zeros(n, active.len() + 1);
    x.column_mut(0).fill(1.0);
    for (k, &j) in active.iter().enumerate() {
        x.column_mut(k + 1).copy_from(&a.column(j));
    }
    ols_fit(&x, y)
}

/// Least-angle regression path on the columns of `A` plus an implicit
/// intercept. Every step is re-fit by OLS and scored by its LOO error.
///
/// Columns are centred and scaled to unit norm internally. Columns that are
/// constant or numerically collinear with the active set never enter.
pub fn lars_path(a: &DesignMatrix, y: &DVector<f64>) -> Result<LarsPath> {
    let (n, p) = a.shape();
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidConfig("LARS needs at least two rows".into()));
    }
    let intercept_only = ols_on_active(a, y, &[])?;
    let mut steps = vec![LarsStep {
        active: vec![],
        fit: intercept_only,
    }];
    let y_mean = y.mean();
    let yc = y.map(|v| v - y_mean);
    let y_scale = yc.norm();
    if y_scale <= 1e-14 * y_mean.abs().max(1.0) * (n as f64).sqrt() {
        return Ok(LarsPath { steps, best: 0 });
    }

    let mut x = a.clone();
    let mut usable = vec![true; p];
    for j in 0..p {
        let mut col = x.column_mut(j);
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        if norm <= 1e-12 * (n as f64).sqrt() * a.column(j).amax().max(1e-300) || norm == 0.0 {
            usable[j] = false;
        } else {
            col /= norm;
        }
    }

    let max_steps = p.min(n - 2);
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut in_active = vec![false; p];
    // Lower Cholesky factor of the Gram matrix of the active columns.
    let mut chol: Vec<Vec<f64>> = Vec::new();
    let mut mu = DVector::zeros(n);
    let mut best = 0;
    let mut best_loo = steps[0].fit.loo_error;
    let mut stale = 0;

    while active.len() < max_steps {
        let resid = &yc - &mu;
        let c = x.tr_mul(&resid);
        let c_max = (0..p)
            .filter(|&j| usable[j])
            .map(|j| c[j].abs())
            .fold(0.0, f64::max);
        if c_max <= 1e-13 * y_scale {
            break;
        }

        // Bring in the most correlated admissible column.
        let mut entered = false;
        loop {
            let cand = (0..p)
                .filter(|&j| usable[j] && !in_active[j])
                .max_by(|&i, &j| c[i].abs().total_cmp(&c[j].abs()).then(j.cmp(&i)));
            let Some(j) = cand else { break };
            let xj = x.column(j);
            let rhs: Vec<f64> = active.iter().map(|&k| x.column(k).dot(&xj)).collect();
            let l = forward_solve(&chol, &rhs);
            let d2 = 1.0 - l.iter().map(|v| v * v).sum::<f64>();
            if d2 <= 1e-10 {
                usable[j] = false;
                continue;
            }
            let mut row = l;
            row.push(d2.sqrt());
            chol.push(row);
            active.push(j);
            signs.push(c[j].signum());
            in_active[j] = true;
            entered = true;
            break;
        }
        if !entered {
            break;
        }

        let v = backward_solve(&chol, &forward_solve(&chol, &signs));
        let sv: f64 = signs.iter().zip(&v).map(|(s, w)| s * w).sum();
        if sv <= 0.0 {
            break;
        }
        let a_a = sv.powf(-0.5);
        let mut u = DVector::zeros(n);
        for (&k, &vk) in active.iter().zip(&v) {
            u.axpy(a_a * vk, &x.column(k), 1.0);
        }
        let corr = x.tr_mul(&u);
        let c_now = c_max;
        let mut gamma = c_now / a_a;
        for j in 0..p {
            if !usable[j] || in_active[j] {
                continue;
            }
            for cand in [
                (c_now - c[j]) / (a_a - corr[j]),
                (c_now + c[j]) / (a_a + corr[j]),
            ] {
                if cand > 1e-15 && cand < gamma {
                    gamma = cand;
                }
            }
        }
        mu.axpy(gamma, &u, 1.0);

        let fit = ols_on_active(a, y, &active)?;
        let loo = fit.loo_error;
        steps.push(LarsStep {
            active: active.clone(),
            fit,
        });
        if loo < best_loo {
            best_loo = loo;
            best = steps.len() - 1;
            stale = 0;
        } else {
            stale += 1;
            if stale >= LARS_PATIENCE {
                break;
            }
        }
    }
    Ok(LarsPath { steps, best })
}

fn forward_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    for i in 0..b.len() {
        let s: f64 = (0..i).map(|k| l[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / l[i][i];
    }
    x
}

fn backward_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (b[i] - s) / l[i][i];
    }
    x
}

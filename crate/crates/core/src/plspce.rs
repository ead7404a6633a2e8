//! PCE-driven partial least squares: nonlinear PLS with Newton–Raphson
//! weight updates, and the PLS-PCE-R / PLS-PCE-W surrogates built on it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{generate_index_set, hermite_all, IndexSet, PsiTable};
use crate::error::{Error, Result};
use crate::probspace::Evaluator;
use crate::regression::{lars_path, ols_fit, spd_solve, FitDiagnostics};

const MAX_DEGREE: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    R,
    W,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlsPceConfig {
    pub variant: Variant,
    pub max_total_degree: u32,
    pub q_norm: f64,
    pub m_max: usize,
    pub eps_w: f64,
    pub eps_y: f64,
    pub newton_max_iter: usize,
}

impl Default for PlsPceConfig {
    fn default() -> Self {
        Self {
            variant: Variant::W,
            max_total_degree: 7,
            q_norm: 0.75,
            m_max: 10,
            eps_w: 1e-3,
            eps_y: 1e-3,
            newton_max_iter: 50,
        }
    }
}

impl PlsPceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DEGREE).contains(&self.max_total_degree) {
            return Err(Error::InvalidConfig(format!(
                "max_total_degree must lie in 1..={MAX_DEGREE}"
            )));
        }
        if !(self.q_norm > 0.0 && self.q_norm <= 1.0) {
            return Err(Error::InvalidConfig("q_norm must lie in (0, 1]".into()));
        }
        if self.m_max < 1 || self.newton_max_iter < 1 {
            return Err(Error::InvalidConfig(
                "m_max and newton_max_iter must be >= 1".into(),
            ));
        }
        if !(self.eps_w > 0.0 && self.eps_y > 0.0) {
            return Err(Error::InvalidConfig(
                "eps_w and eps_y must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentComponent {
    pub weight: Vec<f64>,
    pub load: Vec<f64>,
    pub order: u32,
    /// Coefficients of ψ_0 … ψ_order.
    pub coeffs: Vec<f64>,
    pub loo_error: f64,
    pub newton_iterations: usize,
    pub newton_rolled_back: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlsPceModel {
    pub variant: Variant,
    pub dim: usize,
    /// Columns `r_j` (R-variant) or `w_j` (W-variant).
    pub projection: Vec<Vec<f64>>,
    pub mu_u: Vec<f64>,
    pub components: Vec<LatentComponent>,
    /// W-variant terms. The zero index comes first and carries `a0`.
    pub index_set: IndexSet,
    pub coefficients: Vec<f64>,
    pub a0: f64,
    /// σ̂² with divisor n_E − m·d − P, or max(1, n_E − P) when that is not positive.
    pub residual_variance: f64,
    pub variance_fallback: bool,
    pub doe_size: usize,
    pub loo_error: f64,
    /// max |WᵀW − I|, monitored only.
    pub orthogonality_defect: f64,
}

impl PlsPceModel {
    pub fn m(&self) -> usize {
        self.projection.len()
    }

    /// Number of PCE terms, including the intercept.
    pub fn n_terms(&self) -> usize {
        match self.variant {
            Variant::W => self.index_set.len(),
            Variant::R => {
                1 + self
                    .components
                    .iter()
                    .map(|c| c.coeffs.len())
                    .sum::<usize>()
            }
        }
    }

    /// z = Qᵀ(u − μ_U).
    pub fn latent_coords(&self, u: &[f64]) -> Vec<f64> {
        self.projection
            .iter()
            .map(|q| {
                q.iter()
                    .zip(u)
                    .zip(&self.mu_u)
                    .map(|((qi, ui), mi)| qi * (ui - mi))
                    .sum()
            })
            .collect()
    }

    pub fn predict(&self, u: &[f64]) -> f64 {
        let z = self.latent_coords(u);
        match self.variant {
            Variant::W => {
                let table = PsiTable::new(self.index_set.max_order(), &z);
                self.index_set
                    .indices
                    .iter()
                    .zip(&self.coefficients)
                    .map(|(k, c)| c * table.product(k))
                    .sum()
            }
            Variant::R => {
                let mut y = self.a0;
                let mut psi = [0.0; MAX_DEGREE as usize + 1];
                for (c, &zj) in self.components.iter().zip(&z) {
                    hermite_all(c.order, zj, &mut psi);
                    y += c.coeffs.iter().zip(&psi).map(|(a, p)| a * p).sum::<f64>();
                }
                y
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

impl Evaluator for PlsPceModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, u: &[f64]) -> f64 {
        self.predict(u)
    }
}

/// r₁ = w₁, r_j = w_j − r_{j−1}(p_{j−1}ᵀ w_j).
pub fn r_directions(weights: &[Vec<f64>], loads: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if weights.len() != loads.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            got: loads.len(),
        });
    }
    let mut r: Vec<Vec<f64>> = Vec::with_capacity(weights.len());
    for j in 0..weights.len() {
        if j == 0 {
            r.push(weights[0].clone());
            continue;
        }
        let pw: f64 = loads[j - 1]
            .iter()
            .zip(&weights[j])
            .map(|(p, w)| p * w)
            .sum();
        let rj = weights[j]
            .iter()
            .zip(&r[j - 1])
            .map(|(w, rp)| w - rp * pw)
            .collect();
        r.push(rj);
    }
    Ok(r)
}

fn design_1d(t: &DVector<f64>, q: u32) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(t.len(), q as usize + 1);
    let mut psi = vec![0.0; q as usize + 1];
    for (i, &ti) in t.iter().enumerate() {
        hermite_all(q, ti, &mut psi);
        for (k, &v) in psi.iter().enumerate() {
            a[(i, k)] = v;
        }
    }
    a
}

/// One Gauss–Newton update of the PLS weight for a fixed univariate order.
/// Returns `Δw` and the 1D PCE fit at the current weight.
pub fn newton_step(
    e: &DMatrix<f64>,
    f: &DVector<f64>,
    w: &DVector<f64>,
    q: u32,
) -> Result<(DVector<f64>, FitDiagnostics)> {
    let t = e * w;
    let psi = design_1d(&t, q);
    let fit = ols_fit(&psi, f)?;
    let a = DVector::from_column_slice(&fit.coefficients);
    let resid = f - &psi * &a;
    if resid.norm() <= 1e-14 * f.norm() {
        return Ok((DVector::zeros(w.len()), fit));
    }
    let mut slope = vec![0.0; t.len()];
    let mut table = vec![0.0; q as usize + 1];
    for (s, &ti) in slope.iter_mut().zip(t.iter()) {
        hermite_all(q, ti, &mut table);
        *s = (1..=q as usize)
            .map(|k| a[k] * (k as f64).sqrt() * table[k - 1])
            .sum();
    }
    let mut jac = e.clone();
    for (i, mut row) in jac.row_iter_mut().enumerate() {
        row *= slope[i];
    }
    let jac_t = jac.transpose();
    let gram = &jac_t * &jac;
    let rhs = &jac_t * &resid;
    Ok((spd_solve(&gram, &rhs), fit))
}

struct OrderResult {
    w: DVector<f64>,
    fit: FitDiagnostics,
    iterations: usize,
    rolled_back: bool,
}

fn newton_for_order(
    e: &DMatrix<f64>,
    f: &DVector<f64>,
    w0: &DVector<f64>,
    q: u32,
    cfg: &PlsPceConfig,
) -> Result<OrderResult> {
    let mut w = w0.clone();
    let mut last = f64::INFINITY;
    let mut growth = 0;
    let mut rolled_back = false;
    let mut iterations = 0;
    let mut rss_at_growth_start = f64::INFINITY;
    for _ in 0..cfg.newton_max_iter {
        iterations += 1;
        let (dw, fit) = newton_step(e, f, &w, q)?;
        let step = dw.norm();
        if !step.is_finite() {
            w = w0.clone();
            rolled_back = true;
            break;
        }
        if step > last {
            if growth == 0 {
                rss_at_growth_start = fit.residual_sum_squares;
            }
            growth += 1;
        } else {
            growth = 0;
        }
        // growing steps only count as divergence when the fit stops improving
        if growth >= 3 && fit.residual_sum_squares >= rss_at_growth_start {
            w = w0.clone();
            rolled_back = true;
            break;
        }
        last = step;
        if step > 0.0 {
            w += dw;
            let nrm = w.norm();
            if nrm == 0.0 {
                w = w0.clone();
                rolled_back = true;
                break;
            }
            w /= nrm;
        }
        if step < cfg.eps_w {
            break;
        }
    }
    let t = e * &w;
    let fit = ols_fit(&design_1d(&t, q), f)?;
    Ok(OrderResult {
        w,
        fit,
        iterations,
        rolled_back,
    })
}

/// Fit a PLS-PCE surrogate to the design `(U_E, Y_E)`.
pub fn fit(u: &[DVector<f64>], y: &[f64], cfg: &PlsPceConfig) -> Result<PlsPceModel> {
    cfg.validate()?;
    let n = u.len();
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n < 3 {
        return Err(Error::InsufficientDoe { n, params: 3 });
    }
    let d = u[0].len();
    if let Some(bad) = u.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluator("non-finite response in DoE".into()));
    }

    let mut mu = DVector::zeros(d);
    for p in u {
        mu += p;
    }
    mu /= n as f64;
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut e = DMatrix::from_fn(n, d, |i, j| u[i][j] - mu[j]);
    let mut f = DVector::from_fn(n, |i, _| y[i] - y_mean);
    let f0_norm = f.norm();
    let f_scale = f0_norm.max(y_mean.abs() * (n as f64).sqrt());
    let q_max = cfg.max_total_degree.min((n - 2) as u32);

    let mut components: Vec<LatentComponent> = Vec::new();
    while components.len() < cfg.m_max.min(d) {
        let f_norm = f.norm();
        if f_norm <= 1e-12 * f_scale || f_norm == 0.0 {
            break;
        }
        let etf = e.tr_mul(&f);
        let etf_norm = etf.norm();
        if etf_norm <= 1e-14 * f_norm * e.norm() || etf_norm == 0.0 {
            break;
        }
        let w0 = etf / etf_norm;

        let mut best: Option<(u32, OrderResult)> = None;
        for q in 1..=q_max {
            let res = newton_for_order(&e, &f, &w0, q, cfg)?;
            let better = match &best {
                None => true,
                Some((_, b)) => res.fit.loo_error < b.fit.loo_error,
            };
            if better {
                best = Some((q, res));
            }
        }
        let Some((q, res)) = best else { break };
        let t = &e * &res.w;
        let tt = t.dot(&t);
        if tt <= 0.0 {
            break;
        }
        let p = e.tr_mul(&t) / tt;
        let psi = design_1d(&t, q);
        let a = DVector::from_column_slice(&res.fit.coefficients);
        let f_new = &f - &psi * &a;
        // relative to the initial response norm
        let rel_change = (f_norm - f_new.norm()).abs() / f0_norm;
        if rel_change < cfg.eps_y {
            break;
        }
        e -= &t * p.transpose();
        f = f_new;
        components.push(LatentComponent {
            weight: res.w.iter().copied().collect(),
            load: p.iter().copied().collect(),
            order: q,
            coeffs: res.fit.coefficients.clone(),
            loo_error: res.fit.loo_error,
            newton_iterations: res.iterations,
            newton_rolled_back: res.rolled_back,
        });
    }

    let weights: Vec<Vec<f64>> = components.iter().map(|c| c.weight.clone()).collect();
    let orthogonality_defect = orthogonality_defect(&weights);
    let mu_u: Vec<f64> = mu.iter().copied().collect();
    let m = components.len();

    match cfg.variant {
        Variant::W => {
            let mut model = fit_w_on_directions(u, y, weights, mu_u, cfg)?;
            model.components = components;
            model.orthogonality_defect = orthogonality_defect;
            Ok(model)
        }
        Variant::R => {
            let loads: Vec<Vec<f64>> = components.iter().map(|c| c.load.clone()).collect();
            let r = r_directions(&weights, &loads)?;
            let mut model = PlsPceModel {
                variant: Variant::R,
                dim: d,
                projection: r,
                mu_u,
                components,
                index_set: generate_index_set(m.max(1), 0, 1.0)?,
                coefficients: vec![y_mean],
                a0: y_mean,
                residual_variance: 0.0,
                variance_fallback: false,
                doe_size: n,
                loo_error: f64::NAN,
                orthogonality_defect,
            };
            let resid: Vec<f64> = u
                .iter()
                .zip(y)
                .map(|(p, v)| v - model.predict(p.as_slice()))
                .collect();
            let (var, fallback) =
                paper_residual_variance(&resid, m * d + model.n_terms(), model.n_terms());
            model.residual_variance = var;
            model.variance_fallback = fallback;
            let sv = {
                let mean = y_mean;
                y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            };
            model.loo_error = if sv > 0.0 {
                resid.iter().map(|r| r * r).sum::<f64>() / n as f64 / sv
            } else {
                0.0
            };
            Ok(model)
        }
    }
}

/// Sparse PCE on `z = Wᵀ(u − μ)` selected by hybrid LARS.
pub fn fit_w_on_directions(
    u: &[DVector<f64>],
    y: &[f64],
    weights: Vec<Vec<f64>>,
    mu_u: Vec<f64>,
    cfg: &PlsPceConfig,
) -> Result<PlsPceModel> {
    let n = u.len();
    let d = mu_u.len();
    let m = weights.len();
    let yv = DVector::from_column_slice(y);
    let mut model = PlsPceModel {
        variant: Variant::W,
        dim: d,
        projection: weights,
        mu_u,
        components: Vec::new(),
        index_set: generate_index_set(m.max(1), 0, 1.0)?,
        coefficients: vec![yv.mean()],
        a0: yv.mean(),
        residual_variance: 0.0,
        variance_fallback: false,
        doe_size: n,
        loo_error: 0.0,
        orthogonality_defect: 0.0,
    };
    if m == 0 {
        model.index_set.m = 0;
        model.index_set.indices = vec![vec![]];
        let fit = ols_fit(&DMatrix::from_element(n, 1, 1.0), &yv)?;
        model.loo_error = fit.loo_error;
    } else {
        let full = generate_index_set(m, cfg.max_total_degree, cfg.q_norm)?;
        let zs: Vec<DVector<f64>> = u
            .iter()
            .map(|p| DVector::from_vec(model.latent_coords(p.as_slice())))
            .collect();
        let design = full.design(&zs);
        let candidates = design.columns(1, full.len() - 1).into_owned();
        let path = lars_path(&candidates, &yv)?;
        let best = path.best_step();
        let mut indices = vec![full.indices[0].clone()];
        indices.extend(best.active.iter().map(|&j| full.indices[j + 1].clone()));
        model.index_set = IndexSet {
            indices,
            m,
            max_total_degree: cfg.max_total_degree,
            q_norm: cfg.q_norm,
        };
        model.coefficients = best.fit.coefficients.clone();
        model.a0 = model.coefficients[0];
        model.loo_error = best.fit.loo_error;
    }
    let resid: Vec<f64> = u
        .iter()
        .zip(y)
        .map(|(p, v)| v - model.predict(p.as_slice()))
        .collect();
    let p_terms = model.n_terms();
    let (var, fallback) = paper_residual_variance(&resid, m * d + p_terms, p_terms);
    model.residual_variance = var;
    model.variance_fallback = fallback;
    Ok(model)
}

fn paper_residual_variance(resid: &[f64], params: usize, p_terms: usize) -> (f64, bool) {
    let n = resid.len();
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    if n > params {
        (rss / (n - params) as f64, false)
    } else {
        (rss / (n.saturating_sub(p_terms)).max(1) as f64, true)
    }
}

fn orthogonality_defect(w: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..w.len() {
        for j in 0..w.len() {
            let dot: f64 = w[i].iter().zip(&w[j]).map(|(a, b)| a * b).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

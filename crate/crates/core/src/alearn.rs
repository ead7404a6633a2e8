//! Delta-method predictive uncertainty of PLS-PCE-W surrogates and the
//! active-learning loop that refines them.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::PsiTable;
use crate::error::{Error, Result};
use crate::plspce::{fit, PlsPceConfig, PlsPceModel, Variant};
use crate::probspace::Evaluator;
use crate::regression::spd_pinv;

/// Points closer than this to an existing design point are never evaluated.
pub const DUPLICATE_RADIUS: f64 = 1e-10;
const KMEANS_MAX_ITER: usize = 100;
const KMEANS_TOL: f64 = 1e-6;

/// Scaling of the parameter covariance `σ̂²·(AᵀA)⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CovScale {
    /// Extra factor `1/n_E`.
    #[default]
    PerDoe,
    /// Classical OLS covariance.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LearnMode {
    #[default]
    Intermediate,
    Final,
}

/// Gradient of Ŷ with respect to the coefficients (`blocks[0]`) and each
/// subspace direction `w_j` (`blocks[j]`).
pub fn gradient_blocks(model: &PlsPceModel, u: &[f64]) -> Result<Vec<DVector<f64>>> {
    if model.variant != Variant::W {
        return Err(Error::UnsupportedVariant);
    }
    let z = model.latent_coords(u);
    let m = model.m();
    let table = PsiTable::new(model.index_set.max_order(), &z);
    let g0 = DVector::from_iterator(
        model.index_set.len(),
        model.index_set.indices.iter().map(|k| table.product(k)),
    );
    let mut out = Vec::with_capacity(m + 1);
    out.push(g0);
    if m == 0 {
        return Ok(out);
    }
    let centered = DVector::from_iterator(u.len(), u.iter().zip(&model.mu_u).map(|(a, b)| a - b));
    for j in 0..m {
        let c = latent_derivative(model, &table, j);
        out.push(&centered * c);
    }
    Ok(out)
}

/// ∂Ŷ/∂z_j = Σ_k a_k √k_j ψ_{k_j−1}(z_j) Π_{i≠j} ψ_{k_i}(z_i).
fn latent_derivative(model: &PlsPceModel, table: &PsiTable, j: usize) -> f64 {
    let mut s = 0.0;
    for (k, &a) in model.index_set.indices.iter().zip(&model.coefficients) {
        let kj = k[j];
        if kj == 0 || a == 0.0 {
            continue;
        }
        let mut term = a * (kj as f64).sqrt() * table.get(j, kj - 1);
        for (i, &ki) in k.iter().enumerate() {
            if i != j && ki > 0 {
                term *= table.get(i, ki);
            }
        }
        s += term;
    }
    s
}

#[derive(Debug, Clone)]
pub struct ParameterBlocks {
    /// Σ_ξ₀ξ₀, P×P.
    pub coeff_block: DMatrix<f64>,
    /// Σ_ξjξj, one d×d block per latent direction.
    pub subspace_blocks: Vec<DMatrix<f64>>,
    pub residual_variance: f64,
    /// Set when a pseudo-inverse discarded null directions of some AᵀA.
    pub pinv_truncated: bool,
}

/// Blockwise parameter covariance `scale·σ̂_ε²·(A_jᵀA_j)⁻¹` over the DoE.
pub fn parameter_blocks(
    model: &PlsPceModel,
    doe_u: &[DVector<f64>],
    cov_scale: CovScale,
) -> Result<ParameterBlocks> {
    if model.variant != Variant::W {
        return Err(Error::UnsupportedVariant);
    }
    if doe_u.is_empty() {
        return Err(Error::InsufficientDoe { n: 0, params: 1 });
    }
    let m = model.m();
    let p = model.index_set.len();
    let d = model.dim;
    let mut grams: Vec<DMatrix<f64>> = std::iter::once(DMatrix::zeros(p, p))
        .chain((0..m).map(|_| DMatrix::zeros(d, d)))
        .collect();
    for u in doe_u {
        if u.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: u.len(),
            });
        }
        let blocks = gradient_blocks(model, u.as_slice())?;
        for (gram, g) in grams.iter_mut().zip(&blocks) {
            gram.ger(1.0, g, g, 1.0);
        }
    }
    let factor = model.residual_variance
        * match cov_scale {
            CovScale::PerDoe => 1.0 / doe_u.len() as f64,
            CovScale::Unit => 1.0,
        };
    let mut truncated = false;
    let mut inverted: Vec<DMatrix<f64>> = grams
        .iter()
        .map(|g| {
            let (inv, t) = spd_pinv(g);
            truncated |= t;
            inv * factor
        })
        .collect();
    let coeff_block = inverted.remove(0);
    Ok(ParameterBlocks {
        coeff_block,
        subspace_blocks: inverted,
        residual_variance: model.residual_variance,
        pinv_truncated: truncated,
    })
}

/// σ̂_Ĝ(u) = √(Σ_j g_jᵀ Σ_j g_j).
pub fn predictive_std(model: &PlsPceModel, blocks: &ParameterBlocks, u: &[f64]) -> Result<f64> {
    let g = gradient_blocks(model, u)?;
    Ok(std_from_gradients(&g, blocks))
}

fn std_from_gradients(g: &[DVector<f64>], blocks: &ParameterBlocks) -> f64 {
    let mut var = quad_form(&blocks.coeff_block, &g[0]);
    for (s, gj) in blocks.subspace_blocks.iter().zip(&g[1..]) {
        var += quad_form(s, gj);
    }
    var.max(0.0).sqrt()
}

fn quad_form(s: &DMatrix<f64>, g: &DVector<f64>) -> f64 {
    if g.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    g.dot(&(s * g))
}

/// Surrogate value and predictive standard deviation at every pool point.
/// The quadratic forms are evaluated as row-wise dots of `X·Σ` with `X`.
pub fn pool_statistics(
    model: &PlsPceModel,
    blocks: &ParameterBlocks,
    pool: &[DVector<f64>],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if model.variant != Variant::W {
        return Err(Error::UnsupportedVariant);
    }
    let n = pool.len();
    let m = model.m();
    let p = model.index_set.len();
    let d = model.dim;
    let rows: Vec<(f64, Vec<f64>, Vec<f64>)> = pool
        .par_iter()
        .map(|u| {
            let z = model.latent_coords(u.as_slice());
            let table = PsiTable::new(model.index_set.max_order(), &z);
            let psi: Vec<f64> = model
                .index_set
                .indices
                .iter()
                .map(|k| table.product(k))
                .collect();
            let g = psi
                .iter()
                .zip(&model.coefficients)
                .map(|(a, b)| a * b)
                .sum();
            let c: Vec<f64> = (0..m)
                .map(|j| latent_derivative(model, &table, j))
                .collect();
            (g, psi, c)
        })
        .collect();
    let psi = DMatrix::from_fn(n, p, |i, k| rows[i].1[k]);
    let mut var = row_quad_forms(&psi, &blocks.coeff_block);
    if m > 0 {
        let x = DMatrix::from_fn(n, d, |i, k| pool[i][k] - model.mu_u[k]);
        for (j, s) in blocks.subspace_blocks.iter().enumerate() {
            let q = row_quad_forms(&x, s);
            for (i, v) in var.iter_mut().enumerate() {
                *v += rows[i].2[j].powi(2) * q[i];
            }
        }
    }
    let g_hat = rows.iter().map(|r| r.0).collect();
    let std = var.into_iter().map(|v| v.max(0.0).sqrt()).collect();
    Ok((g_hat, std))
}

fn row_quad_forms(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Vec<f64> {
    let xs = x * s;
    xs.component_mul(x).column_sum().iter().copied().collect()
}

/// Learning function given a precomputed surrogate value and standard deviation.
/// `guard` floors |Ĝ| in final mode.
pub fn learning_from_parts(mode: LearnMode, g_hat: f64, std: f64, guard: f64) -> f64 {
    match mode {
        LearnMode::Intermediate => std,
        LearnMode::Final => std / g_hat.abs().max(guard),
    }
}

/// Guard for the final-mode denominator: 1e-12 times the largest |Ĝ| over
/// the pool (or 1e-12 when Ĝ vanishes everywhere).
pub fn final_guard(g_hat: &[f64]) -> f64 {
    let scale = g_hat.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    1e-12 * if scale > 0.0 { scale } else { 1.0 }
}

pub fn learning_value(
    u: &[f64],
    model: &PlsPceModel,
    blocks: &ParameterBlocks,
    mode: LearnMode,
    guard: f64,
) -> Result<f64> {
    let std = predictive_std(model, blocks, u)?;
    Ok(learning_from_parts(mode, model.predict(u), std, guard))
}

/// max σ̂ / max(|mean Ĝ|, 1e-8·std Ĝ) over the pool.
pub fn intermediate_statistic(g_hat: &[f64], std: &[f64]) -> f64 {
    let n = g_hat.len() as f64;
    let mean = g_hat.iter().sum::<f64>() / n;
    let sd = if g_hat.len() > 1 {
        (g_hat.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let max_std = std.iter().fold(0.0f64, |a, &v| a.max(v));
    let denom = mean.abs().max(1e-8 * sd);
    if max_std == 0.0 {
        0.0
    } else if denom == 0.0 {
        f64::INFINITY
    } else {
        max_std / denom
    }
}

/// |p̂ − p̂_last| / p̂, with 0/0 read as no change.
pub fn final_statistic(p_hat: f64, p_last: f64) -> f64 {
    let diff = (p_hat - p_last).abs();
    if diff == 0.0 {
        0.0
    } else if p_hat == 0.0 {
        f64::INFINITY
    } else {
        diff / p_hat
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub clusters: Vec<Vec<usize>>,
    pub centers: Vec<Vec<f64>>,
    /// Fewer clusters than requested were formed.
    pub degenerate: bool,
}

/// k-means++ followed by Lloyd iterations on `points` (already in latent space).
pub fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut dyn RngCore) -> Result<Clustering> {
    if k == 0 {
        return Err(Error::InvalidConfig("k-means needs k ≥ 1".into()));
    }
    if points.len() < k {
        return Err(Error::InvalidConfig(format!(
            "pool of {} points cannot form {k} clusters",
            points.len()
        )));
    }
    if k == 1 {
        return Ok(Clustering {
            clusters: vec![(0..points.len()).collect()],
            centers: vec![mean_of(
                points,
                (0..points.len()).collect::<Vec<_>>().as_slice(),
            )],
            degenerate: false,
        });
    }
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut r = rng.random::<f64>() * total;
        let mut pick = d2.len() - 1;
        for (i, &w) in d2.iter().enumerate() {
            if r < w {
                pick = i;
                break;
            }
            r -= w;
        }
        if d2[pick] == 0.0 {
            pick = d2.iter().rposition(|&w| w > 0.0).unwrap_or(pick);
        }
        let c = points[pick].clone();
        for (di, p) in d2.iter_mut().zip(points) {
            *di = di.min(sq_dist(p, &c));
        }
        centers.push(c);
    }

    let mut assign = vec![0usize; points.len()];
    for _ in 0..KMEANS_MAX_ITER {
        assign = points.par_iter().map(|p| nearest(p, &centers)).collect();
        let mut moved: f64 = 0.0;
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); centers.len()];
        for (i, &a) in assign.iter().enumerate() {
            members[a].push(i);
        }
        for (c, mem) in centers.iter_mut().zip(&members) {
            if mem.is_empty() {
                continue;
            }
            let new = mean_of(points, mem);
            moved = moved.max(sq_dist(c, &new).sqrt());
            *c = new;
        }
        if moved <= KMEANS_TOL {
            break;
        }
    }
    assign = points.par_iter().map(|p| nearest(p, &centers)).collect();
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); centers.len()];
    for (i, &a) in assign.iter().enumerate() {
        clusters[a].push(i);
    }
    let kept: Vec<usize> = (0..centers.len())
        .filter(|&c| !clusters[c].is_empty())
        .collect();
    let centers: Vec<Vec<f64>> = kept.iter().map(|&c| centers[c].clone()).collect();
    let clusters: Vec<Vec<usize>> = kept
        .iter()
        .map(|&c| std::mem::take(&mut clusters[c]))
        .collect();
    Ok(Clustering {
        degenerate: clusters.len() < k,
        clusters,
        centers,
    })
}

/// k-means of the pool in the latent space of `model`.
pub fn subspace_kmeans(
    pool: &[DVector<f64>],
    model: &PlsPceModel,
    n_add: usize,
    rng: &mut dyn RngCore,
) -> Result<Clustering> {
    let z: Vec<Vec<f64>> = pool
        .par_iter()
        .map(|u| model.latent_coords(u.as_slice()))
        .collect();
    kmeans(&z, n_add, rng)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(p, center);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn mean_of(points: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let dim = points.first().map_or(0, |p| p.len());
    let mut out = vec![0.0; dim];
    for &i in idx {
        for (o, v) in out.iter_mut().zip(&points[i]) {
            *o += v;
        }
    }
    for o in &mut out {
        *o /= idx.len() as f64;
    }
    out
}

/// Design of experiments: inputs, true limit-state values and the level at
/// which each point was added.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Doe {
    pub points: Vec<DVector<f64>>,
    pub values: Vec<f64>,
    pub origin: Vec<usize>,
}

impl Doe {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, u: DVector<f64>, g: f64, origin: usize) {
        self.points.push(u);
        self.values.push(g);
        self.origin.push(origin);
    }

    pub fn contains_near(&self, u: &DVector<f64>, radius: f64) -> bool {
        let r2 = radius * radius;
        self.points.iter().any(|p| (p - u).norm_squared() <= r2)
    }

    /// CSV with columns `origin,g,u1..ud`.
    pub fn to_csv(&self) -> String {
        let d = self.points.first().map_or(0, |p| p.len());
        let mut s = String::from("origin,g");
        for i in 1..=d {
            s.push_str(&format!(",u{i}"));
        }
        s.push('\n');
        for ((p, g), o) in self.points.iter().zip(&self.values).zip(&self.origin) {
            s.push_str(&format!("{o},{g:e}"));
            for v in p.iter() {
                s.push_str(&format!(",{v:e}"));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    pub eps_al: f64,
    pub n_add: usize,
    pub max_iter: usize,
    pub cov_scale: CovScale,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            eps_al: 0.02,
            n_add: 1,
            max_iter: 100,
            cov_scale: CovScale::PerDoe,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_al > 0.0) {
            return Err(Error::InvalidConfig("eps_al must be positive".into()));
        }
        if self.n_add == 0 {
            return Err(Error::InvalidConfig("n_add must be at least 1".into()));
        }
        Ok(())
    }
}

/// One active-learning iteration, written as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlRecord {
    pub mode: LearnMode,
    /// SIS level during which the loop ran.
    pub level: usize,
    pub iteration: usize,
    /// Termination statistic; +∞ (written as null) before a first comparison.
    #[serde(with = "inf_as_null")]
    pub statistic: f64,
    pub p_hat: Option<f64>,
    pub doe_size: usize,
    pub added: Vec<Vec<f64>>,
    pub learning_values: Vec<f64>,
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

pub fn trace_to_jsonl(trace: &[AlRecord]) -> String {
    let mut s = String::new();
    for r in trace {
        s.push_str(&serde_json::to_string(r).expect("record serializes"));
        s.push('\n');
    }
    s
}

/// Surrogate-only SIS result used by the final-mode loop.
#[derive(Debug, Clone)]
pub struct SurrogateEstimate {
    pub p_hat: f64,
    /// Samples of the last importance density of that run.
    pub samples: Vec<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub model: PlsPceModel,
    pub trace: Vec<AlRecord>,
    pub terminated: bool,
    /// Number of true limit-state evaluations added to the DoE.
    pub added: usize,
}

/// Algorithm "Active Learning": refit, test termination, otherwise add the
/// learning-function maximiser of each latent-space cluster of the pool.
///
/// `model` must be the W-variant fit of the current `doe`. In final mode
/// `surrogate_p` runs surrogate-only SIS for a model; its final samples join
/// the pool for that iteration, so failure regions the surrogate invents away
/// from `pool` are checked against the true limit state.
#[allow(clippy::too_many_arguments)]
pub fn active_learn(
    lsf: &dyn Evaluator,
    doe: &mut Doe,
    model: PlsPceModel,
    pool: &[DVector<f64>],
    mode: LearnMode,
    level: usize,
    model_cfg: &PlsPceConfig,
    cfg: &LearnConfig,
    surrogate_p: &mut dyn FnMut(&PlsPceModel) -> Result<SurrogateEstimate>,
    rng: &mut dyn RngCore,
) -> Result<LearnOutcome> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(Error::InvalidConfig(
            "active learning needs a nonempty pool".into(),
        ));
    }
    let mut outcome = LearnOutcome {
        model,
        trace: Vec::new(),
        terminated: false,
        added: 0,
    };
    if cfg.eps_al.is_infinite() {
        outcome.terminated = true;
        return Ok(outcome);
    }
    let mut available = vec![true; pool.len()];
    let mut p_last: Option<f64> = None;
    for iteration in 0..=cfg.max_iter {
        if iteration > 0 {
            outcome.model = fit(&doe.points, &doe.values, model_cfg)
                .map_err(|e| e.context(format!("active learning refit {iteration}")))?;
        }
        let model = &outcome.model;
        let (statistic, p_hat, extra) = match mode {
            LearnMode::Intermediate => (0.0, None, Vec::new()),
            LearnMode::Final => {
                let est = surrogate_p(model)?;
                let p = est.p_hat;
                let s = p_last.map_or(f64::INFINITY, |last| final_statistic(p, last));
                p_last = Some(p);
                (s, Some(p), est.samples)
            }
        };
        // Candidates: still-available pool points, then this iteration's
        // surrogate samples.
        let live: Vec<usize> = (0..pool.len()).filter(|&i| available[i]).collect();
        let live_points: Vec<DVector<f64>> =
            live.iter().map(|&i| pool[i].clone()).chain(extra).collect();
        let blocks = parameter_blocks(model, &doe.points, cfg.cov_scale)?;
        let (g_hat, std) = pool_statistics(model, &blocks, &live_points)?;
        let statistic = match mode {
            LearnMode::Intermediate => intermediate_statistic(&g_hat, &std),
            LearnMode::Final => statistic,
        };
        let mut record = AlRecord {
            mode,
            level,
            iteration,
            statistic,
            p_hat,
            doe_size: doe.len(),
            added: Vec::new(),
            learning_values: Vec::new(),
        };
        if statistic <= cfg.eps_al {
            outcome.terminated = true;
            outcome.trace.push(record);
            return Ok(outcome);
        }
        if iteration == cfg.max_iter || live_points.len() < cfg.n_add {
            outcome.trace.push(record);
            return Ok(outcome);
        }

        let guard = final_guard(&g_hat);
        let lv: Vec<f64> = g_hat
            .iter()
            .zip(&std)
            .map(|(&g, &s)| learning_from_parts(mode, g, s, guard))
            .collect();
        let clustering = subspace_kmeans(&live_points, model, cfg.n_add, rng)?;
        let mut chosen = Vec::new();
        for members in &clustering.clusters {
            let mut order: Vec<usize> = members.clone();
            // descending learning value, lowest index first on ties
            order.sort_by(|&a, &b| lv[b].total_cmp(&lv[a]).then(a.cmp(&b)));
            for local in order {
                if let Some(&idx) = live.get(local) {
                    available[idx] = false;
                }
                let x = &live_points[local];
                if doe.contains_near(x, DUPLICATE_RADIUS)
                    || chosen.iter().any(|&(c, _): &(usize, f64)| {
                        (&live_points[c] - x).norm() <= DUPLICATE_RADIUS
                    })
                {
                    continue;
                }
                chosen.push((local, lv[local]));
                break;
            }
        }
        if chosen.is_empty() {
            outcome.trace.push(record);
            return Ok(outcome);
        }
        let new_points: Vec<DVector<f64>> = chosen
            .iter()
            .map(|&(i, _)| live_points[i].clone())
            .collect();
        let values = lsf.eval_batch(&new_points);
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Evaluator(format!(
                "limit state returned {bad} during active learning"
            )));
        }
        for ((p, g), &(_, l)) in new_points.into_iter().zip(values).zip(&chosen) {
            record.added.push(p.iter().copied().collect());
            record.learning_values.push(l);
            doe.push(p, g, level);
        }
        outcome.added += chosen.len();
        outcome.trace.push(record);
    }
    Ok(outcome)
}

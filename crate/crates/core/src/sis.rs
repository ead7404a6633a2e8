//! Sequential importance sampling with smoothed-indicator densities and
//! adaptive conditional sampling (SIS-aCS).

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probspace::Evaluator;
use crate::special::{ln_std_normal_cdf, std_normal_cdf};

/// Search bracket of the σ bisection, relative to the spread of g.
const SIGMA_LO: f64 = 1e-8;
const SIGMA_HI: f64 = 1e8;
const SIGMA_BISECTIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcsConfig {
    /// Number of Markov chains as a fraction of the ensemble size.
    pub seed_fraction: f64,
    pub lambda0: f64,
    pub target_acceptance: f64,
}

impl Default for AcsConfig {
    fn default() -> Self {
        Self {
            seed_fraction: 0.1,
            lambda0: 0.6,
            target_acceptance: 0.44,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SisConfig {
    pub n: usize,
    pub burn_in: usize,
    pub delta_target: f64,
    pub max_levels: usize,
    pub acs: AcsConfig,
}

impl Default for SisConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            burn_in: 5,
            delta_target: 1.5,
            max_levels: 50,
            acs: AcsConfig::default(),
        }
    }
}

impl SisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidConfig("SIS needs n >= 10".into()));
        }
        if !(self.delta_target > 0.0) {
            return Err(Error::InvalidConfig("delta_target must be positive".into()));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidConfig("max_levels must be >= 1".into()));
        }
        let a = &self.acs;
        if !(a.seed_fraction > 0.0 && a.seed_fraction <= 1.0) {
            return Err(Error::InvalidConfig(
                "seed_fraction must lie in (0, 1]".into(),
            ));
        }
        if !(a.lambda0 > 0.0 && a.target_acceptance > 0.0 && a.target_acceptance < 1.0) {
            return Err(Error::InvalidConfig(
                "invalid aCS adaptation parameters".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub points: Vec<DVector<f64>>,
    pub g_values: Vec<f64>,
    /// `f64::INFINITY` at level 0.
    pub sigma: f64,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub sigma: f64,
    pub s_hat: f64,
    pub weight_cov: f64,
    pub acceptance_rate: f64,
    pub sigma_saturated: bool,
    pub final_lambda: f64,
    /// Exit statistic after the move; `None` when no sample fails.
    pub exit_cov: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SisOutcome {
    pub p_hat: f64,
    pub levels: Vec<LevelRecord>,
    pub ensemble: Ensemble,
    pub converged: bool,
}

/// ω = Φ(−g/σ_new)/Φ(−g/σ_old), evaluated in log space.
pub fn smooth_weight(g: f64, sigma_new: f64, sigma_old: f64) -> f64 {
    (ln_phi_ratio_term(g, sigma_new) - ln_phi_ratio_term(g, sigma_old)).exp()
}

#[inline]
fn ln_phi_ratio_term(g: f64, sigma: f64) -> f64 {
    if sigma.is_infinite() {
        -std::f64::consts::LN_2
    } else {
        ln_std_normal_cdf(-g / sigma)
    }
}

/// Mean and (n − 1) sample coefficient of variation.
fn mean_cov(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 || mean == 0.0 {
        return (mean, if mean == 0.0 { f64::INFINITY } else { 0.0 });
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt() / mean)
}

fn weight_cov(g: &[f64], ln_old: &[f64], sigma: f64) -> f64 {
    let ln_w: Vec<f64> = g
        .iter()
        .zip(ln_old)
        .map(|(&gi, &lo)| ln_std_normal_cdf(-gi / sigma) - lo)
        .collect();
    mean_cov(&shifted_weights(&ln_w).0).1
}

/// Weights divided by their maximum, and the log of that maximum. The CoV
/// and resampling probabilities are scale invariant, so this only guards
/// against underflow.
fn shifted_weights(ln_w: &[f64]) -> (Vec<f64>, f64) {
    let top = ln_w
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return (vec![0.0; ln_w.len()], top);
    }
    (ln_w.iter().map(|v| (v - top).exp()).collect(), top)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaChoice {
    pub sigma: f64,
    /// Even the lower end of the bracket cannot reach the target CoV.
    pub saturated: bool,
}

/// σ_i = argmin over (0, σ_prev] of (δ̂_ω(σ) − δ_target)², by bisection on log σ.
pub fn next_sigma(g_values: &[f64], sigma_prev: f64, delta_target: f64) -> SigmaChoice {
    let n = g_values.len() as f64;
    let mean = g_values.iter().sum::<f64>() / n;
    let sd = (g_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let scale = if sd > 0.0 { sd } else { mean.abs().max(1.0) };
    let hi = sigma_prev.min(SIGMA_HI * scale);
    let lo = (SIGMA_LO * scale).min(hi);
    let ln_old: Vec<f64> = g_values
        .iter()
        .map(|&g| ln_phi_ratio_term(g, sigma_prev))
        .collect();
    let cov = |s: f64| weight_cov(g_values, &ln_old, s);

    let cov_lo = cov(lo);
    if !(cov_lo >= delta_target) || sd == 0.0 {
        return SigmaChoice {
            sigma: lo,
            saturated: true,
        };
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let (mut fa, mut fb) = (cov_lo - delta_target, cov(hi) - delta_target);
    if fb >= 0.0 {
        return SigmaChoice {
            sigma: hi,
            saturated: false,
        };
    }
    for _ in 0..SIGMA_BISECTIONS {
        let mid = 0.5 * (a + b);
        let fm = cov(mid.exp()) - delta_target;
        if fm >= 0.0 {
            a = mid;
            fa = fm;
        } else {
            b = mid;
            fb = fm;
        }
    }
    let sigma = if fa.abs() <= fb.abs() {
        a.exp()
    } else {
        b.exp()
    };
    SigmaChoice {
        sigma,
        saturated: false,
    }
}

/// ŝ_i = mean of the weights.
pub fn ratio_estimate(weights: &[f64]) -> f64 {
    weights.iter().sum::<f64>() / weights.len() as f64
}

/// Multinomial resampling with replacement, probabilities ∝ weights.
pub fn resample<R: Rng + ?Sized>(weights: &[f64], n_out: usize, rng: &mut R) -> Result<Vec<usize>> {
    let mut cum = Vec::with_capacity(weights.len());
    let mut total = 0.0;
    for &w in weights {
        if w.is_finite() && w > 0.0 {
            total += w;
        }
        cum.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::WeightDegeneration);
    }
    let last = weights
        .iter()
        .rposition(|&w| w.is_finite() && w > 0.0)
        .unwrap_or(0);
    Ok((0..n_out)
        .map(|_| {
            let r: f64 = rng.random::<f64>() * total;
            cum.partition_point(|&c| c <= r).min(last)
        })
        .collect())
}

/// Sample CoV of I(g ≤ 0)/Φ(−g/σ); `None` when no sample fails.
pub fn exit_cov(g_values: &[f64], sigma: f64) -> Option<f64> {
    let x = indicator_ratios(g_values, sigma);
    if x.iter().all(|&v| v == 0.0) {
        return None;
    }
    Some(mean_cov(&x).1)
}

fn indicator_ratios(g_values: &[f64], sigma: f64) -> Vec<f64> {
    g_values
        .iter()
        .map(|&g| {
            if g <= 0.0 {
                1.0 / std_normal_cdf(-g / sigma)
            } else {
                0.0
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoveStats {
    pub acceptance_rate: f64,
    pub final_lambda: f64,
    pub evaluations: usize,
}

struct ChainOut {
    points: Vec<DVector<f64>>,
    g: Vec<f64>,
    accepted: usize,
    steps: usize,
}

#[allow(clippy::too_many_arguments)]
fn run_chain(
    start: &DVector<f64>,
    g_start: f64,
    eval: &dyn Evaluator,
    sigma: f64,
    burn_in: usize,
    keep: usize,
    lambda: f64,
    rng: &mut ChaCha8Rng,
    chain: usize,
) -> Result<ChainOut> {
    let d = start.len();
    let sprop = lambda.min(1.0);
    let rho = (1.0 - sprop * sprop).sqrt();
    let mut u = start.clone();
    let mut g = g_start;
    let mut ln_target = ln_std_normal_cdf(-g / sigma);
    let mut out = ChainOut {
        points: Vec::with_capacity(keep),
        g: Vec::with_capacity(keep),
        accepted: 0,
        steps: 0,
    };
    let mut cand = DVector::zeros(d);
    for step in 0..burn_in + keep {
        for k in 0..d {
            let xi: f64 = StandardNormal.sample(rng);
            cand[k] = rho * u[k] + sprop * xi;
        }
        let gc = eval.eval(cand.as_slice());
        if gc.is_nan() {
            return Err(Error::Evaluator(format!(
                "NaN limit-state value in chain {chain}"
            )));
        }
        let ln_c = ln_std_normal_cdf(-gc / sigma);
        let log_r: f64 = rng.random::<f64>().ln();
        if log_r < ln_c - ln_target {
            u.copy_from(&cand);
            g = gc;
            ln_target = ln_c;
            out.accepted += 1;
        }
        out.steps += 1;
        if step >= burn_in {
            out.points.push(u.clone());
            out.g.push(g);
        }
    }
    Ok(out)
}

/// Move resampled seeds with aCS chains targeting Φ(−g/σ)φ_d.
///
/// `n_total` states are produced: the chains share them as evenly as
/// possible. λ is adapted once per batch of chains toward the target
/// acceptance rate; chains in a batch run in parallel with their own streams.
#[allow(clippy::too_many_arguments)]
pub fn acs_move(
    seeds: &[(DVector<f64>, f64)],
    eval: &dyn Evaluator,
    sigma: f64,
    burn_in: usize,
    n_total: usize,
    acs: &AcsConfig,
    rng: &mut dyn RngCore,
) -> Result<(Ensemble, MoveStats)> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("aCS needs at least one seed".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidConfig("aCS needs sigma > 0".into()));
    }
    let n_chains = seeds.len();
    let base_len = n_total / n_chains;
    let extra = n_total % n_chains;
    let level_seed = rng.next_u64();
    let batch = (n_chains / 20).max(10).min(n_chains);

    let mut lambda = acs.lambda0;
    let mut points = Vec::with_capacity(n_total);
    let mut g_values = Vec::with_capacity(n_total);
    let (mut accepted, mut steps) = (0usize, 0usize);
    for (b_idx, start) in (0..n_chains).step_by(batch).enumerate() {
        let end = (start + batch).min(n_chains);
        let lam = lambda;
        let outs: Vec<Result<ChainOut>> = (start..end)
            .into_par_iter()
            .map(|c| {
                let mut crng = ChaCha8Rng::seed_from_u64(level_seed);
                crng.set_stream(c as u64);
                let keep = base_len + usize::from(c < extra);
                run_chain(
                    &seeds[c].0,
                    seeds[c].1,
                    eval,
                    sigma,
                    burn_in,
                    keep,
                    lam,
                    &mut crng,
                    c,
                )
            })
            .collect();
        let (mut b_acc, mut b_steps) = (0usize, 0usize);
        for o in outs {
            let o = o?;
            b_acc += o.accepted;
            b_steps += o.steps;
            points.extend(o.points);
            g_values.extend(o.g);
        }
        accepted += b_acc;
        steps += b_steps;
        if b_steps > 0 {
            let rate = b_acc as f64 / b_steps as f64;
            lambda *= ((rate - acs.target_acceptance) / ((b_idx + 1) as f64).sqrt()).exp();
        }
    }
    let stats = MoveStats {
        acceptance_rate: if steps > 0 {
            accepted as f64 / steps as f64
        } else {
            0.0
        },
        final_lambda: lambda,
        evaluations: steps,
    };
    Ok((
        Ensemble {
            points,
            g_values,
            sigma,
        },
        stats,
    ))
}

pub fn sample_standard_normal(n: usize, d: usize, rng: &mut dyn RngCore) -> Vec<DVector<f64>> {
    (0..n)
        .map(|_| DVector::from_fn(d, |_, _| StandardNormal.sample(rng)))
        .collect()
}

/// One tempering step from `ensemble`: choose σ, weight, resample, move.
pub fn advance_level(
    ensemble: &Ensemble,
    eval: &dyn Evaluator,
    cfg: &SisConfig,
    rng: &mut dyn RngCore,
) -> Result<(Ensemble, LevelRecord)> {
    let choice = next_sigma(&ensemble.g_values, ensemble.sigma, cfg.delta_target);
    let ln_w: Vec<f64> = ensemble
        .g_values
        .iter()
        .map(|&g| ln_phi_ratio_term(g, choice.sigma) - ln_phi_ratio_term(g, ensemble.sigma))
        .collect();
    let (weights, ln_top) = shifted_weights(&ln_w);
    let (mean_shifted, w_cov) = mean_cov(&weights);
    let mean_w = mean_shifted * ln_top.exp();
    // η₀ = φ_d has normalizing constant 1 while the level-0 weight
    // denominator is Φ(0) = 1/2.
    let s_hat = if ensemble.sigma.is_infinite() {
        0.5 * mean_w
    } else {
        mean_w
    };
    let n_chains = ((cfg.acs.seed_fraction * cfg.n as f64).ceil() as usize).clamp(1, cfg.n);
    let idx = resample(&weights, n_chains, rng)?;
    let seeds: Vec<(DVector<f64>, f64)> = idx
        .iter()
        .map(|&i| (ensemble.points[i].clone(), ensemble.g_values[i]))
        .collect();
    let (next, stats) = acs_move(
        &seeds,
        eval,
        choice.sigma,
        cfg.burn_in,
        cfg.n,
        &cfg.acs,
        rng,
    )?;
    let record = LevelRecord {
        sigma: choice.sigma,
        s_hat,
        weight_cov: w_cov,
        acceptance_rate: stats.acceptance_rate,
        sigma_saturated: choice.saturated,
        final_lambda: stats.final_lambda,
        exit_cov: exit_cov(&next.g_values, choice.sigma),
    };
    Ok((next, record))
}

/// p̂ = (Π ŝ_i)·mean(I(g ≤ 0)/Φ(−g/σ_M)).
pub fn sis_estimate(levels: &[LevelRecord], ensemble: &Ensemble) -> f64 {
    if levels.is_empty() {
        let n = ensemble.len() as f64;
        return ensemble.g_values.iter().filter(|&&g| g <= 0.0).count() as f64 / n;
    }
    let prod: f64 = levels.iter().map(|l| l.s_hat).product();
    let x = indicator_ratios(&ensemble.g_values, ensemble.sigma);
    prod * x.iter().sum::<f64>() / x.len() as f64
}

/// Algorithm SIS-aCS. With `exact_levels = Some(L)` exactly `L` levels are
/// run regardless of the exit criterion.
pub fn run_sis(
    eval: &dyn Evaluator,
    cfg: &SisConfig,
    rng: &mut dyn RngCore,
    exact_levels: Option<usize>,
) -> Result<SisOutcome> {
    cfg.validate()?;
    let d = eval.dim();
    let points = sample_standard_normal(cfg.n, d, rng);
    let g_values = eval.eval_batch(&points);
    if g_values.iter().any(|g| g.is_nan()) {
        return Err(Error::Evaluator("NaN limit-state value at level 0".into()));
    }
    let ensemble = Ensemble {
        points,
        g_values,
        sigma: f64::INFINITY,
    };
    run_sis_from(ensemble, eval, cfg, rng, exact_levels)
}

/// Continue SIS from an existing level-0 or intermediate ensemble.
pub fn run_sis_from(
    mut ensemble: Ensemble,
    eval: &dyn Evaluator,
    cfg: &SisConfig,
    rng: &mut dyn RngCore,
    exact_levels: Option<usize>,
) -> Result<SisOutcome> {
    let mut levels = Vec::new();
    let mut converged = false;
    let max = exact_levels.unwrap_or(cfg.max_levels);
    for level in 1..=max {
        let (next, record) = advance_level(&ensemble, eval, cfg, rng)
            .map_err(|e| e.context(format!("SIS level {level}")))?;
        let done = record.exit_cov.is_some_and(|c| c <= cfg.delta_target);
        ensemble = next;
        levels.push(record);
        if exact_levels.is_none() && done {
            converged = true;
            break;
        }
    }
    if exact_levels.is_some() {
        converged = levels
            .last()
            .and_then(|l| l.exit_cov)
            .is_some_and(|c| c <= cfg.delta_target);
    }
    let p_hat = sis_estimate(&levels, &ensemble);
    Ok(SisOutcome {
        p_hat,
        levels,
        ensemble,
        converged,
    })
}

//! Input probability model, the isoprobabilistic transform to standard-normal
//! space and the counted limit-state evaluator.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{
    ln_std_normal_cdf, std_normal_cdf, std_normal_inv, std_normal_inv_sf, std_normal_sf, U_CLAMP,
};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Independent marginal of one physical input. Lognormal and Gumbel are
/// parameterized by the mean and standard deviation of the physical variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Marginal {
    StandardNormal,
    Normal { mean: f64, std: f64 },
    Lognormal { mean: f64, std: f64 },
    Gumbel { mean: f64, std: f64 },
    Uniform { lower: f64, upper: f64 },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("{self:?}: {msg}")));
        match *self {
            Marginal::StandardNormal => Ok(()),
            Marginal::Normal { mean, std } | Marginal::Gumbel { mean, std } => {
                if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
                    return bad("std must be positive and finite");
                }
                Ok(())
            }
            Marginal::Lognormal { mean, std } => {
                if !(std > 0.0 && std.is_finite()) {
                    return bad("std must be positive and finite");
                }
                if !(mean > 0.0 && mean.is_finite()) {
                    return bad("lognormal mean must be positive");
                }
                Ok(())
            }
            Marginal::Uniform { lower, upper } => {
                if !(lower < upper && lower.is_finite() && upper.is_finite()) {
                    return bad("lower must be below upper");
                }
                Ok(())
            }
        }
    }

    /// `(μ_ln, σ_ln)` of the underlying normal for a lognormal marginal.
    pub fn lognormal_params(mean: f64, std: f64) -> (f64, f64) {
        let cv = std / mean;
        let s2 = (cv * cv).ln_1p();
        (mean.ln() - 0.5 * s2, s2.sqrt())
    }

    /// `(location, scale)` of a max-Gumbel with the given moments.
    pub fn gumbel_params(mean: f64, std: f64) -> (f64, f64) {
        let scale = std * 6f64.sqrt() / std::f64::consts::PI;
        (mean - EULER_GAMMA * scale, scale)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::StandardNormal => 0.0,
            Marginal::Normal { mean, .. }
            | Marginal::Lognormal { mean, .. }
            | Marginal::Gumbel { mean, .. } => mean,
            Marginal::Uniform { lower, upper } => 0.5 * (lower + upper),
        }
    }

    pub fn std(&self) -> f64 {
        match *self {
            Marginal::StandardNormal => 1.0,
            Marginal::Normal { std, .. }
            | Marginal::Lognormal { std, .. }
            | Marginal::Gumbel { std, .. } => std,
            Marginal::Uniform { lower, upper } => (upper - lower) / 12f64.sqrt(),
        }
    }

    /// u = Φ⁻¹(F(x)). The lower or upper tail is used depending on which
    /// side of the median `x` lies, so both tails keep relative accuracy.
    pub fn to_u(&self, x: f64) -> std::result::Result<f64, String> {
        if !x.is_finite() {
            return Err("not finite".into());
        }
        let u = match *self {
            Marginal::StandardNormal => x,
            Marginal::Normal { mean, std } => (x - mean) / std,
            Marginal::Lognormal { mean, std } => {
                if x <= 0.0 {
                    return Err("lognormal support is x > 0".into());
                }
                let (mu, s) = Self::lognormal_params(mean, std);
                (x.ln() - mu) / s
            }
            Marginal::Gumbel { mean, std } => {
                let (loc, scale) = Self::gumbel_params(mean, std);
                let y = (x - loc) / scale;
                let e = (-y).exp();
                // F = exp(-e)
                let cdf = (-e).exp();
                if cdf < 0.5 {
                    std_normal_inv(cdf)
                } else {
                    std_normal_inv_sf(-(-e).exp_m1())
                }
            }
            Marginal::Uniform { lower, upper } => {
                if x < lower || x > upper {
                    return Err(format!("uniform support is [{lower}, {upper}]"));
                }
                let w = upper - lower;
                let (lo, hi) = ((x - lower) / w, (upper - x) / w);
                if lo < hi {
                    std_normal_inv(lo)
                } else {
                    std_normal_inv_sf(hi)
                }
            }
        };
        Ok(u.clamp(-U_CLAMP, U_CLAMP))
    }

    /// x = F⁻¹(Φ(u)).
    pub fn from_u(&self, u: f64) -> f64 {
        let u = u.clamp(-U_CLAMP, U_CLAMP);
        match *self {
            Marginal::StandardNormal => u,
            Marginal::Normal { mean, std } => mean + std * u,
            Marginal::Lognormal { mean, std } => {
                let (mu, s) = Self::lognormal_params(mean, std);
                (mu + s * u).exp()
            }
            Marginal::Gumbel { mean, std } => {
                let (loc, scale) = Self::gumbel_params(mean, std);
                // F⁻¹(p) = loc - scale·ln(-ln p)
                loc - scale * (-ln_std_normal_cdf(u)).ln()
            }
            Marginal::Uniform { lower, upper } => {
                let w = upper - lower;
                if u <= 0.0 {
                    lower + w * std_normal_cdf(u)
                } else {
                    upper - w * std_normal_sf(u)
                }
            }
        }
    }
}

/// Ordered list of independent marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputModel {
    marginals: Vec<Marginal>,
}

impl InputModel {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidConfig(
                "input model needs at least one marginal".into(),
            ));
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Self { marginals })
    }

    pub fn standard_normal(d: usize) -> Result<Self> {
        Self::new(vec![Marginal::StandardNormal; d])
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn to_standard_normal(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        self.marginals
            .iter()
            .zip(x)
            .enumerate()
            .map(|(i, (m, &xi))| {
                m.to_u(xi).map_err(|reason| Error::Domain {
                    coord: i,
                    value: xi,
                    reason,
                })
            })
            .collect()
    }

    pub fn from_standard_normal(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(u.len())?;
        Ok(self
            .marginals
            .iter()
            .zip(u)
            .map(|(m, &ui)| m.from_u(ui))
            .collect())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

/// Anything that maps a standard-normal point to a limit-state value.
pub trait Evaluator: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, u: &[f64]) -> f64;

    fn eval_batch(&self, points: &[DVector<f64>]) -> Vec<f64> {
        points.par_iter().map(|p| self.eval(p.as_slice())).collect()
    }
}

type LsfFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Counted black-box limit state G(u). Clones share the same counter.
#[derive(Clone)]
pub struct LimitStateHandle {
    dim: usize,
    func: Arc<LsfFn>,
    calls: Arc<AtomicU64>,
}

impl fmt::Debug for LimitStateHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LimitStateHandle")
            .field("dim", &self.dim)
            .field("calls", &self.calls())
            .finish()
    }
}

impl LimitStateHandle {
    pub fn new(dim: usize, func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim,
            func: Arc::new(func),
            calls: Arc::new(AtomicU64::new(0)),
        }
    }

    /// Wrap a physical-space function `g(x)` as `G(u) = g(T⁻¹(u))`.
    pub fn from_physical(
        model: InputModel,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let dim = model.dim();
        Self::new(dim, move |u| {
            let x: Vec<f64> = model
                .marginals()
                .iter()
                .zip(u)
                .map(|(m, &ui)| m.from_u(ui))
                .collect();
            g(&x)
        })
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset_calls(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }

    /// Handle sharing the function but with a fresh, independent counter.
    pub fn fresh_counter(&self) -> Self {
        Self {
            dim: self.dim,
            func: Arc::clone(&self.func),
            calls: Arc::new(AtomicU64::new(0)),
        }
    }
}

impl Evaluator for LimitStateHandle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, u: &[f64]) -> f64 {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.func)(u)
    }

    fn eval_batch(&self, points: &[DVector<f64>]) -> Vec<f64> {
        self.calls.fetch_add(points.len() as u64, Ordering::SeqCst);
        points
            .par_iter()
            .map(|p| (self.func)(p.as_slice()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub p_hat: f64,
    /// `None` when no failure was observed.
    pub cov: Option<f64>,
    pub failures: u64,
    pub n: u64,
}

/// δ = √((1 − p)/(n·p)), undefined when `p = 0`.
pub fn mc_cov(p_hat: f64, n: u64) -> Option<f64> {
    (p_hat > 0.0).then(|| ((1.0 - p_hat) / (n as f64 * p_hat)).sqrt())
}

/// Crude Monte Carlo estimate of P(G(U) ≤ 0).
pub fn mc_estimate(lsf: &dyn Evaluator, n: u64, seed: u64) -> Result<McEstimate> {
    if n == 0 {
        return Err(Error::InvalidConfig("Monte Carlo needs n >= 1".into()));
    }
    const CHUNK: u64 = 1 << 15;
    let d = lsf.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0u64;
    let mut done = 0u64;
    while done < n {
        let k = CHUNK.min(n - done);
        let pts: Vec<DVector<f64>> = (0..k)
            .map(|_| DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        failures += lsf.eval_batch(&pts).iter().filter(|&&g| g <= 0.0).count() as u64;
        done += k;
    }
    let p_hat = failures as f64 / n as f64;
    let cov = mc_cov(p_hat, n);
    Ok(McEstimate {
        p_hat,
        cov,
        failures,
        n,
    })
}

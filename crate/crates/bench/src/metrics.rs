//! Error measures over repeated runs against a reference probability.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean_p_hat: Option<f64>,
    /// (p − E[p̂]) / p.
    pub rel_bias: Option<f64>,
    /// √V[p̂] / E[p̂] with the population variance; `None` for fewer than two
    /// runs or a zero mean.
    pub cov: Option<f64>,
    /// √(E[(p − p̂)²]) / p, computed directly from the runs.
    pub rel_rmse: Option<f64>,
    pub mean_calls: Option<f64>,
    pub std_calls: Option<f64>,
    /// p̂ / p per run.
    pub rel_errors: Vec<f64>,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn pop_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn summarize(p_ref: f64, p_hats: &[f64], calls: &[u64], n_failed: usize) -> Summary {
    assert_eq!(p_hats.len(), calls.len());
    let n = p_hats.len();
    if n == 0 {
        return Summary {
            n_ok: 0,
            n_failed,
            mean_p_hat: None,
            rel_bias: None,
            cov: None,
            rel_rmse: None,
            mean_calls: None,
            std_calls: None,
            rel_errors: Vec::new(),
        };
    }
    let m = mean(p_hats);
    let cov = (n >= 2 && m != 0.0).then(|| pop_std(p_hats) / m);
    let mse = p_hats.iter().map(|p| (p_ref - p).powi(2)).sum::<f64>() / n as f64;
    let calls: Vec<f64> = calls.iter().map(|&c| c as f64).collect();
    Summary {
        n_ok: n,
        n_failed,
        mean_p_hat: Some(m),
        rel_bias: Some((p_ref - m) / p_ref),
        cov,
        rel_rmse: Some(mse.sqrt() / p_ref),
        mean_calls: Some(mean(&calls)),
        std_calls: Some(pop_std(&calls)),
        rel_errors: p_hats.iter().map(|p| p / p_ref).collect(),
    }
}

/// |RMSE² − (bias² + (E[p̂]/p)²·CoV²)| for a summary whose CoV is defined.
/// Measured in squared relative units.
pub fn rmse_identity_residual(s: &Summary, p_ref: f64) -> Option<f64> {
    let (rmse, bias, cov, m) = (s.rel_rmse?, s.rel_bias?, s.cov?, s.mean_p_hat?);
    Some((rmse * rmse - (bias * bias + (m / p_ref).powi(2) * cov * cov)).abs())
}

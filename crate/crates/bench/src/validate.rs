//! Oracle check of a problem's formula against its reference probability:
//! high-effort SIS-aCS without surrogates.

use serde::{Deserialize, Serialize};
use ssis_core::sis::SisConfig;

use crate::config::BenchConfig;
use crate::error::Result;
use crate::experiment::{run_experiment, MethodKind};
use crate::problems::BenchmarkProblem;

pub const ORACLE_N: usize = 10_000;
pub const ORACLE_REPS: usize = 50;
pub const ORACLE_SE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub problem: String,
    pub p_ref: f64,
    pub oracle_mean: f64,
    /// Standard error of the oracle mean.
    pub std_error: f64,
    /// |mean − p_ref| in standard errors.
    pub z: f64,
    pub reps: usize,
    pub failed: usize,
    pub passed: bool,
}

pub fn oracle_config() -> BenchConfig {
    BenchConfig {
        sis: SisConfig {
            n: ORACLE_N,
            burn_in: 5,
            delta_target: 1.5,
            ..SisConfig::default()
        },
        ..BenchConfig::default()
    }
}

pub fn validate(problem: &BenchmarkProblem, reps: usize, base_seed: u64) -> Result<Validation> {
    let report = run_experiment(problem, MethodKind::Sis, reps, base_seed, &oracle_config())?;
    let p: Vec<f64> = report.rows.iter().map(|r| r.p_hat).collect();
    let n = p.len() as f64;
    let mean = p.iter().sum::<f64>() / n;
    let var = p.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std_error = (var / n).sqrt();
    let z = (mean - problem.p_ref).abs() / std_error;
    Ok(Validation {
        problem: problem.name.clone(),
        p_ref: problem.p_ref,
        oracle_mean: mean,
        std_error,
        z,
        reps: p.len(),
        failed: report.failed.len(),
        passed: p.len() >= 2 && z <= ORACLE_SE,
    })
}

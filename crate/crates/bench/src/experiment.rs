//! Repeated, independently seeded runs of one method on one problem.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ssis_core::orchestrator::{run_assis, run_ssis};
use ssis_core::probspace::mc_estimate;
use ssis_core::rng::{derive_seed, tags};
use ssis_core::sis::run_sis;

use crate::config::BenchConfig;
use crate::error::{BenchError, Result};
use crate::metrics::{summarize, Summary};
use crate::problems::BenchmarkProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Mc,
    Sis,
    Ssis,
    Assis,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mc => "mc",
            Self::Sis => "sis",
            Self::Ssis => "ssis",
            Self::Assis => "assis",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRow {
    pub rep: usize,
    pub seed: u64,
    pub p_hat: f64,
    pub lsf_calls: u64,
    /// Number of SIS levels; 0 for Monte Carlo.
    pub levels: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRep {
    pub rep: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub problem: String,
    pub method: MethodKind,
    pub p_ref: f64,
    pub base_seed: u64,
    pub reps: usize,
    pub rows: Vec<RepRow>,
    pub failed: Vec<FailedRep>,
    pub summary: Summary,
}

impl ExperimentReport {
    pub fn from_rows(
        problem: &str,
        method: MethodKind,
        p_ref: f64,
        base_seed: u64,
        rows: Vec<RepRow>,
        failed: Vec<FailedRep>,
    ) -> Self {
        let p: Vec<f64> = rows.iter().map(|r| r.p_hat).collect();
        let c: Vec<u64> = rows.iter().map(|r| r.lsf_calls).collect();
        let summary = summarize(p_ref, &p, &c, failed.len());
        Self {
            problem: problem.to_owned(),
            method,
            p_ref,
            base_seed,
            reps: rows.len() + failed.len(),
            rows,
            failed,
            summary,
        }
    }
}

pub fn rep_seed(base_seed: u64, rep: usize) -> u64 {
    derive_seed(base_seed, tags::REPETITION, rep as u64)
}

pub fn run_once(
    problem: &BenchmarkProblem,
    method: MethodKind,
    cfg: &BenchConfig,
    rep: usize,
    seed: u64,
) -> Result<RepRow> {
    let lsf = problem.lsf();
    let row = |p_hat, levels, converged| RepRow {
        rep,
        seed,
        p_hat,
        lsf_calls: lsf.calls(),
        levels,
        converged,
    };
    Ok(match method {
        MethodKind::Mc => {
            let est = mc_estimate(&lsf, cfg.mc.n, seed)?;
            row(est.p_hat, 0, true)
        }
        MethodKind::Sis => {
            let out = run_sis(&lsf, &cfg.sis, &mut ChaCha8Rng::seed_from_u64(seed), None)?;
            row(out.p_hat, out.levels.len(), out.converged)
        }
        MethodKind::Ssis => {
            let r = run_ssis(&lsf, &cfg.run, seed)?;
            row(r.p_hat, r.levels, r.converged)
        }
        MethodKind::Assis => {
            let r = run_assis(&lsf, &cfg.run, seed)?;
            row(r.p_hat, r.levels, r.converged)
        }
    })
}

/// Run `reps` repetitions in parallel. Failed repetitions are reported and
/// excluded from the aggregates.
pub fn run_experiment(
    problem: &BenchmarkProblem,
    method: MethodKind,
    reps: usize,
    base_seed: u64,
    cfg: &BenchConfig,
) -> Result<ExperimentReport> {
    if reps == 0 {
        return Err(BenchError::Config("reps must be >= 1".into()));
    }
    let outcomes: Vec<(usize, u64, Result<RepRow>)> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let seed = rep_seed(base_seed, rep);
            (rep, seed, run_once(problem, method, cfg, rep, seed))
        })
        .collect();
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for (rep, seed, out) in outcomes {
        match out {
            Ok(r) => rows.push(r),
            Err(e) => failed.push(FailedRep {
                rep,
                seed,
                error: e.to_string(),
            }),
        }
    }
    Ok(ExperimentReport::from_rows(
        &problem.name,
        method,
        problem.p_ref,
        base_seed,
        rows,
        failed,
    ))
}

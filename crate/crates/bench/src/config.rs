//! Experiment configuration. A TOML document only needs the keys it
//! changes; everything else keeps the per-problem defaults.
//!
//! ```toml
//! [sis]            # reference SIS-aCS
//! n = 2000
//! burn_in = 5
//! delta_target = 1.5
//!
//! [run]            # SSIS / ASSIS
//! n_e_initial = 50
//! n_e_per_level = 50
//! [run.sis]
//! n = 10000
//! burn_in = 30
//! [run.learn]
//! eps_al = 0.02
//! n_add = 1
//! [run.surrogate]
//! max_total_degree = 7
//! q_norm = 0.75
//! m_max = 10
//!
//! [mc]
//! n = 1000000
//! ```

use serde::{Deserialize, Serialize};
use ssis_core::orchestrator::RunConfig;
use ssis_core::sis::SisConfig;

use crate::error::{BenchError, Result};
use crate::problems::BenchmarkProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub n: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub sis: SisConfig,
    pub run: RunConfig,
    pub mc: McConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sis: SisConfig {
                n: 2000,
                burn_in: 5,
                delta_target: 1.5,
                ..SisConfig::default()
            },
            run: RunConfig::default(),
            mc: McConfig::default(),
        }
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl BenchConfig {
    pub fn for_problem(problem: &BenchmarkProblem) -> Self {
        let mut cfg = Self::default();
        cfg.run.learn.n_add = problem.n_add;
        cfg
    }

    /// Apply a TOML document on top of `self`.
    pub fn with_toml(&self, s: &str) -> Result<Self> {
        let bad = |e: toml::de::Error| BenchError::Config(e.to_string());
        let over: toml::Table = toml::from_str(s).map_err(bad)?;
        let mut base: toml::Table = toml::from_str(&self.to_toml()).map_err(bad)?;
        merge(&mut base, over);
        toml::Value::Table(base).try_into().map_err(bad)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

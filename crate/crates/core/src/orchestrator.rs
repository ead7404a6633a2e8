//! SSIS and ASSIS drivers: a level loop that grows a global design of
//! experiments, refits a PLS-PCE-W surrogate and restarts surrogate-only
//! SIS from the standard normal density at every level.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::alearn::{
    active_learn, AlRecord, Doe, LearnConfig, LearnMode, SurrogateEstimate, DUPLICATE_RADIUS,
};
use crate::error::{Error, Result};
use crate::plspce::{fit, PlsPceConfig, PlsPceModel, Variant};
use crate::probspace::{Evaluator, LimitStateHandle};
use crate::rng::{stream, tags};
use crate::sis::{
    advance_level, run_sis, sample_standard_normal, Ensemble, LevelRecord, SisConfig,
};

/// The accumulated design; `origin` holds the level that added each point.
pub type GlobalDoe = Doe;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ssis,
    Assis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub sis: SisConfig,
    /// Defaults to 5d.
    pub n_e_initial: Option<usize>,
    /// Defaults to `n_e_initial`.
    pub n_e_per_level: Option<usize>,
    pub surrogate: PlsPceConfig,
    pub learn: LearnConfig,
    pub max_levels: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sis: SisConfig {
                n: 10_000,
                burn_in: 30,
                delta_target: 1.5,
                ..SisConfig::default()
            },
            n_e_initial: None,
            n_e_per_level: None,
            surrogate: PlsPceConfig::default(),
            learn: LearnConfig::default(),
            max_levels: 50,
        }
    }
}

impl RunConfig {
    /// Missing keys, including keys inside partial tables, take the run defaults.
    pub fn from_toml(s: &str) -> Result<Self> {
        let bad = |e: toml::de::Error| Error::InvalidConfig(e.to_string());
        let given: toml::Table = toml::from_str(s).map_err(bad)?;
        let mut base: toml::Table = toml::from_str(&Self::default().to_toml()).map_err(bad)?;
        merge(&mut base, given);
        toml::Value::Table(base).try_into().map_err(bad)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn initial_doe_size(&self, d: usize) -> usize {
        self.n_e_initial.unwrap_or(5 * d)
    }

    pub fn per_level_doe_size(&self, d: usize) -> usize {
        self.n_e_per_level
            .unwrap_or_else(|| self.initial_doe_size(d))
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        self.sis.validate()?;
        self.surrogate.validate()?;
        self.learn.validate()?;
        if self.surrogate.variant != Variant::W {
            return Err(Error::InvalidConfig(
                "the SIS drivers use PLS-PCE-W surrogates".into(),
            ));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidConfig("max_levels must be >= 1".into()));
        }
        if self.initial_doe_size(d) < 3 || self.per_level_doe_size(d) == 0 {
            return Err(Error::InvalidConfig("DoE sizes too small".into()));
        }
        if self.per_level_doe_size(d) > self.sis.n {
            return Err(Error::InvalidConfig(
                "per-level DoE exceeds the ensemble size".into(),
            ));
        }
        Ok(())
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: Method,
    pub p_hat: f64,
    /// Number of SIS levels M.
    pub levels: usize,
    pub lsf_calls: u64,
    /// Records of the tempering steps taken in the level loop.
    pub level_records: Vec<LevelRecord>,
    /// Records of the final surrogate-only SIS run that produced `p_hat`.
    pub final_records: Vec<LevelRecord>,
    pub al_traces: Vec<AlRecord>,
    /// Every active-learning call met its termination criterion.
    pub al_terminated: bool,
    pub converged: bool,
    pub model: PlsPceModel,
    pub doe: GlobalDoe,
}

impl RunResult {
    pub fn sigma_schedule(&self) -> Vec<f64> {
        self.final_records.iter().map(|r| r.sigma).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("result serializes")
    }
}

pub fn run_ssis(lsf: &LimitStateHandle, cfg: &RunConfig, seed: u64) -> Result<RunResult> {
    run(lsf, cfg, seed, Method::Ssis)
}

pub fn run_assis(lsf: &LimitStateHandle, cfg: &RunConfig, seed: u64) -> Result<RunResult> {
    run(lsf, cfg, seed, Method::Assis)
}

/// Surrogate-only SIS of exactly `levels` tempering steps from φ_d.
pub fn surrogate_restart(
    model: &PlsPceModel,
    cfg: &SisConfig,
    levels: usize,
    rng: &mut dyn RngCore,
) -> Result<Ensemble> {
    if levels == 0 {
        return Err(Error::InvalidConfig(
            "a restart needs at least one level".into(),
        ));
    }
    Ok(run_sis(model, cfg, rng, Some(levels))?.ensemble)
}

fn level_zero(model: &PlsPceModel, cfg: &SisConfig, rng: &mut dyn RngCore) -> Ensemble {
    let points = sample_standard_normal(cfg.n, model.dim, rng);
    let g_values = model.eval_batch(&points);
    Ensemble {
        points,
        g_values,
        sigma: f64::INFINITY,
    }
}

/// Draw `count` distinct ensemble members without replacement, skipping
/// points already in the DoE.
fn local_doe(
    ensemble: &[DVector<f64>],
    doe: &Doe,
    count: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<DVector<f64>>> {
    let mut order: Vec<usize> = (0..ensemble.len()).collect();
    order.shuffle(rng);
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(count);
    for i in order {
        if out.len() == count {
            break;
        }
        let p = &ensemble[i];
        let r2 = DUPLICATE_RADIUS * DUPLICATE_RADIUS;
        if doe.contains_near(p, DUPLICATE_RADIUS)
            || out.iter().any(|q| (q - p).norm_squared() <= r2)
        {
            continue;
        }
        out.push(p.clone());
    }
    if out.len() < count {
        return Err(Error::InsufficientDoe {
            n: out.len(),
            params: count,
        });
    }
    Ok(out)
}

fn evaluate_into(
    lsf: &LimitStateHandle,
    doe: &mut Doe,
    pts: Vec<DVector<f64>>,
    level: usize,
) -> Result<()> {
    let values = lsf.eval_batch(&pts);
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Evaluator(format!("limit state returned {bad}")));
    }
    for (p, g) in pts.into_iter().zip(values) {
        doe.push(p, g, level);
    }
    Ok(())
}

fn run(lsf: &LimitStateHandle, cfg: &RunConfig, seed: u64, method: Method) -> Result<RunResult> {
    let d = lsf.dim();
    cfg.validate(d)?;
    let calls_at_start = lsf.calls();
    let mut doe = GlobalDoe::default();
    let mut level_records = Vec::new();
    let mut al_traces = Vec::new();
    let mut al_terminated = true;
    let mut ensemble: Option<Ensemble> = None;
    let mut model: Option<PlsPceModel> = None;
    let mut converged = false;
    let mut m_levels = 0;

    for level in 1..=cfg.max_levels {
        let ctx = |e: Error| e.context(format!("level {level}"));
        let new_points = match &ensemble {
            None => sample_standard_normal(
                cfg.initial_doe_size(d),
                d,
                &mut stream(seed, tags::INITIAL_DOE, 0),
            ),
            Some(ens) => local_doe(
                &ens.points,
                &doe,
                cfg.per_level_doe_size(d),
                &mut stream(seed, tags::LOCAL_DOE, level as u64),
            )
            .map_err(ctx)?,
        };
        evaluate_into(lsf, &mut doe, new_points, level).map_err(ctx)?;
        let mut current = fit(&doe.points, &doe.values, &cfg.surrogate).map_err(ctx)?;

        let mut restart_rng = stream(seed, tags::RESTART, level as u64);
        let before = lsf.calls();
        let pool = if level == 1 {
            level_zero(&current, &cfg.sis, &mut restart_rng)
        } else {
            surrogate_restart(&current, &cfg.sis, level - 1, &mut restart_rng).map_err(ctx)?
        };
        debug_assert_eq!(lsf.calls(), before);

        if method == Method::Assis {
            let out = active_learn(
                lsf,
                &mut doe,
                current,
                &pool.points,
                LearnMode::Intermediate,
                level,
                &cfg.surrogate,
                &cfg.learn,
                &mut |_| unreachable!("intermediate mode does not estimate p"),
                &mut stream(seed, tags::AL_INTERMEDIATE, level as u64),
            )
            .map_err(ctx)?;
            al_terminated &= out.terminated;
            al_traces.extend(out.trace);
            current = out.model;
        }

        let pool = Ensemble {
            g_values: current.eval_batch(&pool.points),
            ..pool
        };
        let (next, record) = advance_level(
            &pool,
            &current,
            &cfg.sis,
            &mut stream(seed, tags::LEVEL_STEP, level as u64),
        )
        .map_err(ctx)?;
        let done = record.exit_cov.is_some_and(|c| c <= cfg.sis.delta_target);
        level_records.push(record);
        m_levels = level;

        if done {
            converged = true;
            if method == Method::Assis {
                let sis_cfg = cfg.sis;
                let mut runner = |m: &PlsPceModel| -> Result<SurrogateEstimate> {
                    let mut rng = stream(seed, tags::FINAL_ESTIMATE, 1);
                    let out = run_sis(m, &sis_cfg, &mut rng, None)?;
                    Ok(SurrogateEstimate {
                        p_hat: out.p_hat,
                        samples: out.ensemble.points,
                    })
                };
                let out = active_learn(
                    lsf,
                    &mut doe,
                    current,
                    &next.points,
                    LearnMode::Final,
                    level,
                    &cfg.surrogate,
                    &cfg.learn,
                    &mut runner,
                    &mut stream(seed, tags::AL_FINAL, 0),
                )
                .map_err(|e| e.context("final active learning"))?;
                al_terminated &= out.terminated;
                al_traces.extend(out.trace);
                current = out.model;
            }
            model = Some(current);
            break;
        }
        ensemble = Some(next);
        model = Some(current);
    }

    let model = model.expect("at least one level runs");
    let before = lsf.calls();
    let final_run = run_sis(
        &model,
        &cfg.sis,
        &mut stream(seed, tags::FINAL_ESTIMATE, 0),
        Some(m_levels),
    )
    .map_err(|e| e.context("final surrogate SIS"))?;
    debug_assert_eq!(lsf.calls(), before);

    Ok(RunResult {
        method,
        p_hat: final_run.p_hat,
        levels: m_levels,
        lsf_calls: lsf.calls() - calls_at_start,
        level_records,
        final_records: final_run.levels,
        al_traces,
        al_terminated,
        converged,
        model,
        doe,
    })
}

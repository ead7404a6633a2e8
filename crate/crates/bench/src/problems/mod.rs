//! Benchmark limit states. Every problem lives in its own file together with
//! the literature reference its formula was transcribed from.

pub mod borehole;
pub mod fourbranch;
pub mod hat;
pub mod linear;
pub mod quadratic;
pub mod truss;

use std::fmt;
use std::sync::Arc;

use ssis_core::LimitStateHandle;

use crate::error::{BenchError, Result};

type Builder = Arc<dyn Fn() -> LimitStateHandle + Send + Sync>;

#[derive(Clone)]
pub struct BenchmarkProblem {
    pub name: String,
    pub dim: usize,
    pub p_ref: f64,
    /// Source of `p_ref`.
    pub reference: &'static str,
    pub description: &'static str,
    /// Clusters per active-learning iteration.
    pub n_add: usize,
    /// Set when the formula failed the oracle check against `p_ref`.
    pub quarantined: Option<&'static str>,
    build: Builder,
}

impl fmt::Debug for BenchmarkProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenchmarkProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("p_ref", &self.p_ref)
            .finish()
    }
}

impl BenchmarkProblem {
    fn new(
        name: impl Into<String>,
        dim: usize,
        p_ref: f64,
        reference: &'static str,
        description: &'static str,
        build: impl Fn() -> LimitStateHandle + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            p_ref,
            reference,
            description,
            n_add: 1,
            quarantined: None,
            build: Arc::new(build),
        }
    }

    /// A fresh limit-state handle with its own call counter.
    pub fn lsf(&self) -> LimitStateHandle {
        (self.build)()
    }
}

pub fn linear(beta: f64, d: usize) -> BenchmarkProblem {
    BenchmarkProblem::new(
        format!("linear({beta},{d})"),
        d,
        linear::p_ref(beta),
        "closed form Φ(−β)",
        "G = β − u₁",
        move || linear::lsf(beta, d),
    )
}

pub fn hat() -> BenchmarkProblem {
    BenchmarkProblem::new(
        "hat",
        2,
        hat::P_REF,
        "Schöbi et al. (2017)",
        "strongly nonlinear",
        hat::lsf,
    )
}

pub fn fourbranch() -> BenchmarkProblem {
    BenchmarkProblem {
        n_add: 4,
        ..BenchmarkProblem::new(
            "4-branch",
            2,
            fourbranch::P_REF,
            "Bect et al. (2017)",
            "four failure regions, extremely rare",
            fourbranch::lsf,
        )
    }
}

pub fn quadratic(d: usize) -> BenchmarkProblem {
    BenchmarkProblem::new(
        format!("quadratic({d})"),
        d,
        quadratic::P_REF,
        "Engelund & Rackwitz (1993); Uribe et al. (2021)",
        "κ = 5, two-dimensional active subspace",
        move || quadratic::lsf(d),
    )
}

pub fn borehole() -> BenchmarkProblem {
    BenchmarkProblem {
        quarantined: Some("oracle SIS-aCS gives 6.55e-6 ± 1.7e-7 (50 runs), 20 SE below p_ref"),
        ..BenchmarkProblem::new(
            "borehole",
            8,
            borehole::P_REF,
            "An & Owen (2001)",
            "no low-dimensional structure",
            borehole::lsf,
        )
    }
}

pub fn truss() -> BenchmarkProblem {
    BenchmarkProblem {
        quarantined: Some("oracle SIS-aCS gives 1.500e-3 ± 1.3e-5 and crude MC (8e6) 1.521e-3, 6-8 SE below p_ref"),
        ..BenchmarkProblem::new(
        "truss",
        10,
        truss::P_REF,
        "Lee & Kwak (2006)",
            "23-bar truss, deflection > 0.12 m",
            || truss::lsf(truss::THRESHOLD),
        )
    }
}

pub fn rare_truss() -> BenchmarkProblem {
    BenchmarkProblem::new(
        "rare-truss",
        10,
        truss::P_REF_RARE,
        "Lee & Kwak (2006), threshold raised to 0.18 m",
        "23-bar truss, deflection > 0.18 m",
        || truss::lsf(truss::THRESHOLD_RARE),
    )
}

/// The default instances of every problem family.
pub fn registry() -> Vec<BenchmarkProblem> {
    vec![
        linear(3.5, 2),
        linear(3.5, 100),
        hat(),
        fourbranch(),
        quadratic(10),
        quadratic(100),
        borehole(),
        truss(),
        rare_truss(),
    ]
}

const NAMES: &str = "linear(β,d), hat, 4-branch, quadratic(d), quadratic-10, quadratic-100, borehole, truss, rare-truss";

fn args(s: &str, family: &str) -> Option<Vec<String>> {
    let inner = s
        .strip_prefix(family)?
        .strip_prefix('(')?
        .strip_suffix(')')?;
    Some(inner.split(',').map(str::to_owned).collect())
}

/// Look a problem up by name. Case, spaces and `-`/`_` are ignored for the
/// plain names; `linear(β,d)` and `quadratic(d)` take parameters.
pub fn lookup(name: &str) -> Result<BenchmarkProblem> {
    let unknown = || BenchError::UnknownProblem {
        name: name.to_owned(),
        available: NAMES.to_owned(),
    };
    let s: String = name
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    if let Some(a) = args(&s, "linear") {
        let [beta, d] = a.as_slice() else {
            return Err(unknown());
        };
        let beta: f64 = beta.parse().map_err(|_| unknown())?;
        let d: usize = d.parse().map_err(|_| unknown())?;
        if d == 0 || !beta.is_finite() {
            return Err(unknown());
        }
        return Ok(linear(beta, d));
    }
    if let Some(a) = args(&s, "quadratic") {
        let [d] = a.as_slice() else {
            return Err(unknown());
        };
        let d: usize = d.parse().map_err(|_| unknown())?;
        if d < 2 {
            return Err(unknown());
        }
        return Ok(quadratic(d));
    }
    let plain: String = s.chars().filter(|c| *c != '-' && *c != '_').collect();
    match plain.as_str() {
        "linear" => Ok(linear(3.5, 2)),
        "hat" => Ok(hat()),
        "4branch" | "fourbranch" => Ok(fourbranch()),
        "quadratic10" => Ok(quadratic(10)),
        "quadratic100" => Ok(quadratic(100)),
        "borehole" => Ok(borehole()),
        "truss" => Ok(truss()),
        "raretruss" => Ok(rare_truss()),
        _ => Err(unknown()),
    }
}

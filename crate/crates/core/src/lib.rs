//! Rare-event estimation with sequential importance sampling and
//! actively learned PLS-PCE surrogates.
//!
//! The crate is organised bottom-up:
//!
//! - [`special`]: standard-normal Φ, Φ⁻¹ and ln Φ that stay accurate in the tails.
//! - [`probspace`]: marginals, the isoprobabilistic transform and the counted
//!   limit-state handle.
//! - [`basis`]: normalized Hermite polynomials and hyperbolic index sets.
//! - [`regression`]: OLS with leave-one-out error and hybrid LARS.
//! - [`plspce`]: PCE-driven partial least squares surrogates (R and W variants).
//! - [`sis`]: SIS with adaptive conditional sampling (SIS-aCS).
//! - [`alearn`]: delta-method predictive uncertainty and active learning.
//! - [`orchestrator`]: the SSIS and ASSIS drivers.
//!
//! Everything operates in standard-normal space. A limit-state value `g ≤ 0`
//! means failure.

pub mod alearn;
pub mod basis;
pub mod error;
pub mod orchestrator;
pub mod plspce;
pub mod probspace;
pub mod regression;
pub mod rng;
pub mod sis;
pub mod special;

pub use error::{Error, Result};
pub use probspace::{Evaluator, InputModel, LimitStateHandle, Marginal};

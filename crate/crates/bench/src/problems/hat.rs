// Hat function, Schöbi, Sudret & Marelli (2017), "Rare event estimation
// using polynomial-chaos kriging", ASCE-ASME J. Risk Uncertain. Eng. Syst. A.
use ssis_core::LimitStateHandle;

pub const P_REF: f64 = 1.037e-4;

pub fn lsf() -> LimitStateHandle {
    LimitStateHandle::new(2, |u: &[f64]| {
        20.0 - (u[0] - u[1]).powi(2) - 8.0 * (u[0] + u[1] - 4.0).powi(3)
    })
}

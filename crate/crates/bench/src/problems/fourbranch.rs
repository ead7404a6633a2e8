// Four-branch series system, Waarts (2000); rare-event variant of Bect, Li &
// Vazquez (2017), "Bayesian subset simulation", SIAM/ASA JUQ: the classic
// function shifted by +4, so each linear branch has β = (6/√2 + 4)/√2.
use std::f64::consts::FRAC_1_SQRT_2;

use ssis_core::LimitStateHandle;

pub const P_REF: f64 = 5.60e-9;

pub fn g(u: &[f64]) -> f64 {
    let (a, b) = (u[0], u[1]);
    let curved = 3.0 + 0.1 * (a - b).powi(2);
    let branches = [
        curved - (a + b) * FRAC_1_SQRT_2,
        curved + (a + b) * FRAC_1_SQRT_2,
        (a - b) + 6.0 * FRAC_1_SQRT_2,
        (b - a) + 6.0 * FRAC_1_SQRT_2,
    ];
    branches.into_iter().fold(f64::INFINITY, f64::min) + 4.0
}

pub fn lsf() -> LimitStateHandle {
    LimitStateHandle::new(2, g)
}

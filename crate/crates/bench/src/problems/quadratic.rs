// Quadratic limit state with curvature κ, Engelund & Rackwitz (1993) and
// Uribe, Papaioannou, Marzouk & Straub (2021):
// G(u) = β − Σuᵢ/√d + (κ/4)(u₁ − u₂)², β = 4, κ = 5.
use ssis_core::LimitStateHandle;

pub const P_REF: f64 = 6.62e-6;
pub const BETA: f64 = 4.0;
pub const KAPPA: f64 = 5.0;

pub fn lsf(d: usize) -> LimitStateHandle {
    let scale = 1.0 / (d as f64).sqrt();
    LimitStateHandle::new(d, move |u: &[f64]| {
        BETA - scale * u.iter().sum::<f64>() + 0.25 * KAPPA * (u[0] - u[1]).powi(2)
    })
}

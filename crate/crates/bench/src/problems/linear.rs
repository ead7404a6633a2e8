use ssis_core::special::std_normal_cdf;
use ssis_core::LimitStateHandle;

/// G(u) = β − u₁ in d standard-normal dimensions; p = Φ(−β) exactly.
pub fn lsf(beta: f64, d: usize) -> LimitStateHandle {
    LimitStateHandle::new(d, move |u: &[f64]| beta - u[0])
}

pub fn p_ref(beta: f64) -> f64 {
    std_normal_cdf(-beta)
}

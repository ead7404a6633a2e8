// Borehole water flow, An & Owen (2001), "Quasi-regression", J. Complexity;
// input ranges after Harper & Gupta (1983). Failure when the flow rate
// exceeds 276.7 m³/year.
use std::f64::consts::PI;

use ssis_core::{InputModel, LimitStateHandle, Marginal};

pub const P_REF: f64 = 1e-5;
pub const THRESHOLD: f64 = 276.7;

/// Mean and standard deviation of exp(N(μ, σ²)).
fn lognormal_moments(mu: f64, sigma: f64) -> (f64, f64) {
    let mean = (mu + 0.5 * sigma * sigma).exp();
    (mean, mean * (sigma * sigma).exp_m1().sqrt())
}

pub fn input_model() -> InputModel {
    let (r_mean, r_std) = lognormal_moments(7.71, 1.0056);
    InputModel::new(vec![
        Marginal::Normal {
            mean: 0.10,
            std: 0.0161812,
        },
        Marginal::Lognormal {
            mean: r_mean,
            std: r_std,
        },
        Marginal::Uniform {
            lower: 63_070.0,
            upper: 115_600.0,
        },
        Marginal::Uniform {
            lower: 990.0,
            upper: 1_110.0,
        },
        Marginal::Uniform {
            lower: 63.1,
            upper: 116.0,
        },
        Marginal::Uniform {
            lower: 700.0,
            upper: 820.0,
        },
        Marginal::Uniform {
            lower: 1_120.0,
            upper: 1_680.0,
        },
        Marginal::Uniform {
            lower: 9_855.0,
            upper: 12_045.0,
        },
    ])
    .expect("valid borehole marginals")
}

/// Flow rate in m³/year for x = (r_w, r, T_u, H_u, T_l, H_l, L, K_w).
pub fn flow(x: &[f64]) -> f64 {
    let (rw, r, tu, hu, tl, hl, l, kw) = (x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]);
    let ln = (r / rw).ln();
    2.0 * PI * tu * (hu - hl) / (ln * (1.0 + 2.0 * l * tu / (ln * rw * rw * kw) + tu / tl))
}

pub fn lsf() -> LimitStateHandle {
    LimitStateHandle::from_physical(input_model(), |x| THRESHOLD - flow(x))
}

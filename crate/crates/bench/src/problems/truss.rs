// 23-bar plane truss, Lee & Kwak (2006), "Response surface augmented moment
// method for efficient reliability analysis", Struct. Saf.; geometry and
// inputs as in Blatman & Sudret (2011). Failure when the midspan deflection
// exceeds 0.12 m, or 0.18 m for the rare variant.
use nalgebra::{DMatrix, DVector};
use ssis_core::{InputModel, LimitStateHandle, Marginal};

pub const P_REF: f64 = 1.6e-3;
pub const P_REF_RARE: f64 = 1.02e-8;
pub const THRESHOLD: f64 = 0.12;
pub const THRESHOLD_RARE: f64 = 0.18;

const BAY: f64 = 4.0;
const HEIGHT: f64 = 2.0;
const BAYS: usize = 6;

pub fn input_model() -> InputModel {
    let ln = |mean: f64, cov: f64| Marginal::Lognormal {
        mean,
        std: cov * mean,
    };
    let mut m = vec![
        ln(2.1e11, 0.1),
        ln(2.1e11, 0.1),
        ln(2.0e-3, 0.1),
        ln(1.0e-3, 0.1),
    ];
    m.extend((0..6).map(|_| Marginal::Gumbel {
        mean: 5.0e4,
        std: 7.5e3,
    }));
    InputModel::new(m).expect("valid truss marginals")
}

/// Nodes 0..=6 on the bottom chord, 7..=12 on the top chord at mid-bay.
fn nodes() -> Vec<(f64, f64)> {
    let mut n: Vec<(f64, f64)> = (0..=BAYS).map(|i| (i as f64 * BAY, 0.0)).collect();
    n.extend((0..BAYS).map(|i| ((i as f64 + 0.5) * BAY, HEIGHT)));
    n
}

/// (node a, node b, chord?) for the 23 bars.
fn bars() -> Vec<(usize, usize, bool)> {
    let top = |i: usize| BAYS + 1 + i;
    let mut b: Vec<(usize, usize, bool)> = (0..BAYS).map(|i| (i, i + 1, true)).collect();
    b.extend((0..BAYS - 1).map(|i| (top(i), top(i + 1), true)));
    for i in 0..BAYS {
        b.push((i, top(i), false));
        b.push((i + 1, top(i), false));
    }
    b
}

/// Vertical midspan deflection (positive downwards) for
/// x = (E₁, E₂, A₁, A₂, P₁..P₆).
pub fn midspan_deflection(x: &[f64]) -> f64 {
    let nodes = nodes();
    let ndof = 2 * nodes.len();
    let mut k = DMatrix::<f64>::zeros(ndof, ndof);
    for (a, b, chord) in bars() {
        let (e, area) = if chord { (x[0], x[2]) } else { (x[1], x[3]) };
        let (dx, dy) = (nodes[b].0 - nodes[a].0, nodes[b].1 - nodes[a].1);
        let len = dx.hypot(dy);
        let (c, s) = (dx / len, dy / len);
        let dir = [-c, -s, c, s];
        let dofs = [2 * a, 2 * a + 1, 2 * b, 2 * b + 1];
        let stiff = e * area / len;
        for i in 0..4 {
            for j in 0..4 {
                k[(dofs[i], dofs[j])] += stiff * dir[i] * dir[j];
            }
        }
    }
    let mut f = DVector::<f64>::zeros(ndof);
    for i in 0..BAYS {
        f[2 * (BAYS + 1 + i) + 1] -= x[4 + i];
    }
    let fixed = [0, 1, 2 * BAYS + 1];
    let free: Vec<usize> = (0..ndof).filter(|i| !fixed.contains(i)).collect();
    let kf = DMatrix::from_fn(free.len(), free.len(), |i, j| k[(free[i], free[j])]);
    let ff = DVector::from_fn(free.len(), |i, _| f[free[i]]);
    let disp = kf
        .cholesky()
        .expect("truss stiffness is positive definite")
        .solve(&ff);
    let mid = free
        .iter()
        .position(|&d| d == 2 * (BAYS / 2) + 1)
        .expect("midspan dof is free");
    -disp[mid]
}

pub fn lsf(threshold: f64) -> LimitStateHandle {
    LimitStateHandle::from_physical(input_model(), move |x| threshold - midspan_deflection(x))
}

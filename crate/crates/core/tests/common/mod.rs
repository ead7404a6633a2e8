#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of the n-point Gauss–Hermite rule for the standard
/// normal weight (weights sum to 1), from the Jacobi matrix eigenproblem.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Composite Simpson rule of f·φ on [-a, a].
pub fn normal_expectation(f: impl Fn(f64) -> f64, a: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = 2.0 * a / n as f64;
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = 0.0;
    for k in 0..=n {
        let x = -a + k as f64 * h;
        let c = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += c * f(x) * phi(x);
    }
    s * h / 3.0
}

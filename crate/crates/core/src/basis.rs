//! Normalized probabilists' Hermite polynomials and multi-index sets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multi-index `k = (k₁, …, k_m)` of polynomial orders.
pub type MultiIndex = Vec<u32>;

const LQ_TOL: f64 = 1e-12;

/// ψ_n(x) = He_n(x)/√(n!).
pub fn hermite_eval(n: u32, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let next = (x * cur - kf.sqrt() * prev) / (kf + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[0..=n_max]` with ψ_0(x)…ψ_{n_max}(x).
pub fn hermite_all(n_max: u32, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if n_max == 0 {
        return;
    }
    out[1] = x;
    for k in 1..n_max as usize {
        let kf = k as f64;
        out[k + 1] = (x * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
    }
}

/// dψ_n/dx = √n·ψ_{n−1}(x).
pub fn hermite_derivative(n: u32, x: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (n as f64).sqrt() * hermite_eval(n - 1, x)
    }
}

/// Π_j ψ_{k_j}(z_j).
pub fn tensor_eval(k: &[u32], z: &[f64]) -> Result<f64> {
    if k.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: k.len(),
            got: z.len(),
        });
    }
    Ok(k.iter()
        .zip(z)
        .map(|(&kj, &zj)| hermite_eval(kj, zj))
        .product())
}

/// Hyperbolically truncated set of multi-indices in graded order. Within one
/// total degree the indices are sorted in descending lexicographic order, so
/// for `m = 2` the sequence starts `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSet {
    pub indices: Vec<MultiIndex>,
    pub m: usize,
    pub max_total_degree: u32,
    pub q_norm: f64,
}

impl IndexSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Largest single-coordinate order, used to size ψ tables.
    pub fn max_order(&self) -> u32 {
        self.indices
            .iter()
            .flat_map(|k| k.iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// Evaluate all basis functions at one latent point.
    pub fn eval_row(&self, z: &[f64], out: &mut [f64]) {
        let table = PsiTable::new(self.max_order(), z);
        for (o, k) in out.iter_mut().zip(&self.indices) {
            *o = table.product(k);
        }
    }

    /// Design matrix with one row per latent point.
    pub fn design(&self, zs: &[DVector<f64>]) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(zs.len(), self.len());
        let mut row = vec![0.0; self.len()];
        for (i, z) in zs.iter().enumerate() {
            self.eval_row(z.as_slice(), &mut row);
            for (j, &v) in row.iter().enumerate() {
                a[(i, j)] = v;
            }
        }
        a
    }
}

/// ψ_n(z_j) for every coordinate `j` and every order up to `n_max`.
pub struct PsiTable {
    stride: usize,
    values: Vec<f64>,
}

impl PsiTable {
    pub fn new(n_max: u32, z: &[f64]) -> Self {
        let stride = n_max as usize + 1;
        let mut values = vec![0.0; stride * z.len()];
        for (j, &zj) in z.iter().enumerate() {
            hermite_all(n_max, zj, &mut values[j * stride..(j + 1) * stride]);
        }
        Self { stride, values }
    }

    #[inline]
    pub fn get(&self, coord: usize, order: u32) -> f64 {
        self.values[coord * self.stride + order as usize]
    }

    #[inline]
    pub fn product(&self, k: &[u32]) -> f64 {
        k.iter()
            .enumerate()
            .filter(|(_, &kj)| kj > 0)
            .map(|(j, &kj)| self.get(j, kj))
            .product()
    }
}

fn lq_norm(k: &[u32], q: f64) -> f64 {
    k.iter()
        .filter(|&&v| v > 0)
        .map(|&v| (v as f64).powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

// Compositions of `total` into `m` parts, descending lexicographic order.
fn compositions(m: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if prefix.len() == m - 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        compositions(m, total - first, prefix, out);
        prefix.pop();
    }
}

/// All indices with `(Σ k_i^q)^{1/q} ≤ max_total_degree`.
pub fn generate_index_set(m: usize, max_total_degree: u32, q_norm: f64) -> Result<IndexSet> {
    if m == 0 {
        return Err(Error::InvalidConfig("index set needs m >= 1".into()));
    }
    if !(q_norm > 0.0 && q_norm <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "q_norm {q_norm} not in (0, 1]"
        )));
    }
    let bound = max_total_degree as f64 + LQ_TOL;
    let mut indices = Vec::new();
    let mut scratch = Vec::with_capacity(m);
    for total in 0..=max_total_degree {
        let mut level = Vec::new();
        compositions(m, total, &mut scratch, &mut level);
        indices.extend(level.into_iter().filter(|k| lq_norm(k, q_norm) <= bound));
    }
    Ok(IndexSet {
        indices,
        m,
        max_total_degree,
        q_norm,
    })
}

/// C(d + degree, degree) in exact integer arithmetic.
pub fn basis_cardinality(d: usize, degree: u32) -> Result<u64> {
    if d == 0 {
        return Err(Error::InvalidConfig(
            "basis_cardinality needs d >= 1".into(),
        ));
    }
    let overflow = || {
        let n = (d as f64) + degree as f64;
        let ln_c = libm::lgamma(n + 1.0)
            - libm::lgamma(d as f64 + 1.0)
            - libm::lgamma(degree as f64 + 1.0);
        Error::Overflow {
            required_bits: (ln_c / std::f64::consts::LN_2).ceil() as u32 + 1,
        }
    };
    let mut c: u128 = 1;
    for i in 1..=degree as u128 {
        c = c.checked_mul(d as u128 + i).ok_or_else(overflow)? / i;
    }
    u64::try_from(c).map_err(|_| overflow())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite_eval(0, 3.7), 1.0);
        assert!(hermite_eval(2, 1.0).abs() < 1e-15);
        assert!((hermite_eval(3, 2.0) - 2.0 / 6f64.sqrt()).abs() < 1e-15);
        assert_eq!(hermite_derivative(0, 3.0), 0.0);
        assert_eq!(hermite_derivative(1, 7.0), 1.0);
        let h = 1e-5;
        let fd = (hermite_eval(4, 0.5 + h) - hermite_eval(4, 0.5 - h)) / (2.0 * h);
        assert!((hermite_derivative(4, 0.5) - fd).abs() < 1e-7);
    }

    #[test]
    fn recurrence_matches_explicit_polynomials() {
        // He_n from the unnormalized recurrence He_{n+1} = x He_n - n He_{n-1}, divided by √n!
        for &x in &[-10.0, -3.3, 0.0, 0.7, 4.0, 10.0] {
            let (mut a, mut b) = (1.0f64, x);
            let mut fact = 1.0f64;
            for n in 1..=20u32 {
                fact *= n as f64;
                let psi = hermite_eval(n, x);
                let reference = b / fact.sqrt();
                assert!(
                    (psi - reference).abs() <= 1e-12 * reference.abs().max(1.0),
                    "n={n} x={x}"
                );
                let c = x * b - n as f64 * a;
                a = b;
                b = c;
            }
        }
    }

    #[test]
    fn tensor_examples() {
        assert_eq!(tensor_eval(&[0, 0, 0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(tensor_eval(&[2, 0], &[1.0, 5.0]).unwrap(), 0.0);
        assert!((tensor_eval(&[1, 1], &[0.3, -2.0]).unwrap() + 0.6).abs() < 1e-15);
        assert!(tensor_eval(&[1], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn index_set_examples() {
        assert_eq!(generate_index_set(2, 3, 1.0).unwrap().len(), 10);
        let s = generate_index_set(2, 2, 0.75).unwrap();
        assert_eq!(
            s.indices,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![0, 2]]
        );
        for p in 0..8 {
            assert_eq!(generate_index_set(1, p, 0.4).unwrap().len(), p as usize + 1);
        }
        assert!(generate_index_set(2, 2, 0.0).is_err());
        assert!(generate_index_set(2, 2, 1.5).is_err());
    }

    #[test]
    fn cardinality_examples() {
        assert_eq!(basis_cardinality(2, 3).unwrap(), 10);
        assert_eq!(basis_cardinality(1, 0).unwrap(), 1);
        assert_eq!(basis_cardinality(10, 7).unwrap(), 19448);
        match basis_cardinality(1000, 100) {
            Err(Error::Overflow { required_bits }) => assert!(required_bits > 64),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn full_set_matches_cardinality() {
        for m in 1..5 {
            for p in 0..6 {
                let s = generate_index_set(m, p, 1.0).unwrap();
                assert_eq!(s.len() as u64, basis_cardinality(m, p).unwrap());
                assert_eq!(s.indices[0], vec![0; m]);
            }
        }
    }

    #[test]
    fn design_row_matches_tensor_eval() {
        let s = generate_index_set(3, 4, 0.75).unwrap();
        let z = [0.3, -1.2, 2.0];
        let mut row = vec![0.0; s.len()];
        s.eval_row(&z, &mut row);
        for (k, v) in s.indices.iter().zip(&row) {
            assert!((tensor_eval(k, &z).unwrap() - v).abs() < 1e-14);
        }
    }
}

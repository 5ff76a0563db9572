//! Kronecker products and partial traces.
//!
//! Tensor indices are ordered `(left, right)`: entry `(i*p + k, j*q + l)` of `A ⊗ B`
//! is `A[i][j] * B[k][l]`.

use super::matrix::{CMatrix, ZERO};

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (p, q) = b.shape();
    CMatrix::from_fn(a.rows() * p, a.cols() * q, |r, c| a[(r / p, c / q)] * b[(r % p, c % q)])
}

/// Traces out the left factor of `M ∈ M_k ⊗ M_n`, returning an `n x n` matrix.
pub fn partial_trace_left(m: &CMatrix, k: usize, n: usize) -> CMatrix {
    assert_eq!(m.shape(), (k * n, k * n), "partial_trace_left shape mismatch");
    let mut out = CMatrix::zeros(n, n);
    for i in 0..k {
        for a in 0..n {
            for b in 0..n {
                out[(a, b)] += m[(i * n + a, i * n + b)];
            }
        }
    }
    out
}

/// Traces out the right factor of `M ∈ M_k ⊗ M_n`, returning a `k x k` matrix.
pub fn partial_trace_right(m: &CMatrix, k: usize, n: usize) -> CMatrix {
    assert_eq!(m.shape(), (k * n, k * n), "partial_trace_right shape mismatch");
    CMatrix::from_fn(k, k, |i, j| {
        let mut acc = ZERO;
        for a in 0..n {
            acc += m[(i * n + a, j * n + a)];
        }
        acc
    })
}

/// Exchanges the tensor factors of `M ∈ M_k ⊗ M_n`, giving an element of `M_n ⊗ M_k`.
pub fn swap_factors(m: &CMatrix, k: usize, n: usize) -> CMatrix {
    assert_eq!(m.shape(), (k * n, k * n), "swap_factors shape mismatch");
    CMatrix::from_fn(k * n, k * n, |r, c| {
        let (a, i) = (r / k, r % k);
        let (b, j) = (c / k, c % k);
        m[(i * n + a, j * n + b)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix::C64;

    fn sample(rows: usize, cols: usize, seed: f64) -> CMatrix {
        CMatrix::from_fn(rows, cols, |i, j| C64::new((i as f64 + seed).sin(), (j as f64 * seed).cos()))
    }

    #[test]
    fn kron_index_convention() {
        let a = sample(2, 2, 0.3);
        let b = sample(3, 3, 1.7);
        let k = kron(&a, &b);
        assert_eq!(k[(1 * 3 + 2, 0 * 3 + 1)], a[(1, 0)] * b[(2, 1)]);
    }

    #[test]
    fn partial_traces_of_product() {
        let a = sample(2, 2, 0.3);
        let b = sample(3, 3, 1.7);
        let k = kron(&a, &b);
        assert!(partial_trace_left(&k, 2, 3).distance(&b.scale(a.trace())) < 1e-13);
        assert!(partial_trace_right(&k, 2, 3).distance(&a.scale(b.trace())) < 1e-13);
    }

    #[test]
    fn swap_exchanges_product_factors() {
        let a = sample(2, 2, 0.9);
        let b = sample(3, 3, 0.4);
        assert!(swap_factors(&kron(&a, &b), 2, 3).distance(&kron(&b, &a)) < 1e-15);
    }
}

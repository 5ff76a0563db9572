//! Cyclic complex Jacobi diagonalisation and support-restricted functional calculus.

use super::matrix::{CMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};
use crate::tol::Tolerances;

const MAX_SWEEPS: usize = 100;

/// Hermitian tolerance for accepting an input to the eigensolver.
const HERMITIAN_TOL: f64 = 1e-9;

/// Eigendecomposition `M = V diag(values) V*` of a Hermitian matrix.
///
/// Eigenvalues are sorted ascending; the columns of `vectors` are orthonormal.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// Diagonalises a Hermitian matrix by cyclic Jacobi rotations.
    ///
    /// The Hermitian part of `m` is diagonalised; inputs further than `1e-9` (relative)
    /// from Hermitian are rejected.
    pub fn new(m: &CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!("eigensolver needs a square matrix, got {:?}", m.shape())));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite("eigensolver input".into()));
        }
        let n = m.rows();
        if n == 0 {
            return Ok(HermitianEigen { values: vec![], vectors: CMatrix::zeros(0, 0) });
        }
        let residual = m.hermiticity_residual();
        if m.frobenius_norm() > 0.0 && residual > HERMITIAN_TOL {
            return Err(Error::NotHermitian { residual });
        }
        let mut a = m.hermitian_part();
        let mut v = CMatrix::identity(n);
        let total = a.frobenius_norm().powi(2);
        let mut converged = false;
        let mut off = off_diagonal_mass(&a);
        for _ in 0..MAX_SWEEPS {
            if off <= total * 1e-32 || off == 0.0 {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
            off = off_diagonal_mass(&a);
        }
        if !converged && off > total * 1e-32 && off > 0.0 {
            return Err(Error::NoConvergence { sweeps: MAX_SWEEPS, off: off.sqrt() });
        }
        let mut order: Vec<usize> = (0..n).collect();
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
        order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
        let values = order.iter().map(|&i| diag[i]).collect();
        let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
        Ok(HermitianEigen { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Threshold below which eigenvalues count as zero.
    pub fn rank_threshold(&self, tol: &Tolerances) -> f64 {
        tol.eps_rank * self.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// `V diag(values) V*`.
    pub fn reconstruct(&self) -> CMatrix {
        self.apply_fn(|x| C64::new(x, 0.0), |_| true)
    }

    /// Relative reconstruction residual against `m`.
    pub fn reconstruction_residual(&self, m: &CMatrix) -> f64 {
        m.hermitian_part().distance(&self.reconstruct()) / m.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    /// `sum_{keep(l)} f(l) v v*`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64, keep: impl Fn(f64) -> bool) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            if !keep(lambda) {
                continue;
            }
            let w = f(lambda);
            for i in 0..n {
                let vi = self.vectors[(i, k)] * w;
                if vi == ZERO {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += vi * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }

    /// Columns of `V` whose eigenvalues exceed `threshold`, as an isometry.
    pub fn range_isometry(&self, threshold: f64) -> CMatrix {
        let keep: Vec<usize> = (0..self.dim()).filter(|&k| self.values[k] > threshold).collect();
        CMatrix::from_fn(self.dim(), keep.len(), |i, c| self.vectors[(i, keep[c])])
    }
}

fn off_diagonal_mass(a: &CMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s
}

/// One Jacobi rotation annihilating `a[p][q]`: `A <- J* A J`, `V <- V J`.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let n = a.rows();
    let phase = apq / r;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (2.0 * r);
    let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // J restricted to (p,q) is diag(1, conj(phase)) * [[c, s], [-s, c]].
    let jpp = C64::new(c, 0.0);
    let jpq = C64::new(s, 0.0);
    let jqp = phase.conj() * -s;
    let jqq = phase.conj() * c;
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * jpp + akq * jqp;
        a[(k, q)] = akp * jpq + akq * jqq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
        a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * jpp + vkq * jqp;
        v[(k, q)] = vkp * jpq + vkq * jqq;
    }
}

/// Diagonalises a Hermitian matrix.
pub fn eigh(m: &CMatrix) -> Result<HermitianEigen> {
    HermitianEigen::new(m)
}

/// Applies `f` to the support of a positive semidefinite matrix.
///
/// Eigenvalues at most `eps_rank * lambda_max` are treated as zero and mapped to zero;
/// an eigenvalue below `-eps_rank * lambda_max` is an error.
pub fn herm_fun(m: &CMatrix, f: impl Fn(f64) -> C64, tol: &Tolerances) -> Result<CMatrix> {
    let eig = HermitianEigen::new(m)?;
    herm_fun_eig(&eig, f, tol)
}

/// [`herm_fun`] on a precomputed eigendecomposition.
pub fn herm_fun_eig(eig: &HermitianEigen, f: impl Fn(f64) -> C64, tol: &Tolerances) -> Result<CMatrix> {
    let thr = eig.rank_threshold(tol);
    if eig.min_eigenvalue() < -thr {
        return Err(Error::NegativeEigenvalue { value: eig.min_eigenvalue() });
    }
    Ok(eig.apply_fn(f, |l| l > thr))
}

/// Moore-Penrose pseudo-inverse of a positive semidefinite matrix.
pub fn pseudo_inverse(m: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    herm_fun(m, |l| C64::new(1.0 / l, 0.0), tol)
}

/// Square root of a positive semidefinite matrix.
pub fn sqrt_psd(m: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    herm_fun(m, |l| C64::new(l.sqrt(), 0.0), tol)
}

/// Support projection of a positive semidefinite matrix.
pub fn support_projection(m: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    herm_fun(m, |_| ONE, tol)
}

/// Support-restricted imaginary power `M^{it}`.
pub fn imaginary_power(m: &CMatrix, t: f64, tol: &Tolerances) -> Result<CMatrix> {
    herm_fun(m, |l| C64::from_polar(1.0, t * l.ln()), tol)
}

/// Whether the Hermitian matrix is positive semidefinite up to `eps_rank`.
pub fn is_psd(m: &CMatrix, tol: &Tolerances) -> Result<bool> {
    let eig = HermitianEigen::new(m)?;
    Ok(eig.min_eigenvalue() >= -eig.rank_threshold(tol).max(crate::tol::ABS_FLOOR))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn diagonal_input_is_sorted() {
        let e = eigh(&CMatrix::from_real_diag(&[3.0, -1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn pauli_y_spectrum() {
        let y = CMatrix::from_vec(2, 2, vec![ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO]).unwrap();
        let e = eigh(&y).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
        assert!(e.reconstruction_residual(&y) < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_real(2, 2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(matches!(eigh(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn pseudo_inverse_of_rank_one() {
        let p = CMatrix::from_real(2, 2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        let pinv = pseudo_inverse(&p.scale_real(4.0), &tol()).unwrap();
        assert!(pinv.distance(&p.scale_real(0.25)) < 1e-14);
    }

    #[test]
    fn negative_input_rejected_by_functional_calculus() {
        let m = CMatrix::from_real_diag(&[1.0, -0.5]);
        assert!(matches!(sqrt_psd(&m, &tol()), Err(Error::NegativeEigenvalue { .. })));
    }

    #[test]
    fn imaginary_power_is_unitary_on_support() {
        let m = CMatrix::from_real_diag(&[0.2, 0.8, 0.0]);
        let u = imaginary_power(&m, 1.3, &tol()).unwrap();
        let p = &u * &u.adjoint();
        assert!(p.distance(&CMatrix::from_real_diag(&[1.0, 1.0, 0.0])) < 1e-14);
    }
}

//! States `ω = Σ_x p_x tr(ρ_x ·)` on multi-matrix algebras and their support data.

use crate::algebra::{AlgebraElement, MultiMatrixAlgebra};
use crate::error::{Error, Result};
use crate::linalg::{eigh, CMatrix, HermitianEigen, C64};
use crate::tol::{Tolerances, ABS_FLOOR};

const WEIGHT_TOL: f64 = 1e-8;

/// A state on a multi-matrix algebra, stored as block weights and normalised densities.
///
/// Invariant: `p_x ≥ 0`, `Σ p_x = 1`, and `densities[x]` is `Some` exactly when `p_x > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    algebra: MultiMatrixAlgebra,
    weights: Vec<f64>,
    densities: Vec<Option<CMatrix>>,
}

impl State {
    /// Validates weights and densities; densities of zero-weight blocks are discarded.
    pub fn new(
        algebra: &MultiMatrixAlgebra,
        weights: Vec<f64>,
        densities: Vec<Option<CMatrix>>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let s = algebra.num_blocks();
        if weights.len() != s || densities.len() != s {
            return Err(Error::InvalidState(format!(
                "expected {s} weights and densities, got {} and {}",
                weights.len(),
                densities.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < -WEIGHT_TOL) {
            return Err(Error::InvalidState(format!("weights must be non-negative, got {weights:?}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidState(format!("weights sum to {total}, expected 1")));
        }
        // Not renormalised, so that parsing a serialised state is the identity.
        let weights: Vec<f64> = weights.iter().map(|w| w.max(0.0)).collect();
        let mut out = Vec::with_capacity(s);
        for (x, (w, d)) in weights.iter().zip(densities).enumerate() {
            if *w == 0.0 {
                out.push(None);
                continue;
            }
            let d = d.ok_or_else(|| Error::InvalidState(format!("block {x} has positive weight but no density")))?;
            let m = algebra.block_size(x);
            if d.shape() != (m, m) {
                return Err(Error::DimensionMismatch(format!("density {x} has shape {:?}, expected {m}x{m}", d.shape())));
            }
            let eig = eigh(&d).map_err(|e| Error::InvalidState(format!("density {x}: {e}")))?;
            if eig.min_eigenvalue() < -eig.rank_threshold(tol).max(ABS_FLOOR) {
                return Err(Error::InvalidState(format!(
                    "density {x} has negative eigenvalue {:.3e}",
                    eig.min_eigenvalue()
                )));
            }
            let tr = d.trace();
            if (tr.re - 1.0).abs() > WEIGHT_TOL || tr.im.abs() > WEIGHT_TOL {
                return Err(Error::InvalidState(format!("density {x} has trace {tr}, expected 1")));
            }
            out.push(Some(d.hermitian_part()));
        }
        Ok(State { algebra: algebra.clone(), weights, densities: out })
    }

    /// Builds a state from unnormalised blocks `p_x ρ_x`.
    ///
    /// Blocks whose trace is at most `eps_rank` times the largest block trace get weight zero.
    pub fn from_weighted_blocks(algebra: &MultiMatrixAlgebra, blocks: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        if blocks.len() != algebra.num_blocks() {
            return Err(Error::InvalidState("wrong number of weighted blocks".into()));
        }
        let traces: Vec<f64> = blocks.iter().map(|b| b.trace().re).collect();
        let max = traces.iter().fold(0.0f64, |a, &t| a.max(t));
        let kept: Vec<f64> = traces.iter().map(|&t| if t > tol.eps_rank * max { t } else { 0.0 }).collect();
        let total: f64 = kept.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidState(format!("weighted blocks have total trace {total}, expected 1")));
        }
        let weights: Vec<f64> = kept.iter().map(|t| t / total).collect();
        let densities = blocks
            .into_iter()
            .zip(&kept)
            .map(|(b, &t)| if t > 0.0 { Some(b.scale_real(1.0 / t)) } else { None })
            .collect();
        State::new(algebra, weights, densities, tol)
    }

    /// The tracial state `tr(·)/Σ m_x`.
    pub fn tracial(algebra: &MultiMatrixAlgebra) -> Self {
        let total: usize = algebra.blocks().iter().sum();
        State {
            algebra: algebra.clone(),
            weights: algebra.blocks().iter().map(|&m| m as f64 / total as f64).collect(),
            densities: algebra.blocks().iter().map(|&m| Some(CMatrix::identity(m).scale_real(1.0 / m as f64))).collect(),
        }
    }

    /// Vector state `⟨ψ, · ψ⟩` on a single matrix block.
    pub fn pure(algebra: &MultiMatrixAlgebra, psi: &[C64]) -> Result<Self> {
        if !algebra.is_single_block() || algebra.block_size(0) != psi.len() {
            return Err(Error::InvalidState("pure state needs a single block matching the vector".into()));
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let v: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        State::new(algebra, vec![1.0], vec![Some(CMatrix::outer(&v, &v))], &Tolerances::default())
    }

    pub fn algebra(&self) -> &MultiMatrixAlgebra {
        &self.algebra
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn densities(&self) -> &[Option<CMatrix>] {
        &self.densities
    }

    pub fn density(&self, x: usize) -> Option<&CMatrix> {
        self.densities[x].as_ref()
    }

    /// `p_x ρ_x`, or the zero matrix when `p_x = 0`.
    pub fn weighted_block(&self, x: usize) -> CMatrix {
        match &self.densities[x] {
            Some(d) => d.scale_real(self.weights[x]),
            None => CMatrix::zeros(self.algebra.block_size(x), self.algebra.block_size(x)),
        }
    }

    /// The density `⊕_x p_x ρ_x` as an algebra element.
    pub fn weighted_element(&self) -> AlgebraElement {
        AlgebraElement::from_blocks_unchecked((0..self.algebra.num_blocks()).map(|x| self.weighted_block(x)).collect())
    }

    pub fn evaluate(&self, a: &AlgebraElement) -> C64 {
        assert_eq!(a.blocks().len(), self.weights.len(), "state evaluated on element of wrong algebra");
        self.densities
            .iter()
            .zip(&self.weights)
            .zip(a.blocks())
            .filter_map(|((d, &w), b)| d.as_ref().map(|d| d.trace_product(b) * w))
            .sum()
    }

    /// `‖A P_ω‖ / max(‖A‖, 1)`, the size of `A` outside the null space `{A : A P_ω = 0}`.
    ///
    /// Measured against the thresholded support rather than as `sqrt(ω(A*A))`, whose rounding
    /// error is itself of order `sqrt(ε)`.
    pub fn nullspace_residual(&self, a: &AlgebraElement, tol: &Tolerances) -> Result<f64> {
        // Absolute below unit norm: roundoff-sized elements have no meaningful direction.
        let scale = a.frobenius_norm().max(1.0);
        Ok(a.mul(self.support(tol)?.projection()).frobenius_norm() / scale)
    }

    /// Whether `ω(A*A) = 0`, i.e. `A P_ω = 0` up to `eps_eq`.
    pub fn in_nullspace(&self, a: &AlgebraElement, tol: &Tolerances) -> Result<bool> {
        Ok(self.nullspace_residual(a, tol)? <= tol.eps_eq)
    }

    /// Support projection, corner algebra and the restricted faithful state.
    pub fn support(&self, tol: &Tolerances) -> Result<SupportData> {
        SupportData::new(self, tol)
    }

    pub fn is_faithful(&self, tol: &Tolerances) -> Result<bool> {
        let sd = self.support(tol)?;
        Ok((0..self.algebra.num_blocks()).all(|x| sd.rank(x) == self.algebra.block_size(x)))
    }

    /// Largest entrywise distance between two states on the same algebra.
    pub fn distance(&self, other: &State) -> f64 {
        self.weighted_element().distance(&other.weighted_element())
    }
}

/// Support projection `P_ω` with the isometries `V_x` spanning its range blockwise.
///
/// Blocks of rank zero are dropped from the corner algebra `P_ω A P_ω`.
#[derive(Debug, Clone)]
pub struct SupportData {
    projection: AlgebraElement,
    isometries: Vec<Option<CMatrix>>,
    corner: MultiMatrixAlgebra,
    corner_to_ambient: Vec<usize>,
    restricted: State,
    eigen: Vec<HermitianEigen>,
    threshold: f64,
}

impl SupportData {
    fn new(state: &State, tol: &Tolerances) -> Result<Self> {
        let alg = state.algebra();
        let eigen: Vec<HermitianEigen> =
            (0..alg.num_blocks()).map(|x| eigh(&state.weighted_block(x))).collect::<Result<_>>()?;
        let max = eigen.iter().fold(0.0f64, |a, e| a.max(e.max_eigenvalue()));
        let threshold = tol.eps_rank * max;
        let isometries: Vec<Option<CMatrix>> = eigen
            .iter()
            .map(|e| {
                let v = e.range_isometry(threshold);
                (v.cols() > 0).then_some(v)
            })
            .collect();
        let projection = AlgebraElement::from_blocks_unchecked(
            isometries
                .iter()
                .enumerate()
                .map(|(x, v)| match v {
                    Some(v) => v * &v.adjoint(),
                    None => CMatrix::zeros(alg.block_size(x), alg.block_size(x)),
                })
                .collect(),
        );
        let corner_to_ambient: Vec<usize> = (0..alg.num_blocks()).filter(|&x| isometries[x].is_some()).collect();
        let corner = MultiMatrixAlgebra::new(
            corner_to_ambient.iter().map(|&x| isometries[x].as_ref().map(|v| v.cols()).unwrap_or(0)).collect(),
        )?;
        let restricted_blocks: Vec<CMatrix> = corner_to_ambient
            .iter()
            .map(|&x| {
                let v = isometries[x].as_ref().expect("kept block");
                (&v.adjoint() * &state.weighted_block(x)) * v
            })
            .collect();
        let total: f64 = restricted_blocks.iter().map(|b| b.trace().re).sum();
        let restricted_blocks = restricted_blocks.into_iter().map(|b| b.scale_real(1.0 / total)).collect();
        let restricted = State::from_weighted_blocks(&corner, restricted_blocks, tol)?;
        Ok(SupportData { projection, isometries, corner, corner_to_ambient, restricted, eigen, threshold })
    }

    /// `P_ω`.
    pub fn projection(&self) -> &AlgebraElement {
        &self.projection
    }

    /// `1 - P_ω`.
    pub fn complement(&self) -> AlgebraElement {
        self.projection.algebra().identity().sub(&self.projection)
    }

    /// The corner algebra `P_ω A P_ω ≅ ⊕ M_{r_x}`.
    pub fn corner(&self) -> &MultiMatrixAlgebra {
        &self.corner
    }

    /// Ambient block index of each corner block.
    pub fn corner_to_ambient(&self) -> &[usize] {
        &self.corner_to_ambient
    }

    /// Corner block index of an ambient block, if it survives.
    pub fn ambient_to_corner(&self, x: usize) -> Option<usize> {
        self.corner_to_ambient.iter().position(|&a| a == x)
    }

    /// Isometry `V_x` (`m_x × r_x`) onto the support inside block `x`.
    pub fn isometry(&self, x: usize) -> Option<&CMatrix> {
        self.isometries[x].as_ref()
    }

    pub fn rank(&self, x: usize) -> usize {
        self.isometries[x].as_ref().map_or(0, |v| v.cols())
    }

    /// Faithful state `ω∘lift` on the corner algebra.
    pub fn restricted_state(&self) -> &State {
        &self.restricted
    }

    /// Eigendecomposition of the weighted block `p_x ρ_x`.
    pub fn eigen(&self, x: usize) -> &HermitianEigen {
        &self.eigen[x]
    }

    /// Global rank threshold used for every block.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// `A ↦ V* A V`, blockwise into the corner algebra.
    pub fn compress(&self, a: &AlgebraElement) -> AlgebraElement {
        AlgebraElement::from_blocks_unchecked(
            self.corner_to_ambient
                .iter()
                .map(|&x| {
                    let v = self.isometries[x].as_ref().expect("kept block");
                    (&v.adjoint() * a.block(x)) * v
                })
                .collect(),
        )
    }

    /// `C ↦ V C V*`, zero on dropped blocks.
    pub fn lift(&self, c: &AlgebraElement) -> AlgebraElement {
        let alg = self.projection.algebra();
        let mut out = AlgebraElement::zero(&alg);
        for (k, &x) in self.corner_to_ambient.iter().enumerate() {
            let v = self.isometries[x].as_ref().expect("kept block");
            *out.block_mut(x) = (v * c.block(k)) * &v.adjoint();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn rejects_bad_weights() {
        let alg = MultiMatrixAlgebra::new(vec![1, 1]).unwrap();
        let one = || Some(CMatrix::identity(1));
        assert!(State::new(&alg, vec![0.5, 0.6], vec![one(), one()], &tol()).is_err());
        assert!(State::new(&alg, vec![1.5, -0.5], vec![one(), one()], &tol()).is_err());
        assert!(State::new(&alg, vec![1.0, 0.0], vec![one(), None], &tol()).is_ok());
        assert!(State::new(&alg, vec![0.5, 0.5], vec![one(), None], &tol()).is_err());
    }

    #[test]
    fn zero_weight_block_is_dropped_from_corner() {
        let alg = MultiMatrixAlgebra::new(vec![2, 3]).unwrap();
        let rho = CMatrix::from_real_diag(&[0.25, 0.75]);
        let st = State::new(&alg, vec![1.0, 0.0], vec![Some(rho), None], &tol()).unwrap();
        let sd = st.support(&tol()).unwrap();
        assert_eq!(sd.corner().blocks(), &[2]);
        assert_eq!(sd.ambient_to_corner(1), None);
        assert!(!st.is_faithful(&tol()).unwrap());
    }

    #[test]
    fn compress_lift_roundtrip_on_corner() {
        let alg = MultiMatrixAlgebra::matrix(3);
        let st = State::new(&alg, vec![1.0], vec![Some(CMatrix::from_real_diag(&[0.5, 0.0, 0.5]))], &tol()).unwrap();
        let sd = st.support(&tol()).unwrap();
        assert_eq!(sd.corner().blocks(), &[2]);
        let c = AlgebraElement::new(sd.corner(), vec![CMatrix::from_real(2, 2, &[1., 2., 3., 4.]).unwrap()]).unwrap();
        assert!(sd.compress(&sd.lift(&c)).distance(&c) < 1e-14);
        let a = alg.identity();
        let pap = sd.lift(&sd.compress(&a));
        assert!(pap.distance(sd.projection()) < 1e-14);
    }

    #[test]
    fn nullspace_of_pure_state() {
        let alg = MultiMatrixAlgebra::matrix(2);
        let st = State::pure(&alg, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        let e01 = AlgebraElement::new(&alg, vec![CMatrix::unit(2, 2, 0, 1)]).unwrap();
        let e10 = AlgebraElement::new(&alg, vec![CMatrix::unit(2, 2, 1, 0)]).unwrap();
        assert!(st.in_nullspace(&e01, &tol()).unwrap());
        assert!(!st.in_nullspace(&e10, &tol()).unwrap());
    }
}

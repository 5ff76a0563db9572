//! Multi-matrix algebras `⊕_x M_{m_x}(ℂ)`, their elements and standard-form *-homomorphisms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, CMatrix, C64};

/// The algebra `⊕_x M_{m_x}(ℂ)` described by its block sizes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiMatrixAlgebra {
    blocks: Vec<usize>,
}

/// Matrix unit `E_{row,col}` inside block `block`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MatrixUnit {
    pub block: usize,
    pub row: usize,
    pub col: usize,
}

impl MultiMatrixAlgebra {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidAlgebra("an algebra needs at least one block".into()));
        }
        if blocks.iter().any(|&m| m == 0) {
            return Err(Error::InvalidAlgebra(format!("block sizes must be positive, got {blocks:?}")));
        }
        Ok(MultiMatrixAlgebra { blocks })
    }

    /// The full matrix algebra `M_n(ℂ)`.
    pub fn matrix(n: usize) -> Self {
        MultiMatrixAlgebra::new(vec![n]).expect("positive size")
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_size(&self, x: usize) -> usize {
        self.blocks[x]
    }

    /// Complex dimension `Σ m_x²`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|m| m * m).sum()
    }

    pub fn is_single_block(&self) -> bool {
        self.blocks.len() == 1
    }

    /// All matrix units, ordered by block, then row, then column.
    pub fn matrix_units(&self) -> Vec<MatrixUnit> {
        let mut units = Vec::with_capacity(self.dim());
        for (block, &m) in self.blocks.iter().enumerate() {
            for row in 0..m {
                for col in 0..m {
                    units.push(MatrixUnit { block, row, col });
                }
            }
        }
        units
    }

    pub fn unit_element(&self, u: MatrixUnit) -> AlgebraElement {
        let mut e = AlgebraElement::zero(self);
        e.blocks[u.block][(u.row, u.col)] = C64::new(1.0, 0.0);
        e
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement::zero(self)
    }

    pub fn identity(&self) -> AlgebraElement {
        AlgebraElement::identity(self)
    }

    /// Central projections `P_x`, one per block.
    pub fn central_projections(&self) -> Vec<AlgebraElement> {
        (0..self.num_blocks())
            .map(|x| AlgebraElement::from_block(self, x, CMatrix::identity(self.blocks[x])))
            .collect()
    }
}

/// Element `⊕_x A_x` of a multi-matrix algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    blocks: Vec<CMatrix>,
}

impl AlgebraElement {
    /// Validates that every block is square of the size dictated by `alg`.
    pub fn new(alg: &MultiMatrixAlgebra, blocks: Vec<CMatrix>) -> Result<Self> {
        if blocks.len() != alg.num_blocks() {
            return Err(Error::DimensionMismatch(format!(
                "element has {} blocks, algebra has {}",
                blocks.len(),
                alg.num_blocks()
            )));
        }
        for (x, (b, &m)) in blocks.iter().zip(alg.blocks()).enumerate() {
            if b.shape() != (m, m) {
                return Err(Error::DimensionMismatch(format!("block {x} has shape {:?}, expected {m}x{m}", b.shape())));
            }
            if !b.is_finite() {
                return Err(Error::NonFinite(format!("element block {x}")));
            }
        }
        Ok(AlgebraElement { blocks })
    }

    pub(crate) fn from_blocks_unchecked(blocks: Vec<CMatrix>) -> Self {
        AlgebraElement { blocks }
    }

    pub fn zero(alg: &MultiMatrixAlgebra) -> Self {
        AlgebraElement { blocks: alg.blocks().iter().map(|&m| CMatrix::zeros(m, m)).collect() }
    }

    pub fn identity(alg: &MultiMatrixAlgebra) -> Self {
        AlgebraElement { blocks: alg.blocks().iter().map(|&m| CMatrix::identity(m)).collect() }
    }

    /// Element supported on a single block.
    pub fn from_block(alg: &MultiMatrixAlgebra, x: usize, m: CMatrix) -> Self {
        let mut e = AlgebraElement::zero(alg);
        assert_eq!(e.blocks[x].shape(), m.shape(), "from_block shape mismatch");
        e.blocks[x] = m;
        e
    }

    pub fn algebra(&self) -> MultiMatrixAlgebra {
        MultiMatrixAlgebra { blocks: self.blocks.iter().map(|b| b.rows()).collect() }
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn block(&self, x: usize) -> &CMatrix {
        &self.blocks[x]
    }

    pub fn block_mut(&mut self, x: usize) -> &mut CMatrix {
        &mut self.blocks[x]
    }

    pub fn into_blocks(self) -> Vec<CMatrix> {
        self.blocks
    }

    fn zip_with(&self, other: &AlgebraElement, f: impl Fn(&CMatrix, &CMatrix) -> CMatrix) -> AlgebraElement {
        assert_eq!(self.blocks.len(), other.blocks.len(), "elements of different algebras");
        AlgebraElement { blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect() }
    }

    pub fn mul(&self, other: &AlgebraElement) -> AlgebraElement {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &AlgebraElement) -> AlgebraElement {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &AlgebraElement) -> AlgebraElement {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: C64) -> AlgebraElement {
        AlgebraElement { blocks: self.blocks.iter().map(|b| b.scale(s)).collect() }
    }

    pub fn adjoint(&self) -> AlgebraElement {
        AlgebraElement { blocks: self.blocks.iter().map(CMatrix::adjoint).collect() }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.frobenius_norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &AlgebraElement) -> f64 {
        assert_eq!(self.blocks.len(), other.blocks.len(), "elements of different algebras");
        self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.distance(b).powi(2)).sum::<f64>().sqrt()
    }

    /// Blockwise trace `Σ_x tr(A_x)`.
    pub fn trace(&self) -> C64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    /// Block-diagonal matrix representing the element.
    pub fn to_block_diagonal(&self) -> CMatrix {
        CMatrix::direct_sum(&self.blocks)
    }
}

/// Unital *-homomorphism `⊕_j M_{n_j} → ⊕_i M_{m_i}` in standard form.
///
/// Block `i` of the image is `diag(1_{c_i1} ⊗ B_1, 1_{c_i2} ⊗ B_2, …)` with source blocks in
/// ascending order; the multiplicity is the left tensor factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomSpec {
    source: MultiMatrixAlgebra,
    target: MultiMatrixAlgebra,
    mult: Vec<Vec<usize>>,
}

/// A nonzero sub-block `P_i Q_j` of a homomorphism's image.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportPair {
    pub target_block: usize,
    pub source_block: usize,
    /// Row/column offset of the sub-block inside target block `i`.
    pub offset: usize,
    /// Multiplicity `c_ij`.
    pub mult: usize,
    /// Side length `c_ij * n_j`.
    pub size: usize,
    /// The projection `P_i F(Q_j)` as an element of the target.
    pub projection: AlgebraElement,
}

impl HomSpec {
    /// Validates `m_i = Σ_j c_ij n_j` for every target block.
    ///
    /// Source blocks with an all-zero column are allowed; they lie in the kernel.
    pub fn new(source: MultiMatrixAlgebra, target: MultiMatrixAlgebra, mult: Vec<Vec<usize>>) -> Result<Self> {
        if mult.len() != target.num_blocks() {
            return Err(Error::InvalidHom(format!(
                "multiplicity matrix has {} rows, target has {} blocks",
                mult.len(),
                target.num_blocks()
            )));
        }
        for (i, row) in mult.iter().enumerate() {
            if row.len() != source.num_blocks() {
                return Err(Error::InvalidHom(format!(
                    "multiplicity row {i} has {} entries, source has {} blocks",
                    row.len(),
                    source.num_blocks()
                )));
            }
            let size: usize = row.iter().zip(source.blocks()).map(|(c, n)| c * n).sum();
            if size != target.block_size(i) {
                return Err(Error::InvalidHom(format!(
                    "target block {i} has size {} but Σ_j c_ij n_j = {size}",
                    target.block_size(i)
                )));
            }
        }
        Ok(HomSpec { source, target, mult })
    }

    /// The amplification `B ↦ 1_k ⊗ B` of `M_n` into `M_{kn}`.
    pub fn amplification(k: usize, n: usize) -> Self {
        HomSpec::new(MultiMatrixAlgebra::matrix(n), MultiMatrixAlgebra::matrix(k * n), vec![vec![k]])
            .expect("consistent amplification")
    }

    pub fn source(&self) -> &MultiMatrixAlgebra {
        &self.source
    }

    pub fn target(&self) -> &MultiMatrixAlgebra {
        &self.target
    }

    pub fn mult(&self) -> &[Vec<usize>] {
        &self.mult
    }

    /// Offset of the `(i, j)` sub-block inside target block `i`.
    pub fn offset(&self, i: usize, j: usize) -> usize {
        (0..j).map(|jj| self.mult[i][jj] * self.source.block_size(jj)).sum()
    }

    /// Source blocks mapped to zero (`c_ij = 0` for all `i`).
    pub fn kernel_blocks(&self) -> Vec<usize> {
        (0..self.source.num_blocks()).filter(|&j| self.mult.iter().all(|row| row[j] == 0)).collect()
    }

    /// Total multiplicity `Σ_i c_ij` of source block `j`.
    pub fn column_sum(&self, j: usize) -> usize {
        self.mult.iter().map(|row| row[j]).sum()
    }

    /// Image of a single source block `B_j` inside target block `i`.
    pub fn apply_block(&self, i: usize, j: usize, b: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.target.block_size(i), self.target.block_size(i));
        let c = self.mult[i][j];
        if c > 0 {
            out.set_submatrix(self.offset(i, j), self.offset(i, j), &kron(&CMatrix::identity(c), b));
        }
        out
    }

    pub fn apply(&self, b: &AlgebraElement) -> AlgebraElement {
        assert_eq!(b.blocks().len(), self.source.num_blocks(), "hom applied to element of wrong algebra");
        let blocks = (0..self.target.num_blocks())
            .map(|i| {
                let m = self.target.block_size(i);
                let mut out = CMatrix::zeros(m, m);
                for j in 0..self.source.num_blocks() {
                    let c = self.mult[i][j];
                    if c > 0 {
                        let off = self.offset(i, j);
                        out.set_submatrix(off, off, &kron(&CMatrix::identity(c), b.block(j)));
                    }
                }
                out
            })
            .collect();
        AlgebraElement { blocks }
    }

    /// All pairs `(i, j)` with `c_ij > 0`, in row-major order.
    pub fn support_pairs(&self) -> Vec<SupportPair> {
        let mut pairs = Vec::new();
        for i in 0..self.target.num_blocks() {
            for j in 0..self.source.num_blocks() {
                let c = self.mult[i][j];
                if c == 0 {
                    continue;
                }
                let n = self.source.block_size(j);
                let offset = self.offset(i, j);
                let mut p = CMatrix::zeros(self.target.block_size(i), self.target.block_size(i));
                for k in 0..c * n {
                    p[(offset + k, offset + k)] = C64::new(1.0, 0.0);
                }
                pairs.push(SupportPair {
                    target_block: i,
                    source_block: j,
                    offset,
                    mult: c,
                    size: c * n,
                    projection: AlgebraElement::from_block(&self.target, i, p),
                });
            }
        }
        pairs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alg(b: &[usize]) -> MultiMatrixAlgebra {
        MultiMatrixAlgebra::new(b.to_vec()).unwrap()
    }

    #[test]
    fn rejects_inconsistent_multiplicities() {
        assert!(HomSpec::new(alg(&[2]), alg(&[5]), vec![vec![2]]).is_err());
        assert!(HomSpec::new(alg(&[2, 1]), alg(&[5]), vec![vec![2, 1]]).is_ok());
    }

    #[test]
    fn zero_column_is_kernel() {
        let h = HomSpec::new(alg(&[1, 2]), alg(&[2]), vec![vec![0, 1]]).unwrap();
        assert_eq!(h.kernel_blocks(), vec![0]);
        let one = h.apply(&h.source().identity());
        assert_eq!(one, h.target().identity());
    }

    #[test]
    fn standard_form_layout() {
        let h = HomSpec::new(alg(&[1, 2]), alg(&[5, 2]), vec![vec![1, 2], vec![0, 1]]).unwrap();
        let b = AlgebraElement::new(
            h.source(),
            vec![CMatrix::from_real(1, 1, &[7.0]).unwrap(), CMatrix::from_real(2, 2, &[1., 2., 3., 4.]).unwrap()],
        )
        .unwrap();
        let a = h.apply(&b);
        let d = a.block(0);
        assert_eq!(d[(0, 0)].re, 7.0);
        assert_eq!(d[(1, 2)].re, 2.0);
        assert_eq!(d[(4, 3)].re, 3.0);
        assert_eq!(d[(1, 3)].re, 0.0);
        assert_eq!(a.block(1), b.block(1));
        assert_eq!(h.offset(0, 1), 1);
        assert_eq!(h.support_pairs().len(), 3);
    }

    #[test]
    fn matrix_units_are_ordered() {
        let units = alg(&[1, 2]).matrix_units();
        assert_eq!(units.len(), 5);
        assert_eq!(units[1], MatrixUnit { block: 1, row: 0, col: 0 });
        assert_eq!(units[4], MatrixUnit { block: 1, row: 1, col: 1 });
    }
}

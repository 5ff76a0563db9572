//! Linear maps between multi-matrix algebras stored through their Choi blocks.
//!
//! A map `F: ⊕_y M_{n_y} → ⊕_x M_{m_x}` is stored as `C_xy = Σ_ij E_ij ⊗ F_xy(E_ij)`,
//! with the source matrix units on the left tensor factor. `F` is completely positive iff
//! every `C_xy` is positive semidefinite.

use serde::Serialize;

use crate::algebra::{AlgebraElement, HomSpec, MatrixUnit, MultiMatrixAlgebra};
use crate::error::{Error, Result};
use crate::linalg::{eigh, swap_factors, CMatrix, C64, ZERO};
use crate::par;
use crate::state::State;
use crate::tol::{Tolerances, ABS_FLOOR};

/// Linear map between multi-matrix algebras; a channel when [`Channel::is_ucp`] holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    source: MultiMatrixAlgebra,
    target: MultiMatrixAlgebra,
    /// `choi[x][y]` has side `n_y * m_x`.
    choi: Vec<Vec<CMatrix>>,
}

/// Outcome of a unital complete positivity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UcpVerdict {
    pub cp: bool,
    pub unital: bool,
    /// Smallest Choi eigenvalue relative to the largest, over all blocks.
    pub min_relative_eigenvalue: f64,
    /// Relative Hermiticity defect of the worst Choi block.
    pub hermitian_residual: f64,
    /// `‖F(1) - 1‖ / ‖1‖`.
    pub unital_residual: f64,
}

impl UcpVerdict {
    pub fn holds(&self) -> bool {
        self.cp && self.unital
    }
}

/// Verdict of an almost-everywhere comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AeVerdict {
    pub holds: bool,
    /// `max_b sqrt(ω(X_b* X_b))` for the defect elements `X_b`.
    pub residual: f64,
    /// Pairing form of the same defect, when computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairing_residual: Option<f64>,
}

/// Minimal Stinespring data for one target block: `F_x = Ad_{V_x} ∘ π_x`.
#[derive(Debug, Clone)]
pub struct StinespringBlock {
    /// `π_x` from the source into `M_{d_x}`, with multiplicities given by the Choi ranks.
    pub pi: HomSpec,
    /// Isometry `V_x: ℂ^{m_x} → ℂ^{d_x}` with `F_x(B) = V_x* π_x(B) V_x`.
    pub v: CMatrix,
}

impl Channel {
    /// Wraps Choi blocks after checking their shapes.
    pub fn from_choi(source: MultiMatrixAlgebra, target: MultiMatrixAlgebra, choi: Vec<Vec<CMatrix>>) -> Result<Self> {
        if choi.len() != target.num_blocks() {
            return Err(Error::DimensionMismatch(format!(
                "Choi grid has {} rows, target has {} blocks",
                choi.len(),
                target.num_blocks()
            )));
        }
        for (x, row) in choi.iter().enumerate() {
            if row.len() != source.num_blocks() {
                return Err(Error::DimensionMismatch(format!("Choi row {x} has {} entries", row.len())));
            }
            for (y, c) in row.iter().enumerate() {
                let side = source.block_size(y) * target.block_size(x);
                if c.shape() != (side, side) {
                    return Err(Error::DimensionMismatch(format!(
                        "Choi block ({x},{y}) has shape {:?}, expected {side}x{side}",
                        c.shape()
                    )));
                }
                if !c.is_finite() {
                    return Err(Error::NonFinite(format!("Choi block ({x},{y})")));
                }
            }
        }
        Ok(Channel { source, target, choi })
    }

    /// Tabulates a linear map by evaluating it on every source matrix unit.
    pub fn from_map<F>(source: &MultiMatrixAlgebra, target: &MultiMatrixAlgebra, f: F) -> Self
    where
        F: Fn(&AlgebraElement) -> AlgebraElement + Sync + Send,
    {
        let units = source.matrix_units();
        let images = par::map_range(units.len(), |k| f(&source.unit_element(units[k])));
        let mut choi: Vec<Vec<CMatrix>> = (0..target.num_blocks())
            .map(|x| {
                (0..source.num_blocks())
                    .map(|y| {
                        let side = source.block_size(y) * target.block_size(x);
                        CMatrix::zeros(side, side)
                    })
                    .collect()
            })
            .collect();
        for (u, img) in units.iter().zip(images) {
            for x in 0..target.num_blocks() {
                let m = target.block_size(x);
                choi[x][u.block].set_submatrix(u.row * m, u.col * m, img.block(x));
            }
        }
        Channel { source: source.clone(), target: target.clone(), choi }
    }

    pub fn from_hom(h: &HomSpec) -> Self {
        Channel::from_map(h.source(), h.target(), |b| h.apply(b))
    }

    /// Map `F_xy(B) = Σ_k K_k* B K_k` from Kraus operators `K_k` of shape `n_y × m_x`.
    pub fn from_kraus(
        source: &MultiMatrixAlgebra,
        target: &MultiMatrixAlgebra,
        kraus: &[Vec<Vec<CMatrix>>],
    ) -> Result<Self> {
        if kraus.len() != target.num_blocks() || kraus.iter().any(|r| r.len() != source.num_blocks()) {
            return Err(Error::DimensionMismatch("Kraus grid does not match the algebras".into()));
        }
        let mut choi = Vec::with_capacity(target.num_blocks());
        for (x, row) in kraus.iter().enumerate() {
            let m = target.block_size(x);
            let mut out_row = Vec::with_capacity(source.num_blocks());
            for (y, ops) in row.iter().enumerate() {
                let n = source.block_size(y);
                let mut c = CMatrix::zeros(n * m, n * m);
                for k in ops {
                    if k.shape() != (n, m) {
                        return Err(Error::DimensionMismatch(format!(
                            "Kraus operator for ({x},{y}) has shape {:?}, expected {n}x{m}",
                            k.shape()
                        )));
                    }
                    let w: Vec<C64> = k.data().iter().map(|z| z.conj()).collect();
                    c += &CMatrix::outer(&w, &w);
                }
                out_row.push(c);
            }
            choi.push(out_row);
        }
        Channel::from_choi(source.clone(), target.clone(), choi)
    }

    pub fn identity(alg: &MultiMatrixAlgebra) -> Self {
        Channel::from_map(alg, alg, |b| b.clone())
    }

    /// The transpose map on `M_n`.
    pub fn transpose_map(n: usize) -> Self {
        let alg = MultiMatrixAlgebra::matrix(n);
        Channel::from_map(&alg, &alg, |b| AlgebraElement::from_block(&alg, 0, b.block(0).transpose()))
    }

    pub fn source(&self) -> &MultiMatrixAlgebra {
        &self.source
    }

    pub fn target(&self) -> &MultiMatrixAlgebra {
        &self.target
    }

    /// Choi block `C_xy`.
    pub fn choi(&self, x: usize, y: usize) -> &CMatrix {
        &self.choi[x][y]
    }

    pub fn choi_blocks(&self) -> &[Vec<CMatrix>] {
        &self.choi
    }

    /// `F_xy(E_ij)` read off the Choi block.
    pub fn unit_image_block(&self, x: usize, y: usize, i: usize, j: usize) -> CMatrix {
        let m = self.target.block_size(x);
        self.choi[x][y].submatrix(i * m, j * m, m, m)
    }

    /// `F(E_u)` for a source matrix unit.
    pub fn apply_unit(&self, u: MatrixUnit) -> AlgebraElement {
        AlgebraElement::from_blocks_unchecked(
            (0..self.target.num_blocks()).map(|x| self.unit_image_block(x, u.block, u.row, u.col)).collect(),
        )
    }

    pub fn apply(&self, b: &AlgebraElement) -> AlgebraElement {
        assert_eq!(b.blocks().len(), self.source.num_blocks(), "channel applied to element of wrong algebra");
        let blocks = (0..self.target.num_blocks())
            .map(|x| {
                let m = self.target.block_size(x);
                let mut out = CMatrix::zeros(m, m);
                for y in 0..self.source.num_blocks() {
                    let n = self.source.block_size(y);
                    let c = &self.choi[x][y];
                    let by = b.block(y);
                    for i in 0..n {
                        for j in 0..n {
                            let w = by[(i, j)];
                            if w == ZERO {
                                continue;
                            }
                            for a in 0..m {
                                for bb in 0..m {
                                    out[(a, bb)] += w * c[(i * m + a, j * m + bb)];
                                }
                            }
                        }
                    }
                }
                out
            })
            .collect();
        AlgebraElement::from_blocks_unchecked(blocks)
    }

    /// Hilbert-Schmidt adjoint applied to a target element: `⟨F(B), A⟩ = ⟨B, F*(A)⟩`.
    pub fn apply_adjoint(&self, a: &AlgebraElement) -> AlgebraElement {
        assert_eq!(a.blocks().len(), self.target.num_blocks(), "adjoint applied to element of wrong algebra");
        let blocks = (0..self.source.num_blocks())
            .map(|y| {
                let n = self.source.block_size(y);
                let mut out = CMatrix::zeros(n, n);
                for x in 0..self.target.num_blocks() {
                    let m = self.target.block_size(x);
                    let c = &self.choi[x][y];
                    let ax = a.block(x);
                    for i in 0..n {
                        for j in 0..n {
                            let mut acc = ZERO;
                            for p in 0..m {
                                for q in 0..m {
                                    acc += c[(i * m + p, j * m + q)].conj() * ax[(p, q)];
                                }
                            }
                            out[(i, j)] += acc;
                        }
                    }
                }
                out
            })
            .collect();
        AlgebraElement::from_blocks_unchecked(blocks)
    }

    /// Hilbert-Schmidt adjoint as a map from the target back to the source.
    pub fn hs_adjoint(&self) -> Channel {
        let choi = (0..self.source.num_blocks())
            .map(|y| {
                (0..self.target.num_blocks())
                    .map(|x| swap_factors(&self.choi[x][y], self.source.block_size(y), self.target.block_size(x)).conj())
                    .collect()
            })
            .collect();
        Channel { source: self.target.clone(), target: self.source.clone(), choi }
    }

    /// `self ∘ g`.
    pub fn compose(&self, g: &Channel) -> Result<Channel> {
        if g.target != self.source {
            return Err(Error::DimensionMismatch("composition of maps with mismatched algebras".into()));
        }
        Ok(Channel::from_map(&g.source, &self.target, |c| self.apply(&g.apply(c))))
    }

    /// Entrywise linear combination `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Channel, b: f64) -> Result<Channel> {
        if self.source != other.source || self.target != other.target {
            return Err(Error::DimensionMismatch("combination of maps with different algebras".into()));
        }
        let choi = self
            .choi
            .iter()
            .zip(&other.choi)
            .map(|(r1, r2)| r1.iter().zip(r2).map(|(c1, c2)| &c1.scale_real(a) + &c2.scale_real(b)).collect())
            .collect();
        Ok(Channel { source: self.source.clone(), target: self.target.clone(), choi })
    }

    /// Largest Frobenius distance between corresponding Choi blocks.
    pub fn distance(&self, other: &Channel) -> f64 {
        self.choi
            .iter()
            .zip(&other.choi)
            .flat_map(|(r1, r2)| r1.iter().zip(r2).map(|(a, b)| a.distance(b)))
            .fold(0.0, f64::max)
    }

    pub fn is_ucp(&self, tol: &Tolerances) -> UcpVerdict {
        let mut cp = true;
        let mut min_rel = f64::INFINITY;
        let mut herm = 0.0f64;
        for row in &self.choi {
            for c in row {
                let scale = c.frobenius_norm();
                if scale == 0.0 {
                    min_rel = min_rel.min(0.0);
                    continue;
                }
                let h = c.hermiticity_residual();
                herm = herm.max(h);
                if h > tol.eps_eq {
                    cp = false;
                }
                match eigh(&c.hermitian_part()) {
                    Ok(e) => {
                        let rel = e.min_eigenvalue() / e.max_eigenvalue().abs().max(ABS_FLOOR);
                        min_rel = min_rel.min(rel);
                        if e.min_eigenvalue() < -e.rank_threshold(tol).max(ABS_FLOOR) {
                            cp = false;
                        }
                    }
                    Err(_) => cp = false,
                }
            }
        }
        let one = self.apply(&self.source.identity());
        let id = self.target.identity();
        let unital_residual = one.distance(&id) / id.frobenius_norm();
        UcpVerdict {
            cp,
            unital: unital_residual <= tol.eps_eq,
            min_relative_eigenvalue: if min_rel.is_finite() { min_rel } else { 0.0 },
            hermitian_residual: herm,
            unital_residual,
        }
    }

    /// Kraus operators per `(x, y)`, from the spectral decomposition of the Choi blocks.
    pub fn kraus(&self, tol: &Tolerances) -> Result<Vec<Vec<Vec<CMatrix>>>> {
        let mut out = Vec::with_capacity(self.target.num_blocks());
        for x in 0..self.target.num_blocks() {
            let m = self.target.block_size(x);
            let mut row = Vec::with_capacity(self.source.num_blocks());
            for y in 0..self.source.num_blocks() {
                let n = self.source.block_size(y);
                let e = eigh(&self.choi[x][y])?;
                let thr = e.rank_threshold(tol);
                if e.min_eigenvalue() < -thr.max(ABS_FLOOR) {
                    return Err(Error::NotCp { target: x, source_block: y, min_eigenvalue: e.min_eigenvalue() });
                }
                let mut ops = Vec::new();
                for (k, &lambda) in e.values.iter().enumerate() {
                    if lambda <= thr.max(ABS_FLOOR * ABS_FLOOR) {
                        continue;
                    }
                    let s = lambda.sqrt();
                    ops.push(CMatrix::from_fn(n, m, |i, a| (e.vectors[(i * m + a, k)] * s).conj()));
                }
                row.push(ops);
            }
            out.push(row);
        }
        Ok(out)
    }

    /// Minimal Stinespring dilation, one block per target factor.
    pub fn stinespring(&self, tol: &Tolerances) -> Result<Vec<StinespringBlock>> {
        let kraus = self.kraus(tol)?;
        let mut out = Vec::with_capacity(self.target.num_blocks());
        for (x, row) in kraus.iter().enumerate() {
            let m = self.target.block_size(x);
            let mults: Vec<usize> = row.iter().map(Vec::len).collect();
            let d: usize = mults.iter().zip(self.source.blocks()).map(|(r, n)| r * n).sum();
            if d == 0 {
                return Err(Error::NotUnital { residual: 1.0 });
            }
            let pi = HomSpec::new(self.source.clone(), MultiMatrixAlgebra::matrix(d), vec![mults])?;
            let mut v = CMatrix::zeros(d, m);
            let mut r0 = 0;
            for (y, ops) in row.iter().enumerate() {
                for k in ops {
                    v.set_submatrix(r0, 0, k);
                    r0 += self.source.block_size(y);
                }
            }
            out.push(StinespringBlock { pi, v });
        }
        Ok(out)
    }

    /// The state `ω ∘ F` on the source.
    pub fn pullback(&self, omega: &State, tol: &Tolerances) -> Result<State> {
        if omega.algebra() != &self.target {
            return Err(Error::DimensionMismatch("state does not live on the channel's target".into()));
        }
        let sigma = self.apply_adjoint(&omega.weighted_element());
        State::from_weighted_blocks(&self.source, sigma.into_blocks().into_iter().map(|b| b.hermitian_part()).collect(), tol)
    }
}

/// Dual-route verdict: both routes must agree unless both residuals sit inside the grey
/// zone `(eps_eq, sqrt(eps_eq)]`, where the primary route decides.
pub fn dual_verdict(what: &str, primary: f64, secondary: f64, tol: &Tolerances) -> Result<bool> {
    let p = primary <= tol.eps_eq;
    let s = secondary <= tol.eps_eq;
    if p != s && primary.max(secondary) > tol.eps_eq.sqrt() {
        return Err(Error::InternalInconsistency(format!(
            "{what}: routes disagree (primary residual {primary:.3e}, secondary {secondary:.3e})"
        )));
    }
    Ok(p)
}

/// `F =_ω G`: the maps agree on the support of `ω`, checked in pairing and null-space form.
pub fn ae_equal(f: &Channel, g: &Channel, omega: &State, tol: &Tolerances) -> Result<AeVerdict> {
    if f.source != g.source || f.target != g.target || omega.algebra() != &f.target {
        return Err(Error::DimensionMismatch("ae_equal: algebras do not match".into()));
    }
    let units = f.source.matrix_units();
    let rho = omega.weighted_element();
    let rows = par::map_range(units.len(), |k| {
        let fb = f.apply_unit(units[k]);
        let gb = g.apply_unit(units[k]);
        let scale = fb.frobenius_norm().max(gb.frobenius_norm());
        let d = fb.sub(&gb);
        let pairing = d.mul(&rho).blocks().iter().map(CMatrix::max_abs).fold(0.0, f64::max);
        let null = omega.evaluate(&d.adjoint().mul(&d)).re.max(0.0).sqrt();
        (pairing, null, scale)
    });
    let scale = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let pairing = Tolerances::relative(rows.iter().map(|r| r.0).fold(0.0, f64::max), scale);
    let null = Tolerances::relative(rows.iter().map(|r| r.1).fold(0.0, f64::max), scale);
    let holds = dual_verdict("ae_equal", null, pairing, tol)?;
    Ok(AeVerdict { holds, residual: null, pairing_residual: Some(pairing) })
}

/// Residual of `F(E_a E_b) P_ω = F(E_a) F(E_b) P_ω` over all source matrix-unit pairs.
pub fn ae_deterministic_residual(f: &Channel, omega: &State) -> f64 {
    let units = f.source.matrix_units();
    let images: Vec<AlgebraElement> = par::map_range(units.len(), |k| f.apply_unit(units[k]));
    let offsets: Vec<usize> = f
        .source
        .blocks()
        .iter()
        .scan(0, |acc, &n| {
            let o = *acc;
            *acc += n * n;
            Some(o)
        })
        .collect();
    let zero_target = f.target.zero();
    par::max_range(units.len(), |a| {
        let ua = units[a];
        let n = f.source.block_size(ua.block);
        let mut worst = 0.0f64;
        for (b, ub) in units.iter().enumerate() {
            let prod = if ua.block == ub.block && ua.col == ub.row {
                &images[offsets[ua.block] + ua.row * n + ub.col]
            } else {
                &zero_target
            };
            let x = prod.sub(&images[a].mul(&images[b]));
            worst = worst.max(omega.evaluate(&x.adjoint().mul(&x)).re.max(0.0).sqrt());
        }
        worst
    })
}

/// Whether `F` is multiplicative almost everywhere with respect to `ω`.
pub fn ae_deterministic(f: &Channel, omega: &State, tol: &Tolerances) -> Result<AeVerdict> {
    if omega.algebra() != &f.target {
        return Err(Error::DimensionMismatch("state does not live on the channel's target".into()));
    }
    let residual = ae_deterministic_residual(f, omega);
    Ok(AeVerdict { holds: residual <= tol.eps_eq, residual, pairing_residual: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn dephasing() -> Channel {
        let alg = MultiMatrixAlgebra::matrix(2);
        let k = vec![vec![vec![CMatrix::unit(2, 2, 0, 0), CMatrix::unit(2, 2, 1, 1)]]];
        Channel::from_kraus(&alg, &alg, &k).unwrap()
    }

    #[test]
    fn transpose_is_positive_but_not_cp() {
        let t = Channel::transpose_map(2);
        let v = t.is_ucp(&tol());
        assert!(v.unital && !v.cp);
        let e = eigh(t.choi(0, 0)).unwrap();
        assert!((e.min_eigenvalue() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn dephasing_kills_off_diagonals() {
        let f = dephasing();
        assert!(f.is_ucp(&tol()).holds());
        let alg = f.source().clone();
        let b = AlgebraElement::new(&alg, vec![CMatrix::from_real(2, 2, &[1., 2., 3., 4.]).unwrap()]).unwrap();
        assert_eq!(f.apply(&b).block(0), &CMatrix::from_real_diag(&[1.0, 4.0]));
    }

    #[test]
    fn hom_choi_matches_image() {
        let h = HomSpec::amplification(2, 2);
        let f = Channel::from_hom(&h);
        let b = AlgebraElement::new(h.source(), vec![CMatrix::from_real(2, 2, &[1., 2., 3., 4.]).unwrap()]).unwrap();
        assert!(f.apply(&b).distance(&h.apply(&b)) < 1e-15);
        assert_eq!(f.apply(&b).block(0), &kron(&CMatrix::identity(2), b.block(0)));
    }

    #[test]
    fn adjoint_matches_apply_adjoint() {
        let f = dephasing();
        let a = AlgebraElement::new(f.target(), vec![CMatrix::from_real(2, 2, &[1., 5., -3., 2.]).unwrap()]).unwrap();
        assert!(f.hs_adjoint().apply(&a).distance(&f.apply_adjoint(&a)) < 1e-15);
    }

    #[test]
    fn stinespring_of_dephasing_has_two_copies() {
        let st = dephasing().stinespring(&tol()).unwrap();
        assert_eq!(st[0].pi.mult(), &[vec![2]]);
        assert_eq!(st[0].v.shape(), (4, 2));
    }

    #[test]
    fn dephasing_is_not_deterministic_even_on_basis_state() {
        let f = dephasing();
        let alg = f.target().clone();
        let omega = State::pure(&alg, &[C64::new(1.0, 0.0), ZERO]).unwrap();
        assert!(!ae_deterministic(&f, &omega, &tol()).unwrap().holds);
        assert!(ae_deterministic(&Channel::identity(&alg), &State::tracial(&alg), &tol()).unwrap().holds);
    }

    #[test]
    fn maps_differing_off_support_are_ae_equal() {
        let alg = MultiMatrixAlgebra::matrix(2);
        let omega = State::pure(&alg, &[C64::new(1.0, 0.0), ZERO]).unwrap();
        let id = Channel::identity(&alg);
        let f = dephasing();
        let v = ae_equal(&id, &f, &omega, &tol()).unwrap();
        assert!(!v.holds);
        let g = Channel::from_map(&alg, &alg, |b| {
            let mut m = b.block(0).clone();
            m[(1, 1)] = m[(1, 1)] * 0.5 + m[(0, 0)] * 0.5;
            AlgebraElement::from_block(&alg, 0, m)
        });
        let v = ae_equal(&id, &g, &omega, &tol()).unwrap();
        assert!(v.holds, "{v:?}");
    }
}

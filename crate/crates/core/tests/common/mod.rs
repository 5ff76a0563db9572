//! Test-side oracles. They use nalgebra's dense routines and the defining formulas directly,
//! so they share no numerical code with the library beyond `apply` on matrix units.
#![allow(dead_code)]

use faer::{c64, Col, Mat, Side};
use nalgebra::{DMatrix, DVector};
use qbayes_core::algebra::{AlgebraElement, MatrixUnit};
use qbayes_core::channel::Channel;
use qbayes_core::linalg::{CMatrix, C64};
use qbayes_core::state::State;

pub type NMat = DMatrix<C64>;

pub fn to_na(m: &CMatrix) -> NMat {
    NMat::from_row_slice(m.rows(), m.cols(), m.data())
}

pub fn from_na(m: &NMat) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// `f(M)` for Hermitian `M`, applied to eigenvalues above `cut` and zero elsewhere.
pub fn herm_apply(m: &CMatrix, cut: f64, f: impl Fn(f64) -> f64) -> CMatrix {
    let e = to_na(m).symmetric_eigen();
    let n = m.rows();
    let mut d = NMat::zeros(n, n);
    for k in 0..n {
        if e.eigenvalues[k] > cut {
            d[(k, k)] = C64::new(f(e.eigenvalues[k]), 0.0);
        }
    }
    from_na(&(&e.eigenvectors * d * e.eigenvectors.adjoint()))
}

fn unit(block: usize, row: usize, col: usize) -> MatrixUnit {
    MatrixUnit { block, row, col }
}

/// `F*(A)` from `tr(F*(A) E_lk) = tr(A F(E_lk))`, i.e. `F*(A)_{kl} = tr(A F(E_lk))`.
pub fn adjoint_oracle(f: &Channel, a: &AlgebraElement) -> AlgebraElement {
    let src = f.source();
    let blocks = (0..src.num_blocks())
        .map(|y| {
            let n = src.block_size(y);
            CMatrix::from_fn(n, n, |k, l| a.mul(&f.apply_unit(unit(y, l, k))).trace())
        })
        .collect();
    AlgebraElement::new(src, blocks).unwrap()
}

/// Weighted density of `ω∘F`, from `σ_{lk} = ω(F(E_kl))`.
pub fn pullback_oracle(f: &Channel, omega: &State) -> AlgebraElement {
    let rho = omega.weighted_element();
    let src = f.source();
    let blocks = (0..src.num_blocks())
        .map(|y| {
            let n = src.block_size(y);
            CMatrix::from_fn(n, n, |l, k| rho.mul(&f.apply_unit(unit(y, k, l))).trace())
        })
        .collect();
    AlgebraElement::new(src, blocks).unwrap()
}

fn blockwise(a: &AlgebraElement, f: impl Fn(&CMatrix) -> CMatrix) -> AlgebraElement {
    let blocks: Vec<CMatrix> = a.blocks().iter().map(f).collect();
    AlgebraElement::new(&a.algebra(), blocks).unwrap()
}

/// The Petz map `A ↦ σ^{-1/2} F*(ρ^{1/2} A ρ^{1/2}) σ^{-1/2}` (inverses on supports).
pub fn petz_oracle(f: &Channel, omega: &State) -> Channel {
    let rho = omega.weighted_element();
    let sigma = pullback_oracle(f, omega);
    let rs = blockwise(&rho, |m| herm_apply(m, 1e-12, f64::sqrt));
    let si = blockwise(&sigma, |m| herm_apply(m, 1e-12, |l| 1.0 / l.sqrt()));
    Channel::from_map(f.target(), f.source(), |a| si.mul(&adjoint_oracle(f, &rs.mul(a).mul(&rs))).mul(&si))
}

/// `max |ξ(G(E_a) E_b) - ω(E_a F(E_b))|` over all pairs of matrix units, by direct evaluation.
pub fn pairing_oracle(f: &Channel, g: &Channel, omega: &State) -> f64 {
    let rho = omega.weighted_element();
    let sigma = pullback_oracle(f, omega);
    let mut worst = 0.0f64;
    for ua in f.target().matrix_units() {
        let ea = f.target().unit_element(ua);
        let ga = g.apply_unit(ua);
        for ub in f.source().matrix_units() {
            let eb = f.source().unit_element(ub);
            let lhs = sigma.mul(&ga.mul(&eb)).trace();
            let rhs = rho.mul(&ea.mul(&f.apply_unit(ub))).trace();
            worst = worst.max((lhs - rhs).norm());
        }
    }
    worst
}

/// Which family of UCP maps `G: A → B` the feasibility oracle searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// `ξ(G(A) B) = ω(A F(B))` for all `A, B`.
    BayesInverse,
    /// `ξ∘G = ω` and `G(F(B)) σ = B σ` for all `B`.
    Disintegration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    Infeasible,
    Undecided,
}

/// Outcome of the alternating-projection search.
#[derive(Debug, Clone, Copy)]
pub struct Feasibility {
    /// The linear constraints admit a solution at all.
    pub affine_consistent: bool,
    /// Final distance between the PSD iterate and the affine set.
    pub gap: f64,
    pub iterations: usize,
    /// The gap stopped shrinking while still large, the signature of disjoint sets.
    pub stalled: bool,
}

impl Feasibility {
    pub fn verdict(&self) -> Verdict {
        if !self.affine_consistent || self.stalled {
            Verdict::Infeasible
        } else if self.gap < 1e-8 {
            Verdict::Feasible
        } else {
            Verdict::Undecided
        }
    }
}

/// Searches for a CP unital `G: M_m → M_n` of the requested kind, for `F: M_n → M_m`.
///
/// The Choi matrix `C = Σ E_ij ⊗ G(E_ij)` of side `m·n` must be PSD and satisfy linear
/// equations. Alternating projections between the two convex sets converge to a common point
/// when one exists and otherwise stall at a positive gap; a stall is detected when the gap
/// stops decreasing.
pub fn feasibility(f: &Channel, omega: &State, target: Target, max_iterations: usize) -> Feasibility {
    let (a, rhs, d) = constraints(f, omega, target);
    let a = Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    let rhs = Col::<f64>::from_fn(rhs.len(), |i| rhs[i]);
    let pinv = pseudo_inverse(&a);
    let particular = &pinv * &rhs;
    let affine_consistent = (&a * &particular - &rhs).norm_l2() <= 1e-9 * rhs.norm_l2().max(1.0);
    let project_affine = |x: &Col<f64>| x - &pinv * (&a * x - &rhs);
    let project_psd = |x: &Col<f64>| {
        let z = |r: usize, c: usize| c64::new(x[2 * (r * d + c)], x[2 * (r * d + c) + 1]);
        let h = Mat::<c64>::from_fn(d, d, |r, c| (z(r, c) + z(c, r).conj()) * 0.5);
        let e = h.self_adjoint_eigen(Side::Lower).expect("Hermitian eigensolver converges");
        let (u, s) = (e.U(), e.S().column_vector());
        let scaled = Mat::<c64>::from_fn(d, d, |r, k| u[(r, k)] * s[k].re.max(0.0));
        let p = &scaled * u.adjoint();
        Col::<f64>::from_fn(2 * d * d, |k| {
            let v = p[((k / 2) / d, (k / 2) % d)];
            if k % 2 == 0 {
                v.re
            } else {
                v.im
            }
        })
    };
    let mut x = particular;
    let mut gap = f64::INFINITY;
    let mut checkpoint = f64::INFINITY;
    let mut it = 0;
    let mut stalled = false;
    while it < max_iterations && affine_consistent {
        let p = project_psd(&x);
        let q = project_affine(&p);
        gap = (&p - &q).norm_l2();
        x = q;
        it += 1;
        if gap < 1e-10 {
            break;
        }
        if it % 500 == 0 {
            if gap > 1e-6 && gap > 0.999 * checkpoint {
                stalled = true;
                break;
            }
            checkpoint = gap;
        }
    }
    Feasibility { affine_consistent, gap, iterations: it, stalled }
}

/// `V Σ⁺ Uᵀ` with singular values below `1e-10 σ_max` dropped. faer's SVD is used because
/// nalgebra's loses accuracy on these sparse, highly structured constraint matrices.
fn pseudo_inverse(a: &Mat<f64>) -> Mat<f64> {
    let svd = a.thin_svd().expect("SVD converges");
    let s = svd.S().column_vector();
    let top = (0..s.nrows()).map(|k| s[k]).fold(0.0, f64::max);
    let v = svd.V();
    let scaled = Mat::<f64>::from_fn(v.nrows(), v.ncols(), |r, k| if s[k] > 1e-10 * top { v[(r, k)] / s[k] } else { 0.0 });
    &scaled * svd.U().transpose()
}

type Equation = (Vec<(usize, usize, C64)>, C64);

/// Real form `A x = b` of the equations on the Choi matrix of `G`, with `C[i n + p][j n + q]
/// = G(E_ij)_{pq}`; also returns the Choi side.
pub fn constraints(f: &Channel, omega: &State, target: Target) -> (DMatrix<f64>, DVector<f64>, usize) {
    assert!(f.source().is_single_block() && f.target().is_single_block(), "single blocks only");
    let (n, m) = (f.source().block_size(0), f.target().block_size(0));
    let d = m * n;
    let rho = omega.weighted_block(0);
    let sigma = pullback_oracle(f, omega).block(0).clone();
    let one = C64::new(1.0, 0.0);
    let fu = |k: usize, l: usize| f.apply_unit(MatrixUnit { block: 0, row: k, col: l }).block(0).clone();
    let mut eqs: Vec<Equation> = Vec::new();
    for k in 0..n {
        for l in 0..n {
            let coef = (0..m).map(|i| (i * n + k, i * n + l, one)).collect();
            eqs.push((coef, if k == l { one } else { C64::new(0.0, 0.0) }));
        }
    }
    match target {
        Target::BayesInverse => {
            for a in 0..m {
                for b in 0..m {
                    for k in 0..n {
                        for l in 0..n {
                            // (σ G(E_ab))_{lk} = (F(E_kl) ρ)_{ba}.
                            let coef = (0..n).map(|p| (a * n + p, b * n + k, sigma[(l, p)])).collect();
                            let fkl = fu(k, l);
                            let rhs = (0..m).map(|q| fkl[(b, q)] * rho[(q, a)]).sum();
                            eqs.push((coef, rhs));
                        }
                    }
                }
            }
        }
        Target::Disintegration => {
            for a in 0..m {
                for b in 0..m {
                    // ξ(G(E_ab)) = Σ_pk σ_kp G(E_ab)_pk = ω(E_ab) = ρ_ba.
                    let coef = (0..n).flat_map(|p| (0..n).map(move |k| (p, k))).map(|(p, k)| (a * n + p, b * n + k, sigma[(k, p)]));
                    eqs.push((coef.collect(), rho[(b, a)]));
                }
            }
            for u in 0..n {
                for v in 0..n {
                    let fuv = fu(u, v);
                    for p in 0..n {
                        for k in 0..n {
                            // (G(F(E_uv)) σ)_{pk} = (E_uv σ)_{pk}.
                            let mut coef = Vec::new();
                            for a in 0..m {
                                for b in 0..m {
                                    for q in 0..n {
                                        coef.push((a * n + p, b * n + q, fuv[(a, b)] * sigma[(q, k)]));
                                    }
                                }
                            }
                            let rhs = if p == u { sigma[(v, k)] } else { C64::new(0.0, 0.0) };
                            eqs.push((coef, rhs));
                        }
                    }
                }
            }
        }
    }
    let mut a = DMatrix::<f64>::zeros(2 * eqs.len(), 2 * d * d);
    let mut rhs = DVector::<f64>::zeros(2 * eqs.len());
    for (e, (coef, b)) in eqs.iter().enumerate() {
        for &(r, c, z) in coef {
            let v = 2 * (r * d + c);
            a[(2 * e, v)] += z.re;
            a[(2 * e, v + 1)] -= z.im;
            a[(2 * e + 1, v)] += z.im;
            a[(2 * e + 1, v + 1)] += z.re;
        }
        rhs[2 * e] = b.re;
        rhs[2 * e + 1] = b.im;
    }
    (a, rhs, d)
}

/// `F(E_a E_b) P_ω = F(E_a) F(E_b) P_ω` over all pairs, as the largest defect times `ρ`.
pub fn ae_deterministic_oracle(f: &Channel, omega: &State) -> f64 {
    let rho = omega.weighted_element();
    let units = f.source().matrix_units();
    let mut worst = 0.0f64;
    for &ua in &units {
        for &ub in &units {
            let prod = f.source().unit_element(ua).mul(&f.source().unit_element(ub));
            let lhs = f.apply(&prod).mul(&rho);
            let rhs = f.apply_unit(ua).mul(&f.apply_unit(ub)).mul(&rho);
            worst = worst.max(lhs.distance(&rhs));
        }
    }
    worst
}

/// Largest of the four Moore–Penrose defects `MPM - M`, `PMP - P`, `(MP)* - MP`,
/// `(PM)* - PM`, each relative to the norm of the matrix it should reproduce (absolute when
/// that matrix is zero).
pub fn penrose_residual(m: &CMatrix, p: &CMatrix) -> f64 {
    let rel = |diff: CMatrix, reference: f64| {
        let d = diff.frobenius_norm();
        if reference > 0.0 {
            d / reference
        } else {
            d
        }
    };
    let mp = m * p;
    let pm = p * m;
    rel(&(&mp * m) - m, m.frobenius_norm())
        .max(rel(&(&pm * p) - p, p.frobenius_norm()))
        .max(rel(&mp - &mp.adjoint(), mp.frobenius_norm()))
        .max(rel(&pm - &pm.adjoint(), pm.frobenius_norm()))
}

/// `tr_1((τ ⊗ 1) A)` for `A` on `ℂ^c ⊗ ℂ^n`, summing the `c × c` grid of `n × n` blocks.
pub fn weighted_partial_trace(tau: &CMatrix, a: &CMatrix, c: usize, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |k, l| {
        let mut s = C64::new(0.0, 0.0);
        for i in 0..c {
            for j in 0..c {
                s += tau[(j, i)] * a[(i * n + k, j * n + l)];
            }
        }
        s
    })
}

/// Smallest Choi eigenvalue over all block pairs and the unitality defect `‖G(1) - 1‖`.
pub fn ucp_oracle(g: &Channel) -> (f64, f64) {
    let (src, tgt) = (g.source(), g.target());
    let mut min_eig = f64::INFINITY;
    for x in 0..src.num_blocks() {
        let m = src.block_size(x);
        for y in 0..tgt.num_blocks() {
            let n = tgt.block_size(y);
            let mut c = NMat::zeros(m * n, m * n);
            for i in 0..m {
                for j in 0..m {
                    let img = to_na(g.apply_unit(unit(x, i, j)).block(y));
                    c.view_mut((i * n, j * n), (n, n)).copy_from(&img);
                }
            }
            let h = (&c + c.adjoint()).scale(0.5);
            min_eig = min_eig.min(h.symmetric_eigen().eigenvalues.min());
        }
    }
    let one = AlgebraElement::identity(src);
    (min_eig, g.apply(&one).distance(&AlgebraElement::identity(tgt)))
}


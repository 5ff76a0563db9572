//! Seeded random matrices, states, channels and test instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algebra::{AlgebraElement, HomSpec, MultiMatrixAlgebra};
use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::linalg::{eigh, kron, CMatrix, C64};
use crate::state::State;
use crate::tol::Tolerances;

pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with independent standard complex Gaussian entries.
pub fn gaussian(rng: &mut Rng64, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Random positive semidefinite matrix `X X*` of the given rank.
pub fn random_psd(rng: &mut Rng64, dim: usize, rank: usize) -> CMatrix {
    let x = gaussian(rng, dim, rank);
    (&x * &x.adjoint()).hermitian_part()
}

/// Random density matrix of the given rank (at least one).
pub fn random_density(rng: &mut Rng64, dim: usize, rank: usize) -> CMatrix {
    let p = random_psd(rng, dim, rank.clamp(1, dim));
    let t = p.trace().re;
    p.scale_real(1.0 / t)
}

/// Haar-distributed unitary from Gram-Schmidt on a Gaussian matrix.
pub fn random_unitary(rng: &mut Rng64, n: usize) -> CMatrix {
    let g = gaussian(rng, n, n);
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = g.column(j);
        for u in &cols {
            let dot: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= dot * ui;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|z| z / norm).collect());
    }
    CMatrix::from_fn(n, n, |i, j| cols[j][i])
}

/// Random probability vector with strictly positive entries.
pub fn random_weights(rng: &mut Rng64, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Random state; `ranks[x] = 0` gives block `x` weight zero.
pub fn random_state(rng: &mut Rng64, alg: &MultiMatrixAlgebra, ranks: &[usize]) -> Result<State> {
    let w = random_weights(rng, alg.num_blocks());
    let total: f64 = w.iter().zip(ranks).filter(|(_, &r)| r > 0).map(|(w, _)| w).sum();
    if total == 0.0 {
        return Err(Error::InvalidState("every block has rank zero".into()));
    }
    let blocks = (0..alg.num_blocks())
        .map(|x| {
            let m = alg.block_size(x);
            if ranks[x] == 0 {
                CMatrix::zeros(m, m)
            } else {
                random_density(rng, m, ranks[x].min(m)).scale_real(w[x] / total)
            }
        })
        .collect();
    State::from_weighted_blocks(alg, blocks, &Tolerances::default())
}

pub fn random_faithful_state(rng: &mut Rng64, alg: &MultiMatrixAlgebra) -> State {
    random_state(rng, alg, alg.blocks()).expect("faithful ranks are positive")
}

/// Random unital channel with at least `k` Kraus operators per block pair.
///
/// The count is raised when needed so that `Σ K*K` is invertible.
pub fn random_channel(rng: &mut Rng64, source: &MultiMatrixAlgebra, target: &MultiMatrixAlgebra, k: usize) -> Channel {
    let total: usize = source.blocks().iter().sum();
    let widest = target.blocks().iter().copied().max().unwrap_or(1);
    let k = k.max(widest.div_ceil(total));
    let mut kraus: Vec<Vec<Vec<CMatrix>>> = (0..target.num_blocks())
        .map(|x| {
            (0..source.num_blocks())
                .map(|y| (0..k).map(|_| gaussian(rng, source.block_size(y), target.block_size(x))).collect())
                .collect()
        })
        .collect();
    normalise_kraus(&mut kraus);
    Channel::from_kraus(source, target, &kraus).expect("consistent Kraus shapes")
}

/// Rescales Kraus operators `K ↦ K S^{-1/2}` so that `Σ K*K = 1` per target block.
pub fn normalise_kraus(kraus: &mut [Vec<Vec<CMatrix>>]) {
    for row in kraus.iter_mut() {
        let m = row.iter().flatten().next().map(|k| k.cols()).unwrap_or(0);
        let mut s = CMatrix::zeros(m, m);
        for k in row.iter().flatten() {
            s += &(&k.adjoint() * k);
        }
        let e = eigh(&s.hermitian_part()).expect("Gram matrix is Hermitian");
        let inv_sqrt = e.apply_fn(|l| C64::new(1.0 / l.sqrt(), 0.0), |l| l > 0.0);
        for k in row.iter_mut().flatten() {
            *k = &*k * &inv_sqrt;
        }
    }
}

/// Random mixture of unitary conjugations on `M_n`; unital and trace preserving.
pub fn random_mixed_unitary(rng: &mut Rng64, n: usize, terms: usize) -> Channel {
    let alg = MultiMatrixAlgebra::matrix(n);
    let w = random_weights(rng, terms);
    let ops = w.iter().map(|&p| random_unitary(rng, n).scale_real(p.sqrt())).collect();
    Channel::from_kraus(&alg, &alg, &[vec![ops]]).expect("square Kraus operators")
}

/// `B ↦ U* B U` on `M_n`.
pub fn unitary_channel(u: &CMatrix) -> Channel {
    let alg = MultiMatrixAlgebra::matrix(u.rows());
    Channel::from_kraus(&alg, &alg, &[vec![vec![u.clone()]]]).expect("square Kraus operator")
}

/// Random standard-form homomorphism with multiplicities in `0..=max_mult`, every target row nonzero.
pub fn random_hom(rng: &mut Rng64, source: &MultiMatrixAlgebra, target_blocks: usize, max_mult: usize) -> HomSpec {
    let t = source.num_blocks();
    let mult: Vec<Vec<usize>> = (0..target_blocks)
        .map(|_| loop {
            let row: Vec<usize> = (0..t).map(|_| rng.gen_range(0..=max_mult)).collect();
            if row.iter().any(|&c| c > 0) {
                break row;
            }
        })
        .collect();
    let sizes = mult.iter().map(|row| row.iter().zip(source.blocks()).map(|(c, n)| c * n).sum()).collect();
    HomSpec::new(source.clone(), MultiMatrixAlgebra::new(sizes).expect("nonzero rows"), mult)
        .expect("sizes computed from the multiplicities")
}

/// Density `⊕_i ⊞_j q_j τ_ij ⊗ σ_j` on the target of `h`, which factors through `h`.
///
/// `tau_rank` bounds the rank of each `τ_ij`; `sigma_rank` that of each `σ_j`.
pub fn product_state(rng: &mut Rng64, h: &HomSpec, tau_rank: usize, sigma_rank: usize) -> State {
    let (src, tgt) = (h.source(), h.target());
    let q = random_weights(rng, src.num_blocks());
    let sigmas: Vec<CMatrix> =
        src.blocks().iter().map(|&n| random_density(rng, n, sigma_rank.clamp(1, n))).collect();
    let mut taus: Vec<Vec<Option<CMatrix>>> = vec![vec![None; src.num_blocks()]; tgt.num_blocks()];
    let mut col_mass = vec![0.0; src.num_blocks()];
    for (i, row) in taus.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            let c = h.mult()[i][j];
            if c > 0 {
                let t = random_psd(rng, c, tau_rank.clamp(1, c));
                col_mass[j] += t.trace().re;
                *slot = Some(t);
            }
        }
    }
    let kernel = h.kernel_blocks();
    let live: f64 = (0..src.num_blocks()).filter(|j| !kernel.contains(j)).map(|j| q[j]).sum();
    let blocks = (0..tgt.num_blocks())
        .map(|i| {
            let m = tgt.block_size(i);
            let mut out = CMatrix::zeros(m, m);
            for j in 0..src.num_blocks() {
                if let Some(t) = &taus[i][j] {
                    let off = h.offset(i, j);
                    let blk = kron(&t.scale_real(q[j] / live / col_mass[j]), &sigmas[j]);
                    out.set_submatrix(off, off, &blk);
                }
            }
            out
        })
        .collect();
    State::from_weighted_blocks(tgt, blocks, &Tolerances::default()).expect("unit total trace")
}

/// A channel, a state on its target and, for deterministic channels, the homomorphism.
#[derive(Debug, Clone)]
pub struct Instance {
    pub family: &'static str,
    pub channel: Channel,
    pub hom: Option<HomSpec>,
    pub omega: State,
}

impl Instance {
    fn new(family: &'static str, channel: Channel, omega: State) -> Self {
        Instance { family, channel, hom: None, omega }
    }

    fn from_hom(family: &'static str, h: HomSpec, omega: State) -> Self {
        Instance { family, channel: Channel::from_hom(&h), hom: Some(h), omega }
    }
}

/// Channel on a vector state `ψ` built from Kraus operators `a_k e_k ψ* + W_k Π`.
///
/// The `e_k` span a proper subspace `E ⊂ ℂ^n`, the `W_k` map into `E^⊥`, and `Π` is the
/// complement of `ψ`. Such a channel meets every battery condition; whether an inverse
/// exists depends on the `W_k`.
pub fn vector_state_channel(rng: &mut Rng64, n: usize, m: usize, d: usize) -> (Channel, State) {
    assert!(n >= 2 && m >= 2 && (1..n).contains(&d), "need 1 <= d < n and m >= 2");
    let src = MultiMatrixAlgebra::matrix(n);
    let tgt = MultiMatrixAlgebra::matrix(m);
    let psi = random_unitary(rng, m).column(0);
    let pi = &CMatrix::identity(m) - &CMatrix::outer(&psi, &psi);
    let basis = random_unitary(rng, n);
    let mut q_perp = CMatrix::identity(n);
    for k in 0..d {
        q_perp -= &CMatrix::outer(&basis.column(k), &basis.column(k));
    }
    let a = random_weights(rng, d);
    let s_att: f64 = rng.gen_range(0.2..1.0);
    let off = |rng: &mut Rng64| &(&q_perp * &gaussian(rng, n, m)) * &pi;
    let attached: Vec<CMatrix> = (0..d).map(|_| off(rng)).collect();
    let extra_count = (m - 1).div_ceil(n - d);
    let extra: Vec<CMatrix> = (0..extra_count).map(|_| off(rng)).collect();
    let gram_psd = |ws: &[CMatrix]| {
        let mut g = CMatrix::zeros(m, m);
        for w in ws {
            g += &(&w.adjoint() * w);
        }
        eigh(&g.hermitian_part()).expect("Gram matrix is Hermitian")
    };
    let ga = gram_psd(&attached);
    let cut_a = 1e-10 * ga.max_eigenvalue();
    let ga_is = ga.apply_fn(|l| C64::new(s_att / l.sqrt(), 0.0), |l| l > cut_a);
    let pa = ga.apply_fn(|_| C64::new(s_att * s_att, 0.0), |l| l > cut_a);
    let rest = eigh(&(&pi - &pa).hermitian_part()).expect("Hermitian");
    let rest_sqrt = rest.apply_fn(|l| C64::new(l.max(0.0).sqrt(), 0.0), |l| l > 1e-12);
    let ge = gram_psd(&extra);
    let cut_e = 1e-10 * ge.max_eigenvalue();
    let ge_is = ge.apply_fn(|l| C64::new(1.0 / l.sqrt(), 0.0), |l| l > cut_e);
    let mut ops: Vec<CMatrix> = attached
        .iter()
        .zip(&a)
        .enumerate()
        .map(|(k, (w, ak))| &CMatrix::outer(&basis.column(k), &psi).scale_real(ak.sqrt()) + &(w * &ga_is))
        .collect();
    ops.extend(extra.iter().map(|w| (w * &ge_is) * &rest_sqrt));
    let kraus = vec![vec![ops]];
    let f = Channel::from_kraus(&src, &tgt, &kraus).expect("consistent shapes");
    let omega = State::pure(&tgt, &psi).expect("unit vector");
    (f, omega)
}

/// Mixed ensemble over single-block instances, faithful and not, with and without inverses.
pub fn matrix_instance(rng: &mut Rng64, k: usize) -> Instance {
    let n = rng.gen_range(1..=3);
    let mult = rng.gen_range(1..=2);
    let m = rng.gen_range(2..=4);
    let kraus_terms = rng.gen_range(1..=3);
    match k % 9 {
        0 => {
            let m = rng.gen_range(1..=4);
            let (src, tgt) = (MultiMatrixAlgebra::matrix(n), MultiMatrixAlgebra::matrix(m));
            let f = random_channel(rng, &src, &tgt, kraus_terms);
            let omega = random_faithful_state(rng, &tgt);
            Instance::new("kraus-faithful", f, omega)
        }
        1 => {
            let (src, tgt) = (MultiMatrixAlgebra::matrix(n), MultiMatrixAlgebra::matrix(m));
            let f = random_channel(rng, &src, &tgt, kraus_terms);
            let r = rng.gen_range(1..m);
            let omega = random_state(rng, &tgt, &[r]).expect("positive rank");
            Instance::new("kraus-rank-deficient", f, omega)
        }
        2 => {
            let h = HomSpec::amplification(mult + 1, n);
            let (tr, sr) = (rng.gen_range(1..=mult + 1), rng.gen_range(1..=n));
            let omega = product_state(rng, &h, tr, sr);
            Instance::from_hom("hom-product", h, omega)
        }
        3 => {
            let u = random_unitary(rng, m);
            let tgt = MultiMatrixAlgebra::matrix(m);
            let r = rng.gen_range(1..=m);
            let omega = random_state(rng, &tgt, &[r]).expect("positive rank");
            Instance::new("unitary", unitary_channel(&u), omega)
        }
        4 => {
            let m = m.min(3);
            let terms = rng.gen_range(2..=3);
            let f = random_mixed_unitary(rng, m, terms);
            Instance::new("mixed-unitary-tracial", f, State::tracial(&MultiMatrixAlgebra::matrix(m)))
        }
        5 => {
            let (n, m) = (rng.gen_range(2..=3), rng.gen_range(2..=3));
            let d = rng.gen_range(1..n);
            let (f, omega) = vector_state_channel(rng, n, m, d);
            Instance::new("vector-state-structured", f, omega)
        }
        6 => {
            let m = m.min(3);
            let (src, tgt) = (MultiMatrixAlgebra::matrix(n), MultiMatrixAlgebra::matrix(m));
            let f = random_channel(rng, &src, &tgt, kraus_terms);
            let psi = gaussian(rng, m, 1).column(0);
            let omega = State::pure(&tgt, &psi).expect("nonzero vector");
            Instance::new("kraus-vector-state", f, omega)
        }
        7 => {
            let h = HomSpec::amplification(mult + 1, n.max(2));
            let tgt = h.target().clone();
            let omega = random_faithful_state(rng, &tgt);
            Instance::from_hom("hom-nonproduct", h, omega)
        }
        _ => {
            let h = HomSpec::amplification(2, n.max(2));
            let tgt = h.target().clone();
            let r = rng.gen_range(1..tgt.block_size(0));
            let omega = random_state(rng, &tgt, &[r]).expect("positive rank");
            Instance::from_hom("hom-rank-deficient", h, omega)
        }
    }
}

/// Multi-block instances: random homomorphisms with factorising or generic states, and
/// random channels between multi-matrix algebras.
pub fn multi_instance(rng: &mut Rng64, k: usize) -> Instance {
    let t = rng.gen_range(1..=2);
    let sizes: Vec<usize> = (0..t).map(|_| rng.gen_range(1..=2)).collect();
    let src = MultiMatrixAlgebra::new(sizes).expect("positive sizes");
    let target_blocks = rng.gen_range(1..=2);
    match k % 4 {
        0 | 1 => {
            let h = random_hom(rng, &src, target_blocks, 2);
            let (tr, sr) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
            let omega = product_state(rng, &h, tr, sr);
            Instance::from_hom("multi-hom-product", h, omega)
        }
        2 => {
            let h = random_hom(rng, &src, target_blocks, 2);
            let tgt = h.target().clone();
            let omega = random_faithful_state(rng, &tgt);
            Instance::from_hom("multi-hom-generic", h, omega)
        }
        _ => {
            let sizes: Vec<usize> = (0..target_blocks).map(|_| rng.gen_range(1..=2)).collect();
            let tgt = MultiMatrixAlgebra::new(sizes).expect("positive sizes");
            let f = random_channel(rng, &src, &tgt, 2);
            let omega = random_faithful_state(rng, &tgt);
            Instance::new("multi-kraus", f, omega)
        }
    }
}

/// Random element with Gaussian entries.
pub fn random_element(rng: &mut Rng64, alg: &MultiMatrixAlgebra) -> AlgebraElement {
    AlgebraElement::new(alg, alg.blocks().iter().map(|&m| gaussian(rng, m, m)).collect()).expect("matching shapes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_generation_is_reproducible() {
        let a = random_psd(&mut rng(7), 3, 2);
        let b = random_psd(&mut rng(7), 3, 2);
        assert_eq!(a, b);
    }

    #[test]
    fn random_channels_are_ucp() {
        let mut r = rng(1);
        let src = MultiMatrixAlgebra::new(vec![2, 1]).unwrap();
        let tgt = MultiMatrixAlgebra::new(vec![3]).unwrap();
        let f = random_channel(&mut r, &src, &tgt, 2);
        assert!(f.is_ucp(&Tolerances::default()).holds());
    }

    #[test]
    fn vector_state_channels_are_ucp() {
        let mut r = rng(11);
        for _ in 0..10 {
            let (f, omega) = vector_state_channel(&mut r, 3, 3, 2);
            assert!(f.is_ucp(&Tolerances::default()).holds());
            assert_eq!(omega.algebra(), f.target());
        }
    }

    #[test]
    fn unitary_is_unitary() {
        let u = random_unitary(&mut rng(3), 4);
        assert!((&u * &u.adjoint()).distance(&CMatrix::identity(4)) < 1e-12);
    }

    #[test]
    fn product_state_has_unit_trace() {
        let mut r = rng(5);
        let h = random_hom(&mut r, &MultiMatrixAlgebra::new(vec![1, 2]).unwrap(), 2, 2);
        let st = product_state(&mut r, &h, 2, 1);
        assert!((st.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

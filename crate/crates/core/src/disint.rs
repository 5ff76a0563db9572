//! Disintegrations of homomorphisms, state-preserving conditional expectations and the
//! support-corner form of Takesaki's theorem.
//!
//! For a unital *-homomorphism `F: ⊕_j M_{n_j} → ⊕_i M_{m_i}` in standard form and a state
//! `ω = Σ_i tr(ρ̃_i ·)` with weighted densities `ρ̃_i = p_i ρ_i`, a disintegration exists iff
//! every `ρ̃_i` is block diagonal along the image sub-blocks and each diagonal sub-block is a
//! product `q_j τ_ij ⊗ σ_j`.

use serde::Serialize;

use crate::algebra::{AlgebraElement, HomSpec};
use crate::bayesinv::{battery, existence};
use crate::channel::{ae_deterministic, ae_equal, dual_verdict, AeVerdict, Channel, UcpVerdict};
use crate::error::{Error, Result};
use crate::generate;
use crate::linalg::{eigh, herm_fun, kron, partial_trace_left, partial_trace_right, CMatrix, C64};
use crate::modular::{ac_on_corner, corner_map, AcAnalysis};
use crate::par;
use crate::state::State;
use crate::tol::Tolerances;

/// Factor data for one pair `(i, j)` with `c_ij > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub target_block: usize,
    pub source_block: usize,
    pub mult: usize,
    /// Unnormalised `τ_ij` with `tr(τ_ij) = λ_ij`.
    pub tau: CMatrix,
    pub lambda: f64,
    /// `tr(ρ̃_{i;jj}) / p_i`, zero when `p_i = 0`.
    pub mu: f64,
    /// Relative defect of `ρ̃_{i;jj} = q_j τ_ij ⊗ σ_j`.
    pub residual: f64,
}

/// Candidate tensor factorisation of the state along the image of a homomorphism.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationCertificate {
    pub pairs: Vec<FactorPair>,
    /// Pulled-back densities `σ_j`, absent when `q_j = 0`.
    pub sigma: Vec<Option<CMatrix>>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Largest off-diagonal sub-block `ρ̃_{i;uv}`, `u ≠ v`, relative to the state scale.
    pub off_diagonal_residual: f64,
    /// `max_j |Σ_i tr τ_ij - 1|`.
    pub trace_residual: f64,
    /// `max_i |Σ_j λ_ij q_j - p_i|`.
    pub lambda_residual: f64,
}

/// Verdict of [`factorize`]; the certificate is returned either way as the witness.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub holds: bool,
    /// `max_i ‖ρ̃_i - ⊞_j q_j τ_ij ⊗ σ_j‖` relative to `max_i ‖ρ̃_i‖`.
    pub residual: f64,
    pub certificate: FactorizationCertificate,
}

fn check_state(h: &HomSpec, omega: &State) -> Result<()> {
    if omega.algebra() != h.target() {
        return Err(Error::DimensionMismatch("state does not live on the homomorphism's target".into()));
    }
    Ok(())
}

fn state_scale(omega: &State) -> f64 {
    (0..omega.algebra().num_blocks()).map(|i| omega.weighted_block(i).frobenius_norm()).fold(0.0, f64::max)
}

fn sub_block(h: &HomSpec, a: &CMatrix, i: usize, u: usize, v: usize) -> CMatrix {
    let n = h.source().blocks();
    let m = h.mult();
    a.submatrix(h.offset(i, u), h.offset(i, v), m[i][u] * n[u], m[i][v] * n[v])
}

/// Largest off-diagonal sub-block `ρ̃_{i;uv}` over all target blocks.
fn off_diagonal(h: &HomSpec, omega: &State) -> f64 {
    let t = h.source().num_blocks();
    let mut worst = 0.0f64;
    for i in 0..h.target().num_blocks() {
        let r = omega.weighted_block(i);
        for u in 0..t {
            for v in 0..t {
                if u != v && h.mult()[i][u] > 0 && h.mult()[i][v] > 0 {
                    worst = worst.max(sub_block(h, &r, i, u, v).frobenius_norm());
                }
            }
        }
    }
    worst
}

/// Extracts `τ_ij = tr_n(ρ̃_{i;jj}) / q_j` and tests the product form of every block.
///
/// Source blocks with `q_j = 0` get the uniform choice `τ_ij = 1_{c_ij} / Σ_i c_ij`, which
/// keeps the resulting disintegration unital.
pub fn factorize(h: &HomSpec, omega: &State, tol: &Tolerances) -> Result<Factorization> {
    check_state(h, omega)?;
    let (s, t) = (h.target().num_blocks(), h.source().num_blocks());
    let n = h.source().blocks();
    let rho: Vec<CMatrix> = (0..s).map(|i| omega.weighted_block(i)).collect();
    let p: Vec<f64> = omega.weights().to_vec();
    let scale = state_scale(omega);

    let mut q = vec![0.0; t];
    let mut sig_w: Vec<CMatrix> = n.iter().map(|&nj| CMatrix::zeros(nj, nj)).collect();
    for i in 0..s {
        for j in 0..t {
            let c = h.mult()[i][j];
            if c > 0 {
                let d = sub_block(h, &rho[i], i, j, j);
                q[j] += d.trace().re;
                sig_w[j] += &partial_trace_left(&d, c, n[j]);
            }
        }
    }
    let live: Vec<bool> = q.iter().map(|&qj| qj > tol.eps_rank).collect();
    let sigma: Vec<Option<CMatrix>> =
        (0..t).map(|j| live[j].then(|| sig_w[j].scale_real(1.0 / q[j]).hermitian_part())).collect();

    let mut pairs = Vec::new();
    let mut residual = 0.0f64;
    for i in 0..s {
        let mut recon = CMatrix::zeros(rho[i].rows(), rho[i].cols());
        for j in 0..t {
            let c = h.mult()[i][j];
            if c == 0 {
                continue;
            }
            let d = sub_block(h, &rho[i], i, j, j);
            let tau = match &sigma[j] {
                Some(_) => partial_trace_right(&d, c, n[j]).scale_real(1.0 / q[j]).hermitian_part(),
                None => CMatrix::identity(c).scale_real(1.0 / h.column_sum(j) as f64),
            };
            let prod = match &sigma[j] {
                Some(sg) => kron(&tau, sg).scale_real(q[j]),
                None => CMatrix::zeros(c * n[j], c * n[j]),
            };
            let pair_res = Tolerances::relative(d.distance(&prod), scale);
            let off = h.offset(i, j);
            recon.set_submatrix(off, off, &prod);
            let lambda = tau.trace().re;
            let mu = if p[i] > 0.0 { d.trace().re / p[i] } else { 0.0 };
            pairs.push(FactorPair { target_block: i, source_block: j, mult: c, tau, lambda, mu, residual: pair_res });
        }
        residual = residual.max(Tolerances::relative(rho[i].distance(&recon), scale));
    }

    let trace_residual = (0..t)
        .filter(|&j| h.column_sum(j) > 0)
        .map(|j| (pairs.iter().filter(|pp| pp.source_block == j).map(|pp| pp.lambda).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let lambda_residual = (0..s)
        .map(|i| {
            let sum: f64 = pairs.iter().filter(|pp| pp.target_block == i).map(|pp| pp.lambda * q[pp.source_block]).sum();
            (sum - p[i]).abs()
        })
        .fold(0.0, f64::max);
    let off_diagonal_residual = Tolerances::relative(off_diagonal(h, omega), scale);
    let certificate =
        FactorizationCertificate { pairs, sigma, p, q, off_diagonal_residual, trace_residual, lambda_residual };
    Ok(Factorization { holds: residual <= tol.eps_eq, residual, certificate })
}

/// `G_j(A) = Σ_i tr_{c_ij}((τ_ij ⊗ 1) A_{i;jj})`, and `Σ_i tr(A_i) 1 / (s m_i)` on source blocks
/// outside the image.
pub fn build_disintegration(cert: &FactorizationCertificate, h: &HomSpec, tol: &Tolerances) -> Result<Channel> {
    let (s, t) = (h.target().num_blocks(), h.source().num_blocks());
    let consistent = cert.q.len() == t
        && cert.p.len() == s
        && cert.sigma.len() == t
        && cert.pairs.iter().all(|pp| {
            pp.target_block < s
                && pp.source_block < t
                && h.mult()[pp.target_block][pp.source_block] == pp.mult
                && pp.tau.shape() == (pp.mult, pp.mult)
        })
        && cert.pairs.len() == h.support_pairs().len();
    if !consistent {
        return Err(Error::InvalidCertificate("certificate does not match the homomorphism".into()));
    }
    if cert.trace_residual > tol.eps_eq {
        return Err(Error::InvalidCertificate(format!(
            "multiplicity weights do not sum to one (defect {:.3e})",
            cert.trace_residual
        )));
    }
    let kernel = h.kernel_blocks();
    let n = h.source().blocks().to_vec();
    let m = h.target().blocks().to_vec();
    let lifts: Vec<(usize, usize, usize, CMatrix)> = cert
        .pairs
        .iter()
        .map(|pp| (pp.target_block, pp.source_block, pp.mult, kron(&pp.tau, &CMatrix::identity(n[pp.source_block]))))
        .collect();
    Ok(Channel::from_map(h.target(), h.source(), |a| {
        let mut out: Vec<CMatrix> = n.iter().map(|&nj| CMatrix::zeros(nj, nj)).collect();
        for (i, j, c, lift) in &lifts {
            let d = sub_block(h, a.block(*i), *i, *j, *j);
            out[*j] += &partial_trace_left(&(lift * &d), *c, n[*j]);
        }
        for &j in &kernel {
            let w: C64 = (0..s).map(|i| a.block(i).trace() / (s * m[i]) as f64).sum();
            out[j] = CMatrix::identity(n[j]).scale(w);
        }
        AlgebraElement::from_blocks_unchecked(out)
    }))
}

/// Checks of a candidate disintegration `G` of `(F, ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisintegrationVerification {
    pub holds: bool,
    pub ucp: UcpVerdict,
    /// `‖ξ∘G - ω‖`.
    pub state_residual: f64,
    /// `G∘F = id` almost everywhere with respect to `ξ`.
    pub left_inverse: AeVerdict,
    /// `‖G∘F - id‖` on Choi blocks relative to the identity; zero for an optimal hypothesis.
    pub exact_residual: f64,
    /// `G∘F = id` exactly.
    pub optimal: bool,
}

pub fn verify_disintegration(f: &Channel, g: &Channel, omega: &State, tol: &Tolerances) -> Result<DisintegrationVerification> {
    if g.source() != f.target() || g.target() != f.source() {
        return Err(Error::DimensionMismatch("candidate disintegration has the wrong algebras".into()));
    }
    let xi = f.pullback(omega, tol)?;
    let ucp = g.is_ucp(tol);
    let state_residual = g.apply_adjoint(&xi.weighted_element()).distance(&omega.weighted_element());
    let gf = g.compose(f)?;
    let id = Channel::identity(f.source());
    let left_inverse = ae_equal(&gf, &id, &xi, tol)?;
    let id_norm = id.choi_blocks().iter().flatten().map(|c| c.frobenius_norm().powi(2)).sum::<f64>().sqrt();
    let exact_residual = Tolerances::relative(gf.distance(&id), id_norm);
    Ok(DisintegrationVerification {
        holds: ucp.holds() && state_residual <= tol.eps_eq && left_inverse.holds,
        ucp,
        state_residual,
        left_inverse,
        exact_residual,
        optimal: exact_residual <= tol.eps_eq,
    })
}

/// Properties of a conditional expectation `E` onto `F(B)`, tested on matrix units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectationChecks {
    pub holds: bool,
    pub ucp: UcpVerdict,
    /// `‖E∘E - E‖` on matrix units.
    pub idempotent_residual: f64,
    /// `‖E(F(B)) - F(B)‖` on source matrix units.
    pub fixes_image_residual: f64,
    /// `E(F(B)A) = F(B)E(A)` and `E(AF(B)) = E(A)F(B)` on matrix units.
    pub bimodular_residual: f64,
    /// `‖ω∘E - ω‖`.
    pub state_residual: f64,
    /// Largest `‖E(U)‖_op` over the identity and sampled unitaries; one for a norm-one projection.
    pub norm_estimate: f64,
}

/// Operator norm of a block-diagonal element.
fn op_norm(a: &AlgebraElement) -> f64 {
    a.blocks()
        .iter()
        .map(|b| eigh(&(&b.adjoint() * b)).map(|e| e.max_eigenvalue().max(0.0).sqrt()).unwrap_or(f64::NAN))
        .fold(0.0, f64::max)
}

const NORM_SAMPLES: usize = 8;
const NORM_SEED: u64 = 0x5eed;

pub fn check_expectation(e: &Channel, h: &HomSpec, omega: &State, tol: &Tolerances) -> Result<ExpectationChecks> {
    if e.source() != h.target() || e.target() != h.target() || omega.algebra() != h.target() {
        return Err(Error::DimensionMismatch("expectation must act on the homomorphism's target".into()));
    }
    let ucp = e.is_ucp(tol);
    let a_units = h.target().matrix_units();
    let b_units = h.source().matrix_units();
    let images: Vec<AlgebraElement> = a_units.iter().map(|&u| e.apply_unit(u)).collect();
    let fb: Vec<AlgebraElement> = b_units.iter().map(|&u| h.apply(&h.source().unit_element(u))).collect();

    let idempotent = par::max_range(a_units.len(), |k| e.apply(&images[k]).distance(&images[k]));
    let fixes = fb.iter().map(|x| e.apply(x).distance(x)).fold(0.0, f64::max);
    let bimodular = par::max_range(a_units.len(), |k| {
        let a = h.target().unit_element(a_units[k]);
        fb.iter()
            .map(|x| {
                let left = e.apply(&x.mul(&a)).distance(&x.mul(&images[k]));
                let right = e.apply(&a.mul(x)).distance(&images[k].mul(x));
                left.max(right)
            })
            .fold(0.0, f64::max)
    });
    let state_residual = e.apply_adjoint(&omega.weighted_element()).distance(&omega.weighted_element());

    let mut rng = generate::rng(NORM_SEED);
    let mut norm_estimate = op_norm(&e.apply(&h.target().identity()));
    for _ in 0..NORM_SAMPLES {
        let blocks = h.target().blocks().iter().map(|&m| generate::random_unitary(&mut rng, m)).collect();
        norm_estimate = norm_estimate.max(op_norm(&e.apply(&AlgebraElement::new(h.target(), blocks)?)));
    }

    let eps = tol.eps_eq;
    Ok(ExpectationChecks {
        holds: ucp.holds()
            && idempotent <= eps
            && fixes <= eps
            && bimodular <= eps
            && state_residual <= eps
            && (norm_estimate - 1.0).abs() <= eps,
        ucp,
        idempotent_residual: idempotent,
        fixes_image_residual: fixes,
        bimodular_residual: bimodular,
        state_residual,
        norm_estimate,
    })
}

/// Direct test of the conditions characterising `ω`-preserving conditional expectations.
#[derive(Debug, Clone)]
pub struct CondexpReport {
    pub holds: bool,
    /// Largest of the off-diagonal and product residuals.
    pub residual: f64,
    pub off_diagonal_residual: f64,
    /// Distance of each diagonal sub-block from `μ_ij p_i σ_j ⊗ τ_ij` (in the multiplicity-left
    /// layout `τ_ij ⊗ σ_j`), via the best Kronecker rank-one approximation.
    pub product_residual: f64,
    /// `mu[i][j]`, zero where `c_ij = 0`.
    pub mu: Vec<Vec<f64>>,
    /// `lambda[i][j]` with `E(P_i Q_j) = λ_ij Q_j`.
    pub lambda: Vec<Vec<f64>>,
    /// Normalised `τ_ij` for `c_ij > 0`.
    pub tau: Vec<Vec<Option<CMatrix>>>,
    pub sigma: Vec<Option<CMatrix>>,
    /// `max_i |Σ_j μ_ij - 1|` over `p_i > 0` and `max_j |Σ_i μ_ij p_i - q_j|`.
    pub mu_residual: f64,
    /// `max_j |Σ_i λ_ij - 1|` and `max_i |Σ_j λ_ij q_j - p_i|`.
    pub lambda_residual: f64,
    pub expectation: Option<Channel>,
    pub checks: Option<ExpectationChecks>,
}

/// Best Kronecker rank-one fit `X ≈ T ⊗ S` with `X` of side `c·n`.
///
/// Realigning `X` into the `c² × n²` matrix `R_{(ab),(kl)} = X_{(ak),(bl)}` turns products into
/// rank-one matrices. The fit uses the top eigenvector of `R R*` and reports `‖R - uu*R‖`
/// directly, so the residual is not limited by squaring.
fn kronecker_fit(x: &CMatrix, c: usize, n: usize) -> Result<(CMatrix, CMatrix, f64)> {
    let r = CMatrix::from_fn(c * c, n * n, |ab, kl| x[((ab / c) * n + kl / n, (ab % c) * n + kl % n)]);
    let e = eigh(&(&r * &r.adjoint()))?;
    let u = e.vectors.column(c * c - 1);
    let w: Vec<C64> = (0..n * n).map(|kl| (0..c * c).map(|ab| u[ab].conj() * r[(ab, kl)]).sum()).collect();
    let fit = CMatrix::outer(&u, &w.iter().map(|z| z.conj()).collect::<Vec<_>>());
    let t = CMatrix::from_fn(c, c, |a, b| u[a * c + b]);
    let s = CMatrix::from_fn(n, n, |k, l| w[k * n + l]);
    Ok((t, s, r.distance(&fit)))
}

pub fn condexp_characterize(h: &HomSpec, omega: &State, tol: &Tolerances) -> Result<CondexpReport> {
    check_state(h, omega)?;
    let (s, t) = (h.target().num_blocks(), h.source().num_blocks());
    let n = h.source().blocks();
    let scale = state_scale(omega);
    let xi = Channel::from_hom(h).pullback(omega, tol)?;
    let p = omega.weights();
    let q = xi.weights();
    let off_diagonal_residual = Tolerances::relative(off_diagonal(h, omega), scale);

    let mut mu = vec![vec![0.0; t]; s];
    let mut lambda = vec![vec![0.0; t]; s];
    let mut tau: Vec<Vec<Option<CMatrix>>> = vec![vec![None; t]; s];
    let mut product = 0.0f64;
    for i in 0..s {
        let r = omega.weighted_block(i);
        for j in 0..t {
            let c = h.mult()[i][j];
            if c == 0 {
                continue;
            }
            let d = sub_block(h, &r, i, j, j);
            let mass = d.trace().re;
            let uniform = CMatrix::identity(c).scale_real(1.0 / c as f64);
            if d.frobenius_norm() <= tol.eps_rank * scale {
                tau[i][j] = Some(uniform);
                continue;
            }
            let (tf, sf, fit) = kronecker_fit(&d, c, n[j])?;
            let (tt, ts) = (tf.trace(), sf.trace());
            let mut res = Tolerances::relative(fit, scale);
            if ts.norm() <= tol.eps_rank * sf.frobenius_norm() || tt.norm() <= tol.eps_rank * tf.frobenius_norm() {
                res = res.max(1.0);
            } else {
                let s_hat = sf.scale(ts.inv());
                res = match xi.density(j) {
                    Some(sg) => res.max(Tolerances::relative(s_hat.distance(sg) * mass, scale)),
                    None => res.max(1.0),
                };
                tau[i][j] = Some(tf.scale(tt.inv()).hermitian_part());
            }
            product = product.max(res);
            if p[i] > 0.0 {
                mu[i][j] = mass / p[i];
            }
        }
    }
    for j in 0..t {
        let col = h.column_sum(j);
        for i in 0..s {
            let c = h.mult()[i][j];
            if c == 0 {
                continue;
            }
            lambda[i][j] = if q[j] > tol.eps_rank {
                mu[i][j] * p[i] / q[j]
            } else {
                tau[i][j] = Some(CMatrix::identity(c).scale_real(1.0 / c as f64));
                c as f64 / col as f64
            };
        }
    }

    let mu_rows = (0..s).filter(|&i| p[i] > 0.0).map(|i| (mu[i].iter().sum::<f64>() - 1.0).abs());
    let mu_cols = (0..t).map(|j| ((0..s).map(|i| mu[i][j] * p[i]).sum::<f64>() - q[j]).abs());
    let mu_residual = mu_rows.chain(mu_cols).fold(0.0, f64::max);
    let l_cols = (0..t).filter(|&j| h.column_sum(j) > 0).map(|j| ((0..s).map(|i| lambda[i][j]).sum::<f64>() - 1.0).abs());
    let l_rows = (0..s).map(|i| ((0..t).map(|j| lambda[i][j] * q[j]).sum::<f64>() - p[i]).abs());
    let lambda_residual = l_cols.chain(l_rows).fold(0.0, f64::max);

    let residual = off_diagonal_residual.max(product);
    let holds = residual <= tol.eps_eq;
    let sigma = (0..t).map(|j| xi.density(j).cloned()).collect();
    let (expectation, checks) = if holds {
        let e = expectation_from_data(h, &lambda, &tau);
        let checks = check_expectation(&e, h, omega, tol)?;
        (Some(e), Some(checks))
    } else {
        (None, None)
    };
    Ok(CondexpReport {
        holds,
        residual,
        off_diagonal_residual,
        product_residual: product,
        mu,
        lambda,
        tau,
        sigma,
        mu_residual,
        lambda_residual,
        expectation,
        checks,
    })
}

/// `E(A) = F(Σ_ij λ_ij tr_{c_ij}((τ_ij ⊗ 1) A_{i;jj}))`.
fn expectation_from_data(h: &HomSpec, lambda: &[Vec<f64>], tau: &[Vec<Option<CMatrix>>]) -> Channel {
    let n = h.source().blocks().to_vec();
    let mut lifts = Vec::new();
    for (i, row) in tau.iter().enumerate() {
        for (j, tj) in row.iter().enumerate() {
            if let Some(tj) = tj {
                if lambda[i][j] > 0.0 {
                    lifts.push((i, j, tj.rows(), kron(&tj.scale_real(lambda[i][j]), &CMatrix::identity(n[j]))));
                }
            }
        }
    }
    Channel::from_map(h.target(), h.target(), |a| {
        let mut b: Vec<CMatrix> = n.iter().map(|&nj| CMatrix::zeros(nj, nj)).collect();
        for (i, j, c, lift) in &lifts {
            let d = sub_block(h, a.block(*i), *i, *j, *j);
            b[*j] += &partial_trace_left(&(lift * &d), *c, n[*j]);
        }
        h.apply(&AlgebraElement::from_blocks_unchecked(b))
    })
}

/// Several verdicts that a theorem says must coincide, each with the residual behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub holds: bool,
    pub residual: f64,
}

impl Verdict {
    fn new(residual: f64, tol: &Tolerances) -> Self {
        Verdict { holds: residual <= tol.eps_eq, residual }
    }

    /// Conjunction; a failing conjunction carries the largest failing residual.
    fn and(self, other: Verdict) -> Verdict {
        let holds = self.holds && other.holds;
        let residual = [self, other]
            .iter()
            .filter(|v| holds || !v.holds)
            .map(|v| v.residual)
            .fold(0.0, f64::max);
        Verdict { holds, residual }
    }
}

/// Returns whether the verdicts disagree only inside the grey zone; errors when a decisive
/// disagreement remains.
fn agree(what: &str, verdicts: &[(&str, Verdict)], tol: &Tolerances) -> Result<bool> {
    if verdicts.iter().all(|(_, v)| v.holds == verdicts[0].1.holds) {
        return Ok(false);
    }
    let grey = |r: f64| r > tol.eps_eq && r <= tol.eps_eq.sqrt();
    if verdicts.iter().any(|(_, v)| grey(v.residual)) {
        return Ok(true);
    }
    let listing: Vec<String> =
        verdicts.iter().map(|(name, v)| format!("{name}={} ({:.3e})", v.holds, v.residual)).collect();
    Err(Error::InternalInconsistency(format!("{what}: {}", listing.join(", "))))
}

/// The support-corner checks for a homomorphism.
#[derive(Debug, Clone, Serialize)]
pub struct TakesakiReport {
    /// `F^Q_R` is multiplicative on corner matrix units.
    pub corner_hom: Verdict,
    pub corner_ac: AcAnalysis,
    /// The corner Petz map is a disintegration of `(F^Q_R, ω_R)`.
    pub corner_disintegration: Verdict,
    /// A disintegration of `(F, ω)` exists.
    pub disintegration: Verdict,
    pub marginal: bool,
}

fn multiplicativity_residual(f: &Channel) -> f64 {
    let units = f.source().matrix_units();
    let images: Vec<AlgebraElement> = units.iter().map(|&u| f.apply_unit(u)).collect();
    let scale = images.iter().map(AlgebraElement::frobenius_norm).fold(0.0, f64::max);
    // Units are ordered by (block, row, col), so E_ik of block x sits at offset_x + i n_x + k.
    let mut offsets = Vec::with_capacity(f.source().num_blocks());
    let mut acc = 0;
    for &n in f.source().blocks() {
        offsets.push(acc);
        acc += n * n;
    }
    let diff = par::max_range(units.len(), |a| {
        let ua = units[a];
        let mut worst = 0.0f64;
        for (b, ub) in units.iter().enumerate() {
            let prod = images[a].mul(&images[b]);
            let d = if ua.block == ub.block && ua.col == ub.row {
                let n = f.source().block_size(ua.block);
                images[offsets[ua.block] + ua.row * n + ub.col].distance(&prod)
            } else {
                prod.frobenius_norm()
            };
            worst = worst.max(d);
        }
        worst
    });
    Tolerances::relative(diff, scale * scale.max(1.0))
}

/// `σ^{-1/2} F*(ρ^{1/2} A ρ^{1/2}) σ^{-1/2}` for faithful `ρ` on the target and `σ = ρ∘F`.
fn faithful_petz(f: &Channel, omega: &State, tol: &Tolerances) -> Result<Channel> {
    let xi = f.pullback(omega, tol)?;
    let pow = |st: &State, e: f64| -> Result<AlgebraElement> {
        let blocks = (0..st.algebra().num_blocks())
            .map(|x| herm_fun(&st.weighted_block(x), |l| C64::new(l.powf(e), 0.0), tol))
            .collect::<Result<Vec<_>>>()?;
        Ok(AlgebraElement::from_blocks_unchecked(blocks))
    };
    let rs = pow(omega, 0.5)?;
    let si = pow(&xi, -0.5)?;
    Ok(Channel::from_map(f.target(), f.source(), |a| si.mul(&f.apply_adjoint(&rs.mul(a).mul(&rs))).mul(&si)))
}

/// Corner homomorphism, corner covariance and corner disintegration, with the equivalences
/// `corner disintegration ⟺ full disintegration ⟺ (corner hom ∧ corner covariance)` enforced.
pub fn takesaki_battery(h: &HomSpec, omega: &State, tol: &Tolerances) -> Result<TakesakiReport> {
    let full = factorize(h, omega, tol)?;
    takesaki_with(h, omega, Verdict { holds: full.holds, residual: full.residual }, tol)
}

fn takesaki_with(h: &HomSpec, omega: &State, disintegration: Verdict, tol: &Tolerances) -> Result<TakesakiReport> {
    check_state(h, omega)?;
    let f = Channel::from_hom(h);
    let cm = corner_map(&f, omega, tol)?;
    let corner_hom = Verdict::new(multiplicativity_residual(&cm.map), tol);
    let corner_ac = ac_on_corner(&cm, tol)?;
    let petz = faithful_petz(&cm.map, cm.omega_r(), tol)?;
    let v = verify_disintegration(&cm.map, &petz, cm.omega_r(), tol)?;
    let corner_disintegration = Verdict {
        holds: v.holds,
        residual: v.left_inverse.residual.max(v.state_residual).max(v.ucp.unital_residual),
    };
    let ac = Verdict { holds: corner_ac.holds, residual: corner_ac.algebraic.residual };
    let marginal = agree(
        "corner form of Takesaki's theorem",
        &[
            ("disintegration", disintegration),
            ("corner-disintegration", corner_disintegration),
            ("corner-hom-and-ac", corner_hom.and(ac)),
        ],
        tol,
    )?;
    Ok(TakesakiReport { corner_hom, corner_ac, corner_disintegration, disintegration, marginal })
}

/// Full result of the disintegration analysis of a homomorphism.
#[derive(Debug, Clone)]
pub struct DisintegrationResult {
    pub exists: bool,
    pub factorization: Factorization,
    pub condexp: CondexpReport,
    pub disintegration: Option<Channel>,
    pub verification: Option<DisintegrationVerification>,
    /// `E = F∘G`.
    pub expectation: Option<Channel>,
    pub expectation_checks: Option<ExpectationChecks>,
    pub takesaki: TakesakiReport,
    pub marginal: bool,
}

/// Decides disintegrability by factorisation, cross-checks the conditional-expectation
/// characterisation and the corner battery, and constructs `G` and `E` when they exist.
pub fn disintegrate(h: &HomSpec, omega: &State, tol: &Tolerances) -> Result<DisintegrationResult> {
    let factorization = factorize(h, omega, tol)?;
    let condexp = condexp_characterize(h, omega, tol)?;
    let exists = dual_verdict("factorisation vs conditional expectation", factorization.residual, condexp.residual, tol)?;
    let takesaki =
        takesaki_with(h, omega, Verdict { holds: exists, residual: factorization.residual }, tol)?;
    let marginal = takesaki.marginal || (factorization.holds != condexp.holds);
    let (disintegration, verification, expectation, expectation_checks) = if exists {
        let g = build_disintegration(&factorization.certificate, h, tol)?;
        let f = Channel::from_hom(h);
        let v = verify_disintegration(&f, &g, omega, tol)?;
        if !v.holds {
            return Err(Error::InternalInconsistency(format!(
                "constructed disintegration fails verification (left inverse {:.3e}, state {:.3e})",
                v.left_inverse.residual, v.state_residual
            )));
        }
        let e = f.compose(&g)?;
        let checks = check_expectation(&e, h, omega, tol)?;
        (Some(g), Some(v), Some(e), Some(checks))
    } else {
        (None, None, None, None)
    };
    Ok(DisintegrationResult {
        exists,
        factorization,
        condexp,
        disintegration,
        verification,
        expectation,
        expectation_checks,
        takesaki,
        marginal,
    })
}

/// How the disintegration side of the bridge was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisintegrationRoute {
    /// Tensor factorisation of the state (homomorphisms only).
    Factorization,
    /// The constructed Bayesian inverse tested as a disintegration.
    Candidate,
}

/// Disintegrations versus Bayesian inverses plus almost-everywhere determinism.
#[derive(Debug, Clone, Serialize)]
pub struct BridgeReport {
    pub disintegration: Verdict,
    pub route: DisintegrationRoute,
    /// Verdict of the candidate route, reported alongside factorisation for homomorphisms.
    pub candidate: Verdict,
    pub bayes_inverse: Verdict,
    pub ae_deterministic: AeVerdict,
    pub marginal: bool,
}

/// Enforces `disintegration ⟺ (Bayesian inverse ∧ a.e. deterministic)`.
///
/// Every disintegration is a Bayesian inverse and Bayesian inverses agree almost everywhere,
/// so a disintegration exists iff the constructed inverse `G` satisfies `G∘F =_ξ id`. For
/// homomorphisms the factorisation test decides independently and must agree.
pub fn bayes_disint_bridge(f: &Channel, hom: Option<&HomSpec>, omega: &State, tol: &Tolerances) -> Result<BridgeReport> {
    if let Some(h) = hom {
        if Channel::from_hom(h).distance(f) > tol.eps_eq {
            return Err(Error::DimensionMismatch("homomorphism does not match the channel".into()));
        }
    }
    let analysis = battery(f, omega, tol)?;
    let ex = existence(&analysis, None, tol)?;
    let det = ae_deterministic(f, omega, tol)?;
    let slack = |margin: f64| if margin.is_finite() { (-margin).max(0.0) } else { 1.0 };
    let bayes_inverse = Verdict { holds: ex.exists, residual: slack(ex.margin) };
    let candidate = match &ex.inverse {
        Some(g) => {
            let v = verify_disintegration(f, g, omega, tol)?;
            Verdict { holds: v.holds, residual: v.left_inverse.residual }
        }
        None => Verdict { holds: false, residual: bayes_inverse.residual.max(tol.eps_eq.sqrt() * 2.0) },
    };
    let (disintegration, route) = match hom {
        Some(h) => {
            let fz = factorize(h, omega, tol)?;
            (Verdict { holds: fz.holds, residual: fz.residual }, DisintegrationRoute::Factorization)
        }
        None => (candidate, DisintegrationRoute::Candidate),
    };
    let det_v = Verdict { holds: det.holds, residual: det.residual };
    let mut marginal = analysis.marginal;
    marginal |= agree(
        "disintegration vs Bayesian inverse and determinism",
        &[("disintegration", disintegration), ("inverse-and-deterministic", bayes_inverse.and(det_v))],
        tol,
    )?;
    marginal |= agree("disintegration routes", &[("primary", disintegration), ("candidate", candidate)], tol)?;
    Ok(BridgeReport { disintegration, route, candidate, bayes_inverse, ae_deterministic: det, marginal })
}

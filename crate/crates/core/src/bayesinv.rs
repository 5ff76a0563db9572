//! Bayesian inverses of state-preserving channels.
//!
//! For `F: B → A` and a state `ω` on `A` with pullback `ξ = ω∘F`, a Bayesian inverse is a
//! channel `G: A → B` with `ξ(G(A)B) = ω(A F(B))`. Writing `ρ̃_x = p_x ρ_x` and
//! `σ̃_y = q_y σ_y`, the defining identity reads `σ̃_y G_yx(A) = F*_xy(ρ̃_x A)`, so the
//! rows of `G`'s Choi block lying in the support of `ξ` are fixed and only the block
//! `(1 ⊗ P^⊥) C (1 ⊗ P^⊥)` is free. Positivity of the completed Choi matrix reduces to a
//! Schur-complement inequality, which decides existence.

use serde::Serialize;

use crate::algebra::AlgebraElement;
use crate::channel::{ae_equal, AeVerdict, Channel, UcpVerdict};
use crate::error::{Error, Result};
use crate::linalg::{eigh, herm_fun_eig, kron, partial_trace_left, CMatrix, HermitianEigen, C64, ONE};
use crate::modular::{ac_condition, AcAnalysis};
use crate::par;
use crate::state::State;
use crate::tol::{Tolerances, ABS_FLOOR};

/// The seven equivalent conditions of the Bayes battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatteryCondition {
    /// `Ad_{P_ξ} ∘ G^R` is *-preserving.
    RightStarPreserving,
    /// `P_ξ G^L P_ξ = P_ξ G^R P_ξ`.
    LeftEqualsRight,
    /// The Choi matrix of `P_ξ G^L P_ξ` is Hermitian.
    ChoiHermitian,
    /// `P_ξ F*(ρ̃A) σ̃ = σ̃ F*(Aρ̃) P_ξ`.
    SourceIntertwining,
    /// `F(σ̃B) ρ̃ = ρ̃ F(Bσ̃)` on `P_ξ B P_ξ`.
    TargetIntertwining,
    /// `σ̃^+ F*(ρ̃ A P_ω^⊥) P_ξ = 0` together with corner modular covariance.
    SupportAndCovariance,
    /// `Ad_{P_ξ} ∘ G^R` is unital and completely positive.
    RightCornerUcp,
}

impl BatteryCondition {
    pub const ALL: [BatteryCondition; 7] = [
        BatteryCondition::RightStarPreserving,
        BatteryCondition::LeftEqualsRight,
        BatteryCondition::ChoiHermitian,
        BatteryCondition::SourceIntertwining,
        BatteryCondition::TargetIntertwining,
        BatteryCondition::SupportAndCovariance,
        BatteryCondition::RightCornerUcp,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatteryItem {
    pub condition: BatteryCondition,
    pub holds: bool,
    pub residual: f64,
}

/// Support data of the weighted density on one block.
#[derive(Debug, Clone)]
struct BlockData {
    dens: CMatrix,
    pinv: CMatrix,
    sqrt: CMatrix,
    pinv_sqrt: CMatrix,
    proj: CMatrix,
    perp: CMatrix,
    /// Isometry onto the support.
    range: CMatrix,
}

impl BlockData {
    fn new(dens: CMatrix, eig: &HermitianEigen, threshold: f64, tol: &Tolerances) -> Result<Self> {
        let keep = |l: f64| l > threshold;
        if eig.min_eigenvalue() < -eig.rank_threshold(tol).max(ABS_FLOOR) {
            return Err(Error::NegativeEigenvalue { value: eig.min_eigenvalue() });
        }
        let n = dens.rows();
        let proj = eig.apply_fn(|_| ONE, keep);
        Ok(BlockData {
            pinv: eig.apply_fn(|l| C64::new(1.0 / l, 0.0), keep),
            sqrt: eig.apply_fn(|l| C64::new(l.sqrt(), 0.0), keep),
            pinv_sqrt: eig.apply_fn(|l| C64::new(1.0 / l.sqrt(), 0.0), keep),
            perp: &CMatrix::identity(n) - &proj,
            range: eig.range_isometry(threshold),
            proj,
            dens,
        })
    }

    fn for_state(state: &State, tol: &Tolerances) -> Result<Vec<BlockData>> {
        let sd = state.support(tol)?;
        (0..state.algebra().num_blocks())
            .map(|x| BlockData::new(state.weighted_block(x), sd.eigen(x), sd.threshold(), tol))
            .collect()
    }
}

/// Choi pieces of a Bayesian inverse that are fixed by the data, for one block pair.
#[derive(Debug, Clone)]
pub struct PairChoi {
    /// `Σ_ab E_ab ⊗ σ̃^+ F*(ρ̃ E_ab) P_ξ`.
    pub a: CMatrix,
    /// `Σ_ab E_ab ⊗ σ̃^+ F*(ρ̃ E_ab) P_ξ^⊥`.
    pub b: CMatrix,
}

/// Everything the battery computes about `(F, ω)`.
#[derive(Debug, Clone)]
pub struct BayesAnalysis {
    f: Channel,
    omega: State,
    xi: State,
    rho: Vec<BlockData>,
    sigma: Vec<BlockData>,
    /// `pairs[y][x]` for `G_yx: M_{m_x} → M_{n_y}`.
    pairs: Vec<Vec<PairChoi>>,
    pub items: Vec<BatteryItem>,
    pub ac: AcAnalysis,
    /// All seven conditions hold.
    pub passes: bool,
    /// The conditions disagreed, but only inside the grey zone `(eps_eq, sqrt(eps_eq)]`.
    pub marginal: bool,
}

impl BayesAnalysis {
    pub fn channel(&self) -> &Channel {
        &self.f
    }

    pub fn omega(&self) -> &State {
        &self.omega
    }

    /// The pullback `ξ = ω∘F`.
    pub fn xi(&self) -> &State {
        &self.xi
    }

    pub fn pair(&self, y: usize, x: usize) -> &PairChoi {
        &self.pairs[y][x]
    }

    pub fn item(&self, c: BatteryCondition) -> &BatteryItem {
        self.items.iter().find(|i| i.condition == c).expect("all conditions present")
    }
}

/// Support-determined parts `P_ξ G^L` and `G^R P_ξ` of the left and right Bayes maps.
pub fn left_right_bayes(f: &Channel, omega: &State, tol: &Tolerances) -> Result<(Channel, Channel)> {
    let xi = f.pullback(omega, tol)?;
    let sigma = BlockData::for_state(&xi, tol)?;
    let rho_el = omega.weighted_element();
    let sig_pinv = AlgebraElement::from_blocks_unchecked(sigma.iter().map(|s| s.pinv.clone()).collect());
    let left = Channel::from_map(f.target(), f.source(), |a| sig_pinv.mul(&f.apply_adjoint(&rho_el.mul(a))));
    let right = Channel::from_map(f.target(), f.source(), |a| f.apply_adjoint(&a.mul(&rho_el)).mul(&sig_pinv));
    Ok((left, right))
}

fn check_channel(f: &Channel, omega: &State, tol: &Tolerances) -> Result<()> {
    if omega.algebra() != f.target() {
        return Err(Error::DimensionMismatch("state does not live on the channel's target".into()));
    }
    let v = f.is_ucp(tol);
    if !v.cp {
        return Err(Error::NotCp { target: 0, source_block: 0, min_eigenvalue: v.min_relative_eigenvalue });
    }
    if !v.unital {
        return Err(Error::NotUnital { residual: v.unital_residual });
    }
    Ok(())
}

/// Runs the seven-condition battery, requiring all conditions to agree.
pub fn battery(f: &Channel, omega: &State, tol: &Tolerances) -> Result<BayesAnalysis> {
    check_channel(f, omega, tol)?;
    let xi = f.pullback(omega, tol)?;
    let rho = BlockData::for_state(omega, tol)?;
    let sigma = BlockData::for_state(&xi, tol)?;
    let (s, t) = (f.target().num_blocks(), f.source().num_blocks());
    let ac = ac_condition(f, omega, tol)?;

    // Per-pair partial maxima: (diff, scale) for each condition.
    struct PairStats {
        choi: PairChoi,
        d: [(f64, f64); 7],
        a_r: CMatrix,
    }
    let idx: Vec<(usize, usize)> = (0..t).flat_map(|y| (0..s).map(move |x| (y, x))).collect();
    let stats: Vec<PairStats> = par::map_range(idx.len(), |k| {
        let (y, x) = idx[k];
        let (m, n) = (f.target().block_size(x), f.source().block_size(y));
        let (r, sg) = (&rho[x], &sigma[y]);
        let adj = |a: &CMatrix| -> CMatrix {
            f.apply_adjoint(&AlgebraElement::from_block(f.target(), x, a.clone())).block(y).clone()
        };
        let mut a_l = CMatrix::zeros(m * n, m * n);
        let mut b_l = CMatrix::zeros(m * n, m * n);
        let mut a_r = CMatrix::zeros(m * n, m * n);
        let mut d = [(0.0f64, 0.0f64); 7];
        let bump = |slot: &mut (f64, f64), diff: f64, scale: f64| {
            slot.0 = slot.0.max(diff);
            slot.1 = slot.1.max(scale);
        };
        let mut rights = vec![CMatrix::zeros(n, n); m * m];
        for a in 0..m {
            for b in 0..m {
                let e = CMatrix::unit(m, m, a, b);
                let fr_left = adj(&(&r.dens * &e));
                let fr_right = adj(&(&e * &r.dens));
                let l_full = &sg.pinv * &fr_left;
                let l = &l_full * &sg.proj;
                let rr = (&sg.proj * &fr_right) * &sg.pinv;
                a_l.set_submatrix(a * n, b * n, &l);
                b_l.set_submatrix(a * n, b * n, &(&l_full * &sg.perp));
                a_r.set_submatrix(a * n, b * n, &rr);
                bump(&mut d[1], l.distance(&rr), l.frobenius_norm().max(rr.frobenius_norm()));
                let lhs4 = (&sg.proj * &fr_left) * &sg.dens;
                let rhs4 = (&sg.dens * &fr_right) * &sg.proj;
                bump(&mut d[3], lhs4.distance(&rhs4), lhs4.frobenius_norm().max(rhs4.frobenius_norm()));
                let supp = (&sg.pinv * &adj(&(&(&r.dens * &e) * &r.perp))) * &sg.proj;
                bump(&mut d[5], supp.frobenius_norm(), l_full.frobenius_norm());
                rights[a * m + b] = rr;
            }
        }
        for a in 0..m {
            for b in 0..m {
                let (rab, rba) = (&rights[a * m + b], &rights[b * m + a]);
                bump(&mut d[0], rba.distance(&rab.adjoint()), rab.frobenius_norm());
            }
        }
        d[2] = (a_l.distance(&a_l.adjoint()), a_l.frobenius_norm());
        // Condition on the target side, over a basis of P_ξ B P_ξ.
        let w = &sg.range;
        let fx = |bm: &CMatrix| -> CMatrix {
            f.apply(&AlgebraElement::from_block(f.source(), y, bm.clone())).block(x).clone()
        };
        for k in 0..w.cols() {
            for l in 0..w.cols() {
                let bm = CMatrix::outer(&w.column(k), &w.column(l));
                let lhs = fx(&(&sg.dens * &bm)) * &r.dens;
                let rhs = &r.dens * &fx(&(&bm * &sg.dens));
                bump(&mut d[4], lhs.distance(&rhs), lhs.frobenius_norm().max(rhs.frobenius_norm()));
            }
        }
        PairStats { choi: PairChoi { a: a_l, b: b_l }, d, a_r }
    });

    let fold = |c: usize| {
        let diff = stats.iter().map(|p| p.d[c].0).fold(0.0, f64::max);
        let scale = stats.iter().map(|p| p.d[c].1).fold(0.0, f64::max);
        Tolerances::relative(diff, scale)
    };
    let mut residuals = [0.0f64; 7];
    for (c, r) in residuals.iter_mut().enumerate().take(6) {
        *r = fold(c);
    }
    residuals[5] = residuals[5].max(ac.algebraic.residual);

    // Unital completely positive right corner map.
    let mut herm = 0.0f64;
    let mut neg = 0.0f64;
    let max_eig = stats
        .iter()
        .map(|p| eigh(&p.a_r.hermitian_part()).map(|e| (e.min_eigenvalue(), e.max_eigenvalue())))
        .collect::<Result<Vec<_>>>()?;
    let top = max_eig.iter().map(|e| e.1.abs()).fold(0.0, f64::max);
    for (p, (lo, _)) in stats.iter().zip(&max_eig) {
        herm = herm.max(Tolerances::relative(p.a_r.distance(&p.a_r.adjoint()), p.a_r.frobenius_norm()));
        neg = neg.max(Tolerances::relative((-lo).max(0.0), top));
    }
    let mut unital = 0.0f64;
    for y in 0..t {
        let n = f.source().block_size(y);
        let mut sum = CMatrix::zeros(n, n);
        for x in 0..s {
            let p = &stats[y * s + x].a_r;
            sum += &partial_trace_left(p, f.target().block_size(x), n);
        }
        unital = unital.max(sum.distance(&sigma[y].proj));
    }
    residuals[6] = herm.max(if neg > tol.eps_rank { neg } else { 0.0 }).max(unital);

    let items: Vec<BatteryItem> = BatteryCondition::ALL
        .iter()
        .zip(residuals)
        .map(|(&condition, residual)| BatteryItem { condition, holds: residual <= tol.eps_eq, residual })
        .collect();
    let passes = items.iter().all(|i| i.holds);
    let any = items.iter().any(|i| i.holds);
    let mut marginal = false;
    if any && !passes {
        let failing_max = items.iter().filter(|i| !i.holds).map(|i| i.residual).fold(0.0, f64::max);
        if failing_max > tol.eps_eq.sqrt() {
            let report: Vec<String> = items.iter().map(|i| format!("{:?}={:.2e}", i.condition, i.residual)).collect();
            return Err(Error::InternalInconsistency(format!("Bayes battery disagrees: {}", report.join(", "))));
        }
        marginal = true;
    }

    let mut pairs: Vec<Vec<PairChoi>> = (0..t).map(|_| Vec::with_capacity(s)).collect();
    for (k, p) in stats.into_iter().enumerate() {
        pairs[idx[k].0].push(p.choi);
    }
    Ok(BayesAnalysis { f: f.clone(), omega: omega.clone(), xi, rho, sigma, pairs, items, ac, passes, marginal })
}

/// Pairing, state-preservation and positivity checks of a candidate Bayesian inverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BayesVerification {
    pub holds: bool,
    /// `max |ξ(G(A)B) - ω(A F(B))|` over matrix-unit pairs.
    pub pairing_residual: f64,
    /// `‖ξ∘G - ω‖`.
    pub state_residual: f64,
    pub ucp: UcpVerdict,
}

/// Brute-force check of the Bayes pairing over every pair of matrix units.
pub fn bayes_pairing_residual(f: &Channel, g: &Channel, omega: &State, xi: &State) -> f64 {
    let a_units = f.target().matrix_units();
    let b_units = f.source().matrix_units();
    let sig = xi.weighted_element();
    let rho = omega.weighted_element();
    let fb: Vec<AlgebraElement> = b_units.iter().map(|&u| f.apply_unit(u).mul(&rho)).collect();
    par::max_range(a_units.len(), |i| {
        let ua = a_units[i];
        let sg = sig.mul(&g.apply_unit(ua));
        let mut worst = 0.0f64;
        for (ub, fr) in b_units.iter().zip(&fb) {
            // ξ(G(E_ab) E_kl) = (σ̃ G(E_ab))_lk and ω(E_ab F(E_kl)) = (F(E_kl) ρ̃)_ba.
            let lhs = sg.block(ub.block)[(ub.col, ub.row)];
            let rhs = fr.block(ua.block)[(ua.col, ua.row)];
            worst = worst.max((lhs - rhs).norm());
        }
        worst
    })
}

pub fn verify_bayes(f: &Channel, g: &Channel, omega: &State, tol: &Tolerances) -> Result<BayesVerification> {
    if g.source() != f.target() || g.target() != f.source() {
        return Err(Error::DimensionMismatch("candidate inverse has the wrong algebras".into()));
    }
    let xi = f.pullback(omega, tol)?;
    let pairing_residual = bayes_pairing_residual(f, g, omega, &xi);
    let state_residual = g.apply_adjoint(&xi.weighted_element()).distance(&omega.weighted_element());
    let ucp = g.is_ucp(tol);
    Ok(BayesVerification {
        holds: pairing_residual <= tol.eps_eq && state_residual <= tol.eps_eq && ucp.holds(),
        pairing_residual,
        state_residual,
        ucp,
    })
}

/// Outcome of the existence test and, when it succeeds, the constructed inverse.
#[derive(Debug, Clone)]
pub struct Existence {
    pub exists: bool,
    /// Smallest eigenvalue of `P_ξ^⊥ - T_y` over source blocks (zero for a faithful `ξ`).
    pub margin: f64,
    pub inverse: Option<Channel>,
    pub verification: Option<BayesVerification>,
}

/// Decides whether a Bayesian inverse exists and constructs one.
///
/// With `A = Σ E_ab ⊗ σ̃^+F*(ρ̃E_ab)P_ξ` and `B` the `P_ξ^⊥` columns, an inverse exists iff
/// `Σ_x tr_A(B* A^+ B) ≤ P_ξ^⊥` on every source block. The free block is filled with
/// `B* A^+ B + ν̃_xᵀ ⊗ Δ_y`, where `Δ_y` is the slack and `ν` the filler state on the target
/// (tracial by default).
pub fn existence(analysis: &BayesAnalysis, filler: Option<&State>, tol: &Tolerances) -> Result<Existence> {
    if !analysis.passes {
        return Ok(Existence { exists: false, margin: f64::NEG_INFINITY, inverse: None, verification: None });
    }
    let f = &analysis.f;
    let (s, t) = (f.target().num_blocks(), f.source().num_blocks());
    let tracial;
    let nu = match filler {
        Some(st) => {
            if st.algebra() != f.target() {
                return Err(Error::DimensionMismatch("filler state must live on the channel's target".into()));
            }
            st
        }
        None => {
            tracial = State::tracial(f.target());
            &tracial
        }
    };
    let mut margin = f64::INFINITY;
    let mut exists = true;
    let mut choi: Vec<Vec<CMatrix>> = Vec::with_capacity(t);
    for y in 0..t {
        let n = f.source().block_size(y);
        let mut schur = Vec::with_capacity(s);
        let mut total = CMatrix::zeros(n, n);
        for x in 0..s {
            let m = f.target().block_size(x);
            let pc = &analysis.pairs[y][x];
            let a_h = pc.a.hermitian_part();
            let eig = eigh(&a_h)?;
            let a_pinv = herm_fun_eig(&eig, |l| C64::new(1.0 / l, 0.0), tol)
                .map_err(|_| Error::InternalInconsistency("fixed Choi corner is not positive".into()))?;
            let d_min = ((&pc.b.adjoint() * &a_pinv) * &pc.b).hermitian_part();
            total += &partial_trace_left(&d_min, m, n);
            schur.push((a_h, d_min));
        }
        let slack = (&analysis.sigma[y].perp - &total).hermitian_part();
        let e = eigh(&slack)?;
        let scale = e.max_eigenvalue().abs().max(1.0);
        margin = margin.min(e.min_eigenvalue());
        if e.min_eigenvalue() < -tol.eps_rank.max(ABS_FLOOR) * scale {
            exists = false;
        }
        let row = schur
            .into_iter()
            .enumerate()
            .map(|(x, (a_h, d_min))| {
                let pc = &analysis.pairs[y][x];
                let fill = kron(&nu.weighted_block(x).transpose(), &slack);
                let mut c = &a_h + &pc.b;
                c += &pc.b.adjoint();
                c += &d_min;
                c += &fill;
                c
            })
            .collect();
        choi.push(row);
    }
    if !exists {
        return Ok(Existence { exists, margin, inverse: None, verification: None });
    }
    let g = Channel::from_choi(f.target().clone(), f.source().clone(), choi)?;
    let verification = verify_bayes(f, &g, &analysis.omega, tol)?;
    if !verification.holds {
        return Err(Error::ExtensionFailure {
            residual: verification
                .pairing_residual
                .max(verification.state_residual)
                .max(verification.ucp.unital_residual)
                .max(-verification.ucp.min_relative_eigenvalue),
        });
    }
    Ok(Existence { exists, margin, inverse: Some(g), verification: Some(verification) })
}

/// `A ↦ σ̃^{-1/2} F*(ρ̃^{1/2} A ρ̃^{1/2}) σ̃^{-1/2}`, optionally completed off the support by
/// `A ↦ ν(A) P_ξ^⊥` with the tracial state `ν`.
pub fn petz_map(analysis: &BayesAnalysis, extend: bool) -> Channel {
    let f = &analysis.f;
    let rho_sqrt = AlgebraElement::from_blocks_unchecked(analysis.rho.iter().map(|b| b.sqrt.clone()).collect());
    let sig_is = AlgebraElement::from_blocks_unchecked(analysis.sigma.iter().map(|b| b.pinv_sqrt.clone()).collect());
    let perp = AlgebraElement::from_blocks_unchecked(analysis.sigma.iter().map(|b| b.perp.clone()).collect());
    let nu = State::tracial(f.target());
    Channel::from_map(f.target(), f.source(), |a| {
        let core = sig_is.mul(&f.apply_adjoint(&rho_sqrt.mul(a).mul(&rho_sqrt))).mul(&sig_is);
        if extend {
            core.add(&perp.scale(nu.evaluate(a)))
        } else {
            core
        }
    })
}

/// Largest distance between the Petz map and the fixed corner `P_ξ G P_ξ` of any inverse.
pub fn petz_corner_residual(analysis: &BayesAnalysis) -> f64 {
    let petz = petz_map(analysis, false);
    let f = &analysis.f;
    let mut worst = 0.0f64;
    for y in 0..f.source().num_blocks() {
        for x in 0..f.target().num_blocks() {
            let p = petz.choi(y, x);
            let a = &analysis.pairs[y][x].a;
            worst = worst.max(Tolerances::relative(p.distance(a), a.frobenius_norm().max(p.frobenius_norm())));
        }
    }
    worst
}

/// Checks of the category structure of Bayesian inversion on `C --G--> B --F--> A`.
#[derive(Debug, Clone, Serialize)]
pub struct CompositionalityReport {
    /// The identity is its own inverse.
    pub identity_residual: f64,
    /// Pairing residual of `Ḡ ∘ F̄` against `F ∘ G`.
    pub composite: Option<BayesVerification>,
    /// Directly constructed inverse of `F ∘ G` versus `Ḡ ∘ F̄`, a.e. on the source of `G`.
    pub ae_equal: Option<AeVerdict>,
    /// Largest Choi distance between those two inverses.
    pub exact_distance: Option<f64>,
}

pub fn compositionality_check(
    f: &Channel,
    g: &Channel,
    omega: &State,
    tol: &Tolerances,
) -> Result<CompositionalityReport> {
    let id = Channel::identity(f.target());
    let identity_residual = verify_bayes(&id, &id, omega, tol)?.pairing_residual;
    let fg = f.compose(g)?;
    let xi = f.pullback(omega, tol)?;
    let zeta = fg.pullback(omega, tol)?;
    let fbar = existence(&battery(f, omega, tol)?, None, tol)?.inverse;
    let gbar = existence(&battery(g, &xi, tol)?, None, tol)?.inverse;
    let direct = existence(&battery(&fg, omega, tol)?, None, tol)?.inverse;
    let (composite, ae, exact) = match (fbar, gbar) {
        (Some(fbar), Some(gbar)) => {
            let comp = gbar.compose(&fbar)?;
            let v = verify_bayes(&fg, &comp, omega, tol)?;
            let (ae, exact) = match &direct {
                Some(h) => (Some(ae_equal(h, &comp, &zeta, tol)?), Some(h.distance(&comp))),
                None => (None, None),
            };
            (Some(v), ae, exact)
        }
        _ => (None, None, None),
    };
    Ok(CompositionalityReport { identity_residual, composite, ae_equal: ae, exact_distance: exact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{HomSpec, MultiMatrixAlgebra};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn product_fixture() -> (Channel, State) {
        let h = HomSpec::amplification(2, 2);
        let rho = kron(&CMatrix::from_real_diag(&[0.3, 0.7]), &CMatrix::from_real_diag(&[0.6, 0.4]));
        let omega = State::new(h.target(), vec![1.0], vec![Some(rho)], &tol()).unwrap();
        (Channel::from_hom(&h), omega)
    }

    #[test]
    fn product_inclusion_has_an_inverse() {
        let (f, omega) = product_fixture();
        let an = battery(&f, &omega, &tol()).unwrap();
        assert!(an.passes && !an.marginal);
        let ex = existence(&an, None, &tol()).unwrap();
        assert!(ex.exists);
        let g = ex.inverse.unwrap();
        assert!(verify_bayes(&f, &g, &omega, &tol()).unwrap().holds);
        assert!(petz_corner_residual(&an) < 1e-12);
    }

    #[test]
    fn identity_is_its_own_inverse() {
        let alg = MultiMatrixAlgebra::new(vec![2, 1]).unwrap();
        let omega = State::tracial(&alg);
        let id = Channel::identity(&alg);
        let an = battery(&id, &omega, &tol()).unwrap();
        let g = existence(&an, None, &tol()).unwrap().inverse.unwrap();
        assert!(g.distance(&id) < 1e-12);
    }

    #[test]
    fn left_right_maps_satisfy_their_pairings() {
        let (f, omega) = product_fixture();
        let (gl, gr) = left_right_bayes(&f, &omega, &tol()).unwrap();
        let xi = f.pullback(&omega, &tol()).unwrap();
        for ua in f.target().matrix_units() {
            let a = f.target().unit_element(ua);
            for ub in f.source().matrix_units() {
                let b = f.source().unit_element(ub);
                let fb = f.apply(&b);
                let l = xi.evaluate(&gl.apply(&a).mul(&b)) - omega.evaluate(&a.mul(&fb));
                let r = xi.evaluate(&b.mul(&gr.apply(&a))) - omega.evaluate(&fb.mul(&a));
                assert!(l.norm() < 1e-14 && r.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn non_cp_input_rejected() {
        let t = Channel::transpose_map(2);
        let omega = State::tracial(t.target());
        assert!(matches!(battery(&t, &omega, &tol()), Err(Error::NotCp { .. })));
    }
}

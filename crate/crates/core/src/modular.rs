//! Modular flows, corner maps between support algebras and the modular-covariance test.

use serde::Serialize;

use crate::algebra::AlgebraElement;
use crate::channel::{dual_verdict, Channel};
use crate::error::Result;
use crate::linalg::{CMatrix, HermitianEigen, C64};
use crate::par;
use crate::state::{State, SupportData};
use crate::tol::Tolerances;

/// Times at which the sampled covariance test compares the two flows.
pub const T_SAMPLES: [f64; 7] = [0.5, -0.5, 1.0, -1.0, 2.0, -2.0, std::f64::consts::PI];

/// Modular flow `m^t(A) = ρ^{it} A ρ^{-it}`, with the powers restricted to the support.
#[derive(Debug, Clone)]
pub struct ModularFlow {
    eigen: Vec<HermitianEigen>,
    threshold: f64,
}

impl ModularFlow {
    pub fn new(omega: &State, tol: &Tolerances) -> Result<Self> {
        let sd = omega.support(tol)?;
        Ok(ModularFlow {
            eigen: (0..omega.algebra().num_blocks()).map(|x| sd.eigen(x).clone()).collect(),
            threshold: sd.threshold(),
        })
    }

    /// `(p_x ρ_x)^{it}` on the support of block `x`, zero elsewhere.
    pub fn unitary(&self, x: usize, t: f64) -> CMatrix {
        let thr = self.threshold;
        self.eigen[x].apply_fn(|l| C64::from_polar(1.0, t * l.ln()), |l| l > thr)
    }

    pub fn at(&self, t: f64, a: &AlgebraElement) -> AlgebraElement {
        assert_eq!(a.blocks().len(), self.eigen.len(), "modular flow applied to element of wrong algebra");
        let mut out = a.clone();
        for x in 0..self.eigen.len() {
            let u = self.unitary(x, t);
            *out.block_mut(x) = (&u * a.block(x)) * &u.adjoint();
        }
        out
    }
}

/// The corner map `F^Q_R = compress_R ∘ F ∘ lift_Q` between support algebras.
#[derive(Debug, Clone)]
pub struct CornerMap {
    pub map: Channel,
    pub omega_support: SupportData,
    pub xi_support: SupportData,
    /// The pulled-back state `ξ = ω∘F` on the full source.
    pub xi: State,
}

impl CornerMap {
    /// Faithful restriction of `ω` to the target corner.
    pub fn omega_r(&self) -> &State {
        self.omega_support.restricted_state()
    }

    /// Faithful restriction of `ξ` to the source corner.
    pub fn xi_r(&self) -> &State {
        self.xi_support.restricted_state()
    }
}

pub fn corner_map(f: &Channel, omega: &State, tol: &Tolerances) -> Result<CornerMap> {
    let xi = f.pullback(omega, tol)?;
    let omega_support = omega.support(tol)?;
    let xi_support = xi.support(tol)?;
    let map = Channel::from_map(xi_support.corner(), omega_support.corner(), |c| {
        omega_support.compress(&f.apply(&xi_support.lift(c)))
    });
    Ok(CornerMap { map, omega_support, xi_support, xi })
}

/// Residual of a modular-covariance test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcReport {
    pub holds: bool,
    pub residual: f64,
}

/// Both routes of the modular-covariance test, cross-checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcAnalysis {
    pub holds: bool,
    pub algebraic: AcReport,
    pub sampled: AcReport,
}

/// `F^Q_R(σ_y B) ρ_x = ρ_x F^Q_R(B σ_y)` on corner matrix units, for every block pair.
pub fn ac_condition_algebraic(f: &Channel, omega: &State, tol: &Tolerances) -> Result<AcReport> {
    let cm = corner_map(f, omega, tol)?;
    Ok(ac_algebraic_on_corner(&cm, tol))
}

fn ac_algebraic_on_corner(cm: &CornerMap, tol: &Tolerances) -> AcReport {
    let rho = cm.omega_r().weighted_element();
    let sigma = cm.xi_r().weighted_element();
    let units = cm.map.source().matrix_units();
    let rows = par::map_range(units.len(), |k| {
        let e = cm.map.source().unit_element(units[k]);
        let lhs = cm.map.apply(&sigma.mul(&e)).mul(&rho);
        let rhs = rho.mul(&cm.map.apply(&e.mul(&sigma)));
        (lhs.distance(&rhs), lhs.frobenius_norm().max(rhs.frobenius_norm()))
    });
    let scale = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let residual = Tolerances::relative(rows.iter().map(|r| r.0).fold(0.0, f64::max), scale);
    AcReport { holds: residual <= tol.eps_eq, residual }
}

/// `F^Q_R ∘ m^t_ξ = m^t_ω ∘ F^Q_R` on corner matrix units at the sample times.
pub fn ac_condition_sampled(f: &Channel, omega: &State, tol: &Tolerances) -> Result<AcReport> {
    let cm = corner_map(f, omega, tol)?;
    ac_sampled_on_corner(&cm, tol)
}

fn ac_sampled_on_corner(cm: &CornerMap, tol: &Tolerances) -> Result<AcReport> {
    let flow_xi = ModularFlow::new(cm.xi_r(), tol)?;
    let flow_omega = ModularFlow::new(cm.omega_r(), tol)?;
    let units = cm.map.source().matrix_units();
    let images: Vec<AlgebraElement> = units.iter().map(|&u| cm.map.apply_unit(u)).collect();
    let scale = images.iter().map(AlgebraElement::frobenius_norm).fold(0.0, f64::max);
    let diff = par::max_range(units.len() * T_SAMPLES.len(), |k| {
        let (t, u) = (T_SAMPLES[k / units.len()], k % units.len());
        let e = cm.map.source().unit_element(units[u]);
        let lhs = cm.map.apply(&flow_xi.at(t, &e));
        let rhs = flow_omega.at(t, &images[u]);
        lhs.distance(&rhs)
    });
    let residual = Tolerances::relative(diff, scale);
    Ok(AcReport { holds: residual <= tol.eps_eq, residual })
}

/// Modular covariance of `(F, ω)` on the support corners, decided by both routes.
pub fn ac_condition(f: &Channel, omega: &State, tol: &Tolerances) -> Result<AcAnalysis> {
    let cm = corner_map(f, omega, tol)?;
    ac_on_corner(&cm, tol)
}

pub(crate) fn ac_on_corner(cm: &CornerMap, tol: &Tolerances) -> Result<AcAnalysis> {
    let algebraic = ac_algebraic_on_corner(cm, tol);
    let sampled = ac_sampled_on_corner(cm, tol)?;
    let holds = dual_verdict("modular covariance", algebraic.residual, sampled.residual, tol)?;
    Ok(AcAnalysis { holds, algebraic, sampled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{HomSpec, MultiMatrixAlgebra};
    use crate::linalg::kron;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn diag_state(d: &[f64]) -> State {
        let alg = MultiMatrixAlgebra::matrix(d.len());
        State::new(&alg, vec![1.0], vec![Some(CMatrix::from_real_diag(d))], &tol()).unwrap()
    }

    #[test]
    fn flow_preserves_state() {
        let st = diag_state(&[0.2, 0.3, 0.5]);
        let flow = ModularFlow::new(&st, &tol()).unwrap();
        let a = AlgebraElement::new(st.algebra(), vec![CMatrix::from_fn(3, 3, |i, j| C64::new(i as f64, j as f64))])
            .unwrap();
        let moved = flow.at(0.7, &a);
        assert!((st.evaluate(&moved) - st.evaluate(&a)).norm() < 1e-14);
        assert!(moved.distance(&a) > 1e-3);
    }

    #[test]
    fn flow_annihilates_off_support() {
        let st = diag_state(&[0.5, 0.5, 0.0]);
        let flow = ModularFlow::new(&st, &tol()).unwrap();
        let a = st.algebra().identity();
        let moved = flow.at(1.0, &a);
        assert!(moved.block(0).distance(&CMatrix::from_real_diag(&[1.0, 1.0, 0.0])) < 1e-14);
    }

    #[test]
    fn product_inclusion_is_covariant() {
        let h = HomSpec::amplification(2, 2);
        let f = Channel::from_hom(&h);
        let rho = kron(&CMatrix::from_real_diag(&[0.3, 0.7]), &CMatrix::from_real_diag(&[0.6, 0.4]));
        let omega = State::new(h.target(), vec![1.0], vec![Some(rho)], &tol()).unwrap();
        let ac = ac_condition(&f, &omega, &tol()).unwrap();
        assert!(ac.holds && ac.sampled.holds, "{ac:?}");
    }

    #[test]
    fn entangled_faithful_state_breaks_covariance() {
        let h = HomSpec::amplification(2, 2);
        let f = Channel::from_hom(&h);
        let rho = CMatrix::from_real(
            4,
            4,
            &[0.35, 0., 0., 0.2, 0., 0.15, 0., 0., 0., 0., 0.15, 0., 0.2, 0., 0., 0.35],
        )
        .unwrap();
        let omega = State::new(h.target(), vec![1.0], vec![Some(rho)], &tol()).unwrap();
        let ac = ac_condition(&f, &omega, &tol()).unwrap();
        assert!(!ac.holds && !ac.algebraic.holds && !ac.sampled.holds, "{ac:?}");
    }

    #[test]
    fn corner_map_of_rank_deficient_state_is_unital() {
        let h = HomSpec::amplification(2, 2);
        let f = Channel::from_hom(&h);
        let rho = kron(&CMatrix::from_real_diag(&[1.0, 0.0]), &CMatrix::from_real_diag(&[0.6, 0.4]));
        let omega = State::new(h.target(), vec![1.0], vec![Some(rho)], &tol()).unwrap();
        let cm = corner_map(&f, &omega, &tol()).unwrap();
        assert!(cm.map.is_ucp(&tol()).holds());
        assert_eq!(cm.map.target().blocks(), &[2]);
    }
}

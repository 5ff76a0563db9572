//! Numerical tolerances shared by every analysis.

use serde::{Deserialize, Serialize};

/// Environment variable that overrides the default equality tolerance.
pub const EPS_EQ_ENV: &str = "QBAYES_EPS_EQ";

/// Floor used when a relative comparison has a vanishing reference.
pub const ABS_FLOOR: f64 = 1e-12;

/// Tolerances used for rank decisions, equality checks and spectral reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// An eigenvalue counts as zero iff it is at most `eps_rank` times the largest one.
    pub eps_rank: f64,
    /// Relative Frobenius tolerance for equality checks.
    pub eps_eq: f64,
    /// Relative reconstruction tolerance for eigendecompositions.
    pub eps_recon: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { eps_rank: 1e-9, eps_eq: 1e-8, eps_recon: 1e-10 }
    }
}

impl Tolerances {
    /// Defaults, with `eps_eq` taken from `QBAYES_EPS_EQ` when it parses as a positive float.
    pub fn from_env() -> Self {
        let mut tol = Tolerances::default();
        if let Ok(raw) = std::env::var(EPS_EQ_ENV) {
            if let Ok(v) = raw.trim().parse::<f64>() {
                if v.is_finite() && v > 0.0 {
                    tol.eps_eq = v;
                }
            }
        }
        tol
    }

    /// Relative residual `diff / reference`.
    ///
    /// References below `ABS_FLOOR / 1e-8` are clamped, so a zero reference is compared
    /// absolutely against `ABS_FLOOR` at the default `eps_eq`.
    pub fn relative(diff: f64, reference: f64) -> f64 {
        diff / reference.max(ABS_FLOOR / 1e-8)
    }

    /// Whether a residual measured relative to its natural scale passes `eps_eq`.
    pub fn eq_ok(&self, residual: f64) -> bool {
        residual <= self.eps_eq
    }
}

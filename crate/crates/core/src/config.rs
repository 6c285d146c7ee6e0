use crate::error::{Error, Result};
use crate::matrix::C64;

pub const DEFAULT_EPS_DEG: f64 = 1e-12;

/// What to do when a spectral gap in a coefficient denominator falls below
/// `eps_deg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DegeneracyPolicy {
    Error,
    /// Replace `1/x` by `x / (x² + eps_b²)`.
    Lorentzian {
        eps_b: f64,
    },
}

/// Linear solver used for the shifted systems of the iterative paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Krylov iteration, falling back to the dense solve for small matrices
    /// when it fails to converge.
    Krylov,
    /// Explicit complement basis and direct solve.
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradConfig {
    /// Share of the diagonal term given to the left block; the rest goes to
    /// the right block.
    pub alpha: f64,
    /// Relative spectral gap below which two values count as degenerate.
    pub eps_deg: f64,
    pub degeneracy_policy: DegeneracyPolicy,
    /// Central-difference step; `None` selects `eps^(1/3) * (1 + ‖A‖_F)`.
    pub fd_step: Option<f64>,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub solver: SolverKind,
}

impl Default for GradConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            eps_deg: DEFAULT_EPS_DEG,
            degeneracy_policy: DegeneracyPolicy::Error,
            fd_step: None,
            solver_tol: 1e-12,
            solver_max_iter: 1000,
            solver: SolverKind::Krylov,
        }
    }
}

impl GradConfig {
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_policy(mut self, policy: DegeneracyPolicy) -> Self {
        self.degeneracy_policy = policy;
        self
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_solver_tol(mut self, tol: f64) -> Self {
        self.solver_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.eps_deg > 0.0 && self.eps_deg.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "eps_deg {} must be positive",
                self.eps_deg
            )));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "solver_tol {} must be positive",
                self.solver_tol
            )));
        }
        if self.solver_max_iter == 0 {
            return Err(Error::InvalidConfig("solver_max_iter must be at least 1".into()));
        }
        if let DegeneracyPolicy::Lorentzian { eps_b } = self.degeneracy_policy {
            if !(eps_b > 0.0 && eps_b.is_finite()) {
                return Err(Error::InvalidConfig(format!("broadening {eps_b} must be positive")));
            }
        }
        if let Some(h) = self.fd_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidConfig(format!("fd_step {h} must be positive")));
            }
        }
        Ok(())
    }

    /// Finite-difference step for a matrix of Frobenius norm `a_norm`.
    pub fn fd_step_for(&self, a_norm: f64) -> f64 {
        self.fd_step.unwrap_or_else(|| f64::EPSILON.cbrt() * (1.0 + a_norm))
    }

    /// Reciprocal `1/x` of a real spectral gap, subject to the degeneracy
    /// policy. `scale` is the reference magnitude the relative gap is measured
    /// against; `(i, j)` identify the pair for error reporting.
    pub(crate) fn reciprocal_gap(&self, x: f64, scale: f64, i: usize, j: usize) -> Result<f64> {
        match self.degeneracy_policy {
            DegeneracyPolicy::Error => {
                let rel = if scale > 0.0 { x.abs() / scale } else { x.abs() };
                if rel < self.eps_deg {
                    return Err(Error::DegenerateSpectrum { i, j, gap: rel });
                }
                Ok(1.0 / x)
            }
            DegeneracyPolicy::Lorentzian { eps_b } => Ok(x / (x * x + eps_b * eps_b)),
        }
    }

    /// Complex analogue of [`Self::reciprocal_gap`] for eigenvalue gaps.
    pub(crate) fn reciprocal_gap_complex(&self, x: C64, scale: f64, i: usize, j: usize) -> Result<C64> {
        match self.degeneracy_policy {
            DegeneracyPolicy::Error => {
                let rel = if scale > 0.0 { x.norm() / scale } else { x.norm() };
                if rel < self.eps_deg {
                    return Err(Error::DegenerateSpectrum { i, j, gap: rel });
                }
                Ok(x.inv())
            }
            DegeneracyPolicy::Lorentzian { eps_b } => Ok(x.conj() / (x.norm_sqr() + eps_b * eps_b)),
        }
    }
}

//! Forward-mode derivative of a truncated eigendecomposition with distinct
//! kept eigenvalues.
//!
//! Eigenvectors are gauge-fixed by pinning one entry of each to 1. The
//! tangent of a gauge-fixed eigenvector splits into a part inside the kept
//! eigenspace, `x̄ (ȳ dx)`, and a part in the oblique complement
//! `(1 - x̄ȳ) dx`. The latter solves one shifted non-Hermitian system per kept
//! eigenvalue.

use rayon::prelude::*;

use crate::config::{DegeneracyPolicy, GradConfig, SolverKind};
use crate::decomp::FullEvd;
use crate::error::{Error, Result};
use crate::krylov::gmres;
use crate::matrix::{norm, CMat, Lu, C64, ZERO};

const GMRES_RESTART: usize = 50;

/// Kept eigentriple: right eigenvectors `x̄` (n x p), eigenvalues, and the
/// matching rows `ȳ` (p x n) of the inverse eigenbasis, with `ȳ x̄ = 1_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvdKept {
    x: CMat,
    lambda: Vec<C64>,
    y: CMat,
}

impl EvdKept {
    pub fn new(x: CMat, lambda: Vec<C64>, y: CMat) -> Result<Self> {
        let p = lambda.len();
        let n = x.rows();
        if p == 0 || x.cols() != p || y.shape() != (p, n) {
            return Err(Error::InvalidDimensions(format!(
                "kept eigenvectors {:?}, {} eigenvalues and dual rows {:?} are inconsistent",
                x.shape(),
                p,
                y.shape()
            )));
        }
        x.check_finite()?;
        y.check_finite()?;
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::Precondition("eigenvalues must be finite".into()));
        }
        let dev = (&(&y * &x) - &CMat::identity(p)).norm_fro();
        if dev > 1e-10 * p as f64 {
            return Err(Error::Precondition(format!(
                "dual rows are not biorthogonal to the eigenvectors (deviation {dev:e})"
            )));
        }
        Ok(Self { x, lambda, y })
    }

    pub fn x(&self) -> &CMat {
        &self.x
    }

    pub fn lambda(&self) -> &[C64] {
        &self.lambda
    }

    pub fn y(&self) -> &CMat {
        &self.y
    }

    pub fn p(&self) -> usize {
        self.lambda.len()
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    /// `‖A x̄ - x̄ λ‖_F`.
    pub fn residual(&self, a: &CMat) -> f64 {
        (&(a * &self.x) - &self.x.scale_cols_complex(&self.lambda)).norm_fro()
    }

    /// Rescales the stored vectors, `x̄ → x̄ c` and `ȳ → c⁻¹ ȳ`.
    pub fn rescaled(&self, c: &[C64]) -> Result<Self> {
        if c.len() != self.p() || c.contains(&ZERO) {
            return Err(Error::Precondition("rescaling needs p nonzero factors".into()));
        }
        let inv: Vec<C64> = c.iter().map(|z| z.inv()).collect();
        Self::new(
            self.x.scale_cols_complex(c),
            self.lambda.clone(),
            self.y.scale_rows_complex(&inv),
        )
    }
}

fn max_modulus(lambda: &[C64]) -> f64 {
    lambda.iter().map(|l| l.norm()).fold(0.0, f64::max)
}

/// Leading `p` eigentriples of a full decomposition. Under the `Error`
/// policy, kept eigenvalues must be pairwise distinct and distinct from every
/// discarded one, relative to the largest modulus.
pub fn truncate_evd(full: &FullEvd, p: usize, cfg: &GradConfig) -> Result<EvdKept> {
    let n = full.lambda.len();
    if p == 0 || p > n {
        return Err(Error::Precondition(format!("truncation rank p={p} outside 1..={n}")));
    }
    if cfg.degeneracy_policy == DegeneracyPolicy::Error {
        let scale = max_modulus(&full.lambda);
        for i in 0..p {
            for j in (i + 1)..n {
                let gap = (full.lambda[i] - full.lambda[j]).norm() / scale.max(f64::MIN_POSITIVE);
                if gap < cfg.eps_deg {
                    return Err(Error::DegenerateSpectrum { i, j, gap });
                }
            }
        }
    }
    let rows: Vec<usize> = (0..p).collect();
    EvdKept::new(
        full.x.col_block(0, p),
        full.lambda[..p].to_vec(),
        full.y.select_rows(&rows),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GaugePolicy {
    /// Pivot on the largest `|x_ik|`.
    MaxAbsX,
    /// Pivot on the largest `|x_ik| |y_ki|`.
    #[default]
    MaxProduct,
}

/// Pivot row and scale per kept eigenvector: `x̄[:, k] γ_k` has entry 1 in
/// row `pivots[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeChoice {
    pub policy: GaugePolicy,
    pub pivots: Vec<usize>,
    pub gamma: Vec<C64>,
}

impl GaugeChoice {
    /// Gauge-fixed eigenvectors `x̄ Γ`.
    pub fn apply(&self, x: &CMat) -> CMat {
        let mut out = x.scale_cols_complex(&self.gamma);
        for (k, &m) in self.pivots.iter().enumerate() {
            out[(m, k)] = C64::new(1.0, 0.0);
        }
        out
    }
}

pub fn fix_gauge(kept: &EvdKept, policy: GaugePolicy) -> Result<GaugeChoice> {
    let n = kept.n();
    let mut pivots = Vec::with_capacity(kept.p());
    let mut gamma = Vec::with_capacity(kept.p());
    for k in 0..kept.p() {
        let weight = |i: usize| match policy {
            GaugePolicy::MaxAbsX => kept.x[(i, k)].norm(),
            GaugePolicy::MaxProduct => kept.x[(i, k)].norm() * kept.y[(k, i)].norm(),
        };
        let mut best = 0;
        let mut best_w = weight(0);
        for i in 1..n {
            let w = weight(i);
            if w > best_w {
                best = i;
                best_w = w;
            }
        }
        let pivot = kept.x[(best, k)];
        if best_w == 0.0 || pivot == ZERO {
            return Err(Error::ZeroPivot { column: k });
        }
        pivots.push(best);
        gamma.push(pivot.inv());
    }
    Ok(GaugeChoice { policy, pivots, gamma })
}

fn check_tangent(a: Option<&CMat>, kept: &EvdKept, da: &CMat) -> Result<()> {
    let n = kept.n();
    if da.shape() != (n, n) {
        return Err(Error::ShapeMismatch {
            op: "EVD tangent",
            left: (n, n),
            right: da.shape(),
        });
    }
    da.check_finite()?;
    if let Some(a) = a {
        if a.shape() != (n, n) {
            return Err(Error::ShapeMismatch {
                op: "kept eigenvectors",
                left: a.shape(),
                right: (n, kept.p()),
            });
        }
        a.check_finite()?;
        let res = kept.residual(a);
        if res > 1e-8 * a.norm_fro().max(f64::MIN_POSITIVE) {
            return Err(Error::Precondition(format!(
                "kept triples do not satisfy A x = x λ (residual {res:e})"
            )));
        }
    }
    Ok(())
}

fn check_gauge(kept: &EvdKept, gauge: &GaugeChoice) -> Result<()> {
    if gauge.pivots.len() != kept.p() || gauge.gamma.len() != kept.p() || gauge.pivots.iter().any(|&m| m >= kept.n()) {
        return Err(Error::InvalidDimensions(
            "gauge does not match the kept eigenvectors".into(),
        ));
    }
    Ok(())
}

/// `diag(ȳ dA x̄)`, independent of the gauge.
pub fn dlambda(kept: &EvdKept, da: &CMat) -> Result<Vec<C64>> {
    check_tangent(None, kept, da)?;
    Ok((&kept.y * &(da * &kept.x)).diag())
}

/// `ȳ dx` of the gauge-fixed eigenvectors. Off the diagonal it is fixed by
/// the eigenvalue gaps; the diagonal enforces a zero tangent at each pivot
/// row given the complement part `dx2`.
pub fn dx1_block(kept: &EvdKept, gauge: &GaugeChoice, da: &CMat, dx2: &CMat, cfg: &GradConfig) -> Result<CMat> {
    check_tangent(None, kept, da)?;
    check_gauge(kept, gauge)?;
    cfg.validate()?;
    if dx2.shape() != (kept.n(), kept.p()) {
        return Err(Error::ShapeMismatch {
            op: "complement tangent",
            left: (kept.n(), kept.p()),
            right: dx2.shape(),
        });
    }
    let p = kept.p();
    let lam = &kept.lambda;
    let scale = max_modulus(lam);
    let proj = (&kept.y * &(da * &kept.x)).scale_cols_complex(&gauge.gamma);
    let mut dx1 = CMat::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            if i != j {
                dx1[(i, j)] = proj[(i, j)] * cfg.reciprocal_gap_complex(lam[j] - lam[i], scale, i, j)?;
            }
        }
    }
    for k in 0..p {
        let m = gauge.pivots[k];
        let mut s = dx2[(m, k)];
        for l in 0..p {
            if l != k {
                s += kept.x[(m, l)] * dx1[(l, k)];
            }
        }
        dx1[(k, k)] = -s / kept.x[(m, k)];
    }
    Ok(dx1)
}

/// `(1 - x̄ȳ) z`.
fn oblique_complement(kept: &EvdKept, z: &[C64]) -> Vec<C64> {
    let c = kept.y.mul_vec(z);
    let back = kept.x.mul_vec(&c);
    z.iter().zip(&back).map(|(a, b)| a - b).collect()
}

/// Complement part `(1 - x̄ȳ) dx`: column `k` solves
/// `(λ_k - A) z = (1 - x̄ȳ) dA x̄_k γ_k` with `ȳ z = 0`.
pub fn dx2_sylvester(a: &CMat, kept: &EvdKept, gauge: &GaugeChoice, da: &CMat, cfg: &GradConfig) -> Result<CMat> {
    check_tangent(Some(a), kept, da)?;
    check_gauge(kept, gauge)?;
    cfg.validate()?;
    let rhs = (da * &kept.x).scale_cols_complex(&gauge.gamma);
    let scale = max_modulus(&kept.lambda).max(a.norm_fro() / (a.rows() as f64).sqrt());
    let cols = (0..kept.p())
        .into_par_iter()
        .map(|k| {
            let b = oblique_complement(kept, &rhs.col(k));
            solve_shifted_oblique(a, kept, kept.lambda[k], &b, scale, k, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CMat::from_columns(kept.n(), &cols))
}

fn solve_shifted_oblique(
    a: &CMat,
    kept: &EvdKept,
    shift: C64,
    b: &[C64],
    scale: f64,
    column: usize,
    cfg: &GradConfig,
) -> Result<Vec<C64>> {
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(b.to_vec());
    }
    let n = kept.n();
    let krylov = || -> Result<Vec<C64>> {
        let op = |z: &[C64]| {
            let pz = oblique_complement(kept, z);
            let az = a.mul_vec(&pz);
            let w: Vec<C64> = pz.iter().zip(&az).map(|(p, q)| p * shift - q).collect();
            oblique_complement(kept, &w)
        };
        let (z, _) = gmres(&op, b, cfg.solver_tol, cfg.solver_max_iter, GMRES_RESTART.min(n))?;
        Ok(oblique_complement(kept, &z))
    };
    let z = match cfg.solver {
        SolverKind::Dense => solve_oblique_dense(a, kept, shift, b, column)?,
        SolverKind::Krylov => match krylov() {
            Err(Error::NoConvergence { .. }) if n <= crate::iterative::DENSE_FALLBACK_MAX_DIM => {
                solve_oblique_dense(a, kept, shift, b, column)?
            }
            other => other?,
        },
    };
    if cfg.degeneracy_policy == DegeneracyPolicy::Error && norm(&z) * cfg.eps_deg * scale > bnorm {
        return Err(Error::NearSingularShift { column });
    }
    Ok(z)
}

/// Direct solve with `(λ - A)(1 - x̄ȳ) + x̄ȳ`, which is invertible exactly
/// when `λ` is not a discarded eigenvalue and maps the kept eigenspace to
/// itself, so the solution of a complement right-hand side has `ȳ z = 0`.
fn solve_oblique_dense(a: &CMat, kept: &EvdKept, shift: C64, b: &[C64], column: usize) -> Result<Vec<C64>> {
    let n = kept.n();
    let xy = &kept.x * &kept.y;
    let p = &CMat::identity(n) - &xy;
    let shifted = &CMat::identity(n).scale(shift) - a;
    let m = &(&shifted * &p) + &xy;
    let lu = Lu::factor(&m).map_err(|_| Error::NearSingularShift { column })?;
    Ok(oblique_complement(kept, &lu.solve_vec(b)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvdBlocks {
    pub dx1: CMat,
    pub dx2: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvdTangent {
    pub dlambda: Vec<C64>,
    /// Tangent of the gauge-fixed eigenvectors; zero at every pivot row.
    pub dx: CMat,
    pub blocks: EvdBlocks,
    pub gauge: GaugeChoice,
}

pub fn jvp_truncated_evd(
    a: &CMat,
    kept: &EvdKept,
    da: &CMat,
    policy: GaugePolicy,
    cfg: &GradConfig,
) -> Result<EvdTangent> {
    check_tangent(Some(a), kept, da)?;
    cfg.validate()?;
    let gauge = fix_gauge(kept, policy)?;
    let dl = dlambda(kept, da)?;
    let dx2 = dx2_sylvester(a, kept, &gauge, da, cfg)?;
    let dx1 = dx1_block(kept, &gauge, da, &dx2, cfg)?;
    let mut dx = &(&kept.x * &dx1) + &dx2;
    for (k, &m) in gauge.pivots.iter().enumerate() {
        dx[(m, k)] = ZERO;
    }
    Ok(EvdTangent {
        dlambda: dl,
        dx,
        blocks: EvdBlocks { dx1, dx2 },
        gauge,
    })
}

/// `‖ȳ dA x̄ Γ - Γ dλ - (D λ - λ D)‖_F` with `D = ȳ dx`.
pub fn kept_eigen_residual(kept: &EvdKept, da: &CMat, tangent: &EvdTangent) -> f64 {
    let g = &tangent.gauge.gamma;
    let proj = (&kept.y * &(da * &kept.x)).scale_cols_complex(g);
    let d = &kept.y * &tangent.dx;
    let comm = &d.scale_cols_complex(&kept.lambda) - &d.scale_rows_complex(&kept.lambda);
    let gl: Vec<C64> = g.iter().zip(&tangent.dlambda).map(|(a, b)| a * b).collect();
    (&(&proj - &CMat::from_diag(&gl)) - &comm).norm_fro()
}

/// `‖dx2 λ - A dx2 - (1 - x̄ȳ) dA x̄ Γ‖_F`.
pub fn complement_eigen_residual(a: &CMat, kept: &EvdKept, da: &CMat, tangent: &EvdTangent) -> f64 {
    let dx2 = &tangent.blocks.dx2;
    let rhs = (da * &kept.x).scale_cols_complex(&tangent.gauge.gamma);
    let cols: Vec<Vec<C64>> = (0..kept.p()).map(|k| oblique_complement(kept, &rhs.col(k))).collect();
    let rhs = CMat::from_columns(kept.n(), &cols);
    let lhs = &dx2.scale_cols_complex(&kept.lambda) - &(a * dx2);
    (&lhs - &rhs).norm_fro()
}

//! Forward-mode derivative of the truncated SVD from the kept factors alone.
//!
//! The cross-cut tangents `(1 - UU†)dU` and `(1 - VV†)dV` are recovered from
//! shifted Hermitian systems in the complement of the kept space, one per
//! kept singular value, so neither the discarded factors nor the implicit
//! extension of the longer side are ever formed. A Golub-Kahan-Lanczos
//! partial SVD supplies kept factors without a full decomposition.

use rand::Rng;
use rayon::prelude::*;

use crate::config::{DegeneracyPolicy, GradConfig, SolverKind};
use crate::decomp::{cut_gap, full_svd, hermitian_jacobi, SvdKept};
use crate::error::{Error, Result};
use crate::generate::{complex_normal, MatrixSeed};
use crate::krylov::minres;
use crate::matrix::{align_phase, axpy, dot, norm, orthonormal_complement, CMat, RealDiag, C64};
use crate::tsvd::{du1_dv1_from_projection, kept_projection, SvdBlocks, SvdTangent};

/// Largest dimension for which a failed Krylov solve falls back to the
/// dense complement solve.
pub const DENSE_FALLBACK_MAX_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Acts on the column space: `(1 - UU†) A`.
    Left,
    /// Acts on the row space: `(1 - VV†) A†`.
    Right,
}

/// Which Hermitian operator the shifted systems are posed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Systems in `AA†` (n x n), then the right tangent from the left one.
    Left,
    /// Systems in `A†A` (m x m), then the left tangent from the right one.
    Right,
    /// `Left` when `n <= m`, otherwise `Right`: the smaller operator.
    Auto,
}

// ---------------------------------------------------------------------------
// projections

/// Discarded part of `A` reached through the kept factors:
/// `(1 - UU†) A = A (1 - VV†)` on the left, and its adjoint on the right.
#[derive(Debug, Clone, Copy)]
pub struct DiscardedPart<'a> {
    a: &'a CMat,
    kept: &'a SvdKept,
    side: Side,
}

pub fn project_discarded<'a>(a: &'a CMat, kept: &'a SvdKept, side: Side) -> DiscardedPart<'a> {
    DiscardedPart { a, kept, side }
}

impl DiscardedPart<'_> {
    /// Length of vectors accepted by [`Self::apply`].
    pub fn input_len(&self) -> usize {
        match self.side {
            Side::Left => self.a.cols(),
            Side::Right => self.a.rows(),
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        match self.side {
            Side::Left => complement_apply(self.kept.u(), &self.a.mul_vec(x)),
            Side::Right => complement_apply(self.kept.v(), &self.a.adjoint_mul_vec(x)),
        }
    }

    pub fn apply_mat(&self, x: &CMat) -> CMat {
        let cols: Vec<Vec<C64>> = (0..x.cols()).map(|j| self.apply(&x.col(j))).collect();
        let rows = match self.side {
            Side::Left => self.a.rows(),
            Side::Right => self.a.cols(),
        };
        CMat::from_columns(rows, &cols)
    }
}

/// `(1 - B B†) x` for `B` with orthonormal columns, single pass.
fn complement_apply(basis: &CMat, x: &[C64]) -> Vec<C64> {
    let c = basis.adjoint_mul_vec(x);
    let mut out = x.to_vec();
    for (j, cj) in c.iter().enumerate() {
        for (i, o) in out.iter_mut().enumerate() {
            *o -= basis[(i, j)] * cj;
        }
    }
    out
}

fn complement_apply_mat(basis: &CMat, x: &CMat) -> CMat {
    x - &(basis * &basis.adjoint_mul(x).expect("conforming basis"))
}

// ---------------------------------------------------------------------------
// shifted systems

/// `(shift - M M†) x = rhs` restricted to the orthogonal complement of
/// `basis`, where `M = A` on the left side and `M = A†` on the right side.
#[derive(Debug, Clone)]
pub struct ShiftedSystem<'a> {
    pub a: &'a CMat,
    pub side: Side,
    /// Orthonormal columns spanning the deflated subspace (`U` or `V`).
    pub basis: &'a CMat,
    pub shift: f64,
    pub rhs: Vec<C64>,
    /// Magnitude gaps are measured against, typically `S_max²`.
    pub scale: f64,
    /// Kept index the system belongs to, for error reporting.
    pub column: usize,
}

impl ShiftedSystem<'_> {
    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    /// `M M† x`.
    fn gram_apply(&self, x: &[C64]) -> Vec<C64> {
        match self.side {
            Side::Left => self.a.mul_vec(&self.a.adjoint_mul_vec(x)),
            Side::Right => self.a.adjoint_mul_vec(&self.a.mul_vec(x)),
        }
    }

    /// Projected operator `x ↦ (1 - BB†)(shift - MM†)(1 - BB†)x`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let px = complement_apply(self.basis, x);
        let g = self.gram_apply(&px);
        let y: Vec<C64> = px.iter().zip(&g).map(|(p, q)| p * self.shift - q).collect();
        complement_apply(self.basis, &y)
    }

    fn check(&self) -> Result<()> {
        let n = match self.side {
            Side::Left => self.a.rows(),
            Side::Right => self.a.cols(),
        };
        if self.basis.rows() != n || self.rhs.len() != n {
            return Err(Error::InvalidDimensions(format!(
                "shifted system of dimension {n} with basis {:?} and rhs of length {}",
                self.basis.shape(),
                self.rhs.len()
            )));
        }
        if !(self.shift.is_finite() && self.scale.is_finite() && self.scale >= 0.0) {
            return Err(Error::Precondition("shift and scale must be finite".into()));
        }
        Ok(())
    }

    fn near_singular(&self, x: &[C64], rhs_norm: f64, cfg: &GradConfig) -> bool {
        // ‖x‖ ≤ ‖rhs‖ / gap, so an oversized solution reveals a gap below the
        // degeneracy threshold
        cfg.degeneracy_policy == DegeneracyPolicy::Error && norm(x) * cfg.eps_deg * self.scale > rhs_norm
    }
}

/// Solves one shifted system. The right-hand side is projected onto the
/// complement first; the solution lies in the complement.
pub fn solve_sylvester_projected(sys: &ShiftedSystem, cfg: &GradConfig) -> Result<Vec<C64>> {
    sys.check()?;
    cfg.validate()?;
    let rhs = complement_apply(sys.basis, &sys.rhs);
    let rhs_norm = norm(&rhs);
    if rhs_norm == 0.0 {
        return Ok(rhs);
    }
    match cfg.solver {
        SolverKind::Dense => solve_dense(sys, &rhs, cfg),
        SolverKind::Krylov => match solve_krylov(sys, &rhs, rhs_norm, cfg) {
            Err(Error::NoConvergence { .. }) if sys.dim() <= DENSE_FALLBACK_MAX_DIM => solve_dense(sys, &rhs, cfg),
            other => other,
        },
    }
}

fn solve_krylov(sys: &ShiftedSystem, rhs: &[C64], rhs_norm: f64, cfg: &GradConfig) -> Result<Vec<C64>> {
    let op = |x: &[C64]| sys.apply(x);
    let (x, _) = minres(&op, rhs, cfg.solver_tol, cfg.solver_max_iter)?;
    let x = complement_apply(sys.basis, &x);
    if sys.near_singular(&x, rhs_norm, cfg) {
        return Err(Error::NearSingularShift { column: sys.column });
    }
    Ok(x)
}

/// Direct solve in an explicit orthonormal basis `Q` of the complement:
/// `Q†(shift - MM†)Q y = Q† rhs`, `x = Q y`, via the Hermitian
/// eigendecomposition of the reduced matrix.
fn solve_dense(sys: &ShiftedSystem, rhs: &[C64], cfg: &GradConfig) -> Result<Vec<C64>> {
    let q = orthonormal_complement(sys.basis);
    let k = q.cols();
    if k == 0 {
        return Ok(vec![C64::new(0.0, 0.0); rhs.len()]);
    }
    let w = match sys.side {
        Side::Left => q.adjoint_mul(sys.a)?,
        Side::Right => q.adjoint_mul(&sys.a.adjoint())?,
    };
    let reduced = &CMat::identity(k).scale_real(sys.shift) - &w.mul_adjoint(&w)?;
    let (z, mu) = hermitian_jacobi(&reduced)?;
    let floor = cfg.eps_deg * sys.scale;
    let mut inv = Vec::with_capacity(k);
    for m in &mu {
        let m = m.re;
        match cfg.degeneracy_policy {
            DegeneracyPolicy::Error => {
                if m.abs() < floor || m == 0.0 {
                    return Err(Error::NearSingularShift { column: sys.column });
                }
                inv.push(1.0 / m);
            }
            DegeneracyPolicy::Lorentzian { eps_b } => inv.push(m / (m * m + eps_b * eps_b)),
        }
    }
    let c = z.adjoint_mul_vec(&q.adjoint_mul_vec(rhs));
    let c: Vec<C64> = c.iter().zip(&inv).map(|(ci, d)| ci * *d).collect();
    Ok(q.mul_vec(&z.mul_vec(&c)))
}

// ---------------------------------------------------------------------------
// JVP

fn check_inputs(a: &CMat, kept: &SvdKept, da: &CMat) -> Result<()> {
    a.check_finite()?;
    da.check_finite()?;
    if a.shape() != (kept.n(), kept.m()) {
        return Err(Error::ShapeMismatch {
            op: "kept factors",
            left: a.shape(),
            right: (kept.n(), kept.m()),
        });
    }
    if da.shape() != a.shape() {
        return Err(Error::ShapeMismatch {
            op: "SVD tangent",
            left: a.shape(),
            right: da.shape(),
        });
    }
    // the kept triples must be singular triples of `a`
    let res = (&(a * kept.v()) - &kept.u().scale_cols(kept.s().values())).norm_fro();
    if res > 1e-8 * a.norm_fro().max(f64::MIN_POSITIVE) {
        return Err(Error::Precondition(format!(
            "kept factors do not satisfy AV = US (residual {res:e})"
        )));
    }
    Ok(())
}

pub fn jvp_truncated_svd_iterative(a: &CMat, kept: &SvdKept, da: &CMat, cfg: &GradConfig) -> Result<SvdTangent> {
    jvp_truncated_svd_iterative_branch(a, kept, da, cfg, Branch::Auto)
}

/// Like [`jvp_truncated_svd_iterative`] with an explicit choice of the side
/// the shifted systems are posed on.
pub fn jvp_truncated_svd_iterative_branch(
    a: &CMat,
    kept: &SvdKept,
    da: &CMat,
    cfg: &GradConfig,
    branch: Branch,
) -> Result<SvdTangent> {
    check_inputs(a, kept, da)?;
    cfg.validate()?;
    let k = kept_projection(kept, da);
    let ds = RealDiag(k.diag().iter().map(|z| z.re).collect());
    let (du1, dv1) = du1_dv1_from_projection(&k, kept.s(), cfg)?;

    let s = kept.s().values();
    let s_inv: Vec<f64> = s.iter().map(|x| 1.0 / x).collect();
    let scale = s[0] * s[0];
    // (1 - UU†) dA V and (1 - VV†) dA† U
    let wu = complement_apply_mat(kept.u(), &(da * kept.v()));
    let wv = complement_apply_mat(kept.v(), &da.adjoint_mul(kept.u())?);

    let side = match branch {
        Branch::Left => Side::Left,
        Branch::Right => Side::Right,
        Branch::Auto if a.rows() <= a.cols() => Side::Left,
        Branch::Auto => Side::Right,
    };
    let (du2, dv2) = match side {
        Side::Left => {
            let rhs = &wu.scale_cols(s) + &(a * &wv);
            let x = solve_columns(a, Side::Left, kept.u(), &rhs, s, scale, cfg)?;
            let dv2 = (&wv + &a.adjoint_mul(&x)?).scale_cols(&s_inv);
            (x, dv2)
        }
        Side::Right => {
            let rhs = &wv.scale_cols(s) + &a.adjoint_mul(&wu)?;
            let y = solve_columns(a, Side::Right, kept.v(), &rhs, s, scale, cfg)?;
            let du2 = (&wu + &(a * &y)).scale_cols(&s_inv);
            (du2, y)
        }
    };
    let du = &(kept.u() * &du1) + &du2;
    let dv = &(kept.v() * &dv1) + &dv2;
    Ok(SvdTangent {
        du,
        ds,
        dv,
        blocks: SvdBlocks { du1, dv1, du2, dv2 },
    })
}

fn solve_columns(
    a: &CMat,
    side: Side,
    basis: &CMat,
    rhs: &CMat,
    s: &[f64],
    scale: f64,
    cfg: &GradConfig,
) -> Result<CMat> {
    let cols = (0..s.len())
        .into_par_iter()
        .map(|j| {
            let sys = ShiftedSystem {
                a,
                side,
                basis,
                shift: s[j] * s[j],
                rhs: rhs.col(j),
                scale,
                column: j,
            };
            solve_sylvester_projected(&sys, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CMat::from_columns(basis.rows(), &cols))
}

/// Residuals of the two coupled relations between the projected tangents:
/// `‖(1-UU†)dAV - (1-UU†)dU S + A (1-VV†)dV‖` and
/// `‖(1-VV†)dA†U - (1-VV†)dV S + A† (1-UU†)dU‖`.
pub fn iterative_residuals(a: &CMat, kept: &SvdKept, da: &CMat, tangent: &SvdTangent) -> (f64, f64) {
    let s = kept.s().values();
    let b = &tangent.blocks;
    let wu = complement_apply_mat(kept.u(), &(da * kept.v()));
    let wv = complement_apply_mat(kept.v(), &da.adjoint_mul(kept.u()).expect("shape checked"));
    let left = &(&wu - &b.du2.scale_cols(s)) + &(a * &b.dv2);
    let right = &(&wv - &b.dv2.scale_cols(s)) + &a.adjoint_mul(&b.du2).expect("shape checked");
    (left.norm_fro(), right.norm_fro())
}

// ---------------------------------------------------------------------------
// Golub-Kahan-Lanczos partial SVD

fn orthogonalize(basis: &[Vec<C64>], v: &mut [C64]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            axpy(-c, q, v);
        }
    }
}

/// Appends a unit vector orthogonal to `basis`; `candidate` is used unless it
/// has (numerically) vanished, in which case random vectors are tried.
fn push_orthonormal<R: Rng>(basis: &mut Vec<Vec<C64>>, mut candidate: Vec<C64>, reference: f64, rng: &mut R) -> f64 {
    orthogonalize(basis, &mut candidate);
    let mut len = norm(&candidate);
    let coefficient = len;
    let dim = candidate.len();
    let mut tries = 0;
    while len <= 1e-12 * reference.max(f64::MIN_POSITIVE) && tries < 8 {
        candidate = (0..dim).map(|_| complex_normal(rng)).collect();
        orthogonalize(basis, &mut candidate);
        len = norm(&candidate);
        tries += 1;
    }
    candidate.iter_mut().for_each(|z| *z /= len);
    basis.push(candidate);
    coefficient
}

/// Leading `t` singular triples of `a` by Lanczos bidiagonalization with full
/// reorthogonalization and thick restarts. Each returned triple satisfies
/// `‖A v - σ u‖, ‖A† u - σ v‖ <= tol ‖A‖₂`; each left vector has its
/// largest-modulus entry real and positive.
pub fn gkl_partial_svd(a: &CMat, t: usize, max_iter: usize, tol: f64, seed: &MatrixSeed) -> Result<SvdKept> {
    gkl_partial_svd_with(a, t, max_iter, tol, seed, &GradConfig::default())
}

/// [`gkl_partial_svd`] with the degeneracy threshold taken from `cfg`.
pub fn gkl_partial_svd_with(
    a: &CMat,
    t: usize,
    max_iter: usize,
    tol: f64,
    seed: &MatrixSeed,
    cfg: &GradConfig,
) -> Result<SvdKept> {
    a.check_finite()?;
    let (n, m) = a.shape();
    let r = n.min(m);
    if t == 0 || t >= r {
        return Err(Error::Precondition(format!(
            "partial SVD needs 1 <= t < min(n, m) = {r}, got t={t}; use the full decomposition"
        )));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidConfig(
            "partial SVD needs tol > 0 and max_iter >= 1".into(),
        ));
    }
    let anorm = a.norm_fro();
    if anorm == 0.0 {
        return Err(Error::ZeroSingularValue { index: 0 });
    }
    let kmax = r.min((5 * t).max(t + 8));
    let mut rng = seed.rng();
    let start: Vec<C64> = (0..m).map(|_| complex_normal(&mut rng)).collect();
    let mut vs: Vec<Vec<C64>> = Vec::with_capacity(kmax + 1);
    push_orthonormal(&mut vs, start, 1.0, &mut rng);
    let mut us: Vec<Vec<C64>> = Vec::with_capacity(kmax);

    for _ in 0..max_iter {
        while us.len() < kmax {
            let j = us.len();
            push_orthonormal(&mut us, a.mul_vec(&vs[j]), anorm, &mut rng);
            if vs.len() < m {
                push_orthonormal(&mut vs, a.adjoint_mul_vec(&us[j]), anorm, &mut rng);
            } else {
                // row space exhausted
                break;
            }
        }
        let k = us.len();
        let u_k = CMat::from_columns(n, &us);
        let v_k = CMat::from_columns(m, &vs[..k]);
        let b = u_k.adjoint_mul(&(a * &v_k))?;
        let small = full_svd(&b)?;
        let sigma = small.s.values();
        let ritz_u = &u_k * &small.u;
        let ritz_v = &v_k * &small.v;
        let reference = sigma[0];

        let converged = (0..t).all(|i| {
            let u = ritz_u.col(i);
            let v = ritz_v.col(i);
            let lhs = a.mul_vec(&v);
            let r1: Vec<C64> = lhs.iter().zip(&u).map(|(x, y)| x - y * sigma[i]).collect();
            let rhs = a.adjoint_mul_vec(&u);
            let r2: Vec<C64> = rhs.iter().zip(&v).map(|(x, y)| x - y * sigma[i]).collect();
            norm(&r1) <= tol * reference && norm(&r2) <= tol * reference
        });
        if converged {
            if cfg.degeneracy_policy == DegeneracyPolicy::Error && sigma.len() > t {
                let gap = cut_gap(sigma, t);
                if gap < cfg.eps_deg {
                    return Err(Error::DegenerateCut { t, gap });
                }
            }
            if let Some(index) = sigma[..t].iter().position(|&x| x <= 0.0) {
                return Err(Error::ZeroSingularValue { index });
            }
            let mut u_cols = Vec::with_capacity(t);
            let mut v_cols = Vec::with_capacity(t);
            for i in 0..t {
                let u = ritz_u.col(i);
                let (u, phase) = align_phase(&u).ok_or(Error::ZeroSingularValue { index: i })?;
                let v: Vec<C64> = ritz_v.col(i).iter().map(|z| z * phase).collect();
                u_cols.push(u);
                v_cols.push(v);
            }
            return SvdKept::new(
                CMat::from_columns(n, &u_cols),
                RealDiag(sigma[..t].to_vec()),
                CMat::from_columns(m, &v_cols),
            );
        }

        // thick restart: keep the leading Ritz pairs and the continuation vector
        let keep = (t + (k - t) / 2).clamp(t, k - 1);
        let next_v = vs.get(k).cloned();
        us = (0..keep).map(|i| ritz_u.col(i)).collect();
        vs = (0..keep).map(|i| ritz_v.col(i)).collect();
        match next_v {
            Some(v) => {
                vs.push(v);
            }
            None => {
                let cand: Vec<C64> = (0..m).map(|_| complex_normal(&mut rng)).collect();
                push_orthonormal(&mut vs, cand, 1.0, &mut rng);
            }
        }
    }
    Err(Error::NoConvergence {
        what: "Golub-Kahan-Lanczos partial SVD",
        iterations: max_iter,
    })
}

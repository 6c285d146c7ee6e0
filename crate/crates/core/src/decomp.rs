//! Full and truncated decompositions feeding the gradient kernels.
//!
//! The reference provider is self-contained: one-sided Jacobi for the SVD,
//! two-sided Jacobi for Hermitian eigenproblems, and Hessenberg reduction
//! followed by shifted complex QR for general square matrices.

use std::cmp::Ordering;

use crate::config::{DegeneracyPolicy, GradConfig};
use crate::error::{Error, Result};
use crate::matrix::{dot, givens, inverse, norm, orthonormal_complement, CMat, RealDiag, C64, ONE, ZERO};

const JACOBI_MAX_SWEEPS: usize = 30;
const EVD_MAX_CONDITION: f64 = 1e12;

/// `A = U_f diag(S_f) V_f†` with `r = min(n, m)` columns in each factor.
#[derive(Debug, Clone, PartialEq)]
pub struct FullSvd {
    pub u: CMat,
    pub s: RealDiag,
    pub v: CMat,
}

impl FullSvd {
    pub fn rank_bound(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> CMat {
        &self.u.scale_cols(self.s.values()) * &self.v.adjoint()
    }
}

/// Kept block `(U, S, V)` of a truncated SVD.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdKept {
    u: CMat,
    s: RealDiag,
    v: CMat,
}

impl SvdKept {
    /// Validates shapes, orthonormal columns, and strictly positive values.
    pub fn new(u: CMat, s: RealDiag, v: CMat) -> Result<Self> {
        let t = s.len();
        if t == 0 || u.cols() != t || v.cols() != t {
            return Err(Error::InvalidDimensions(format!(
                "kept factors U {:?}, S {}, V {:?} are inconsistent",
                u.shape(),
                t,
                v.shape()
            )));
        }
        if let Some(index) = s.values().iter().position(|&x| !(x > 0.0)) {
            return Err(Error::ZeroSingularValue { index });
        }
        for (name, w) in [("U", &u), ("V", &v)] {
            let gram = w.adjoint_mul(w)?;
            let dev = (&gram - &CMat::identity(t)).norm_fro();
            if dev > 1e-10 * t as f64 {
                return Err(Error::Precondition(format!(
                    "{name} columns are not orthonormal (deviation {dev:e})"
                )));
            }
        }
        Ok(Self { u, s, v })
    }

    pub fn u(&self) -> &CMat {
        &self.u
    }

    pub fn s(&self) -> &RealDiag {
        &self.s
    }

    pub fn v(&self) -> &CMat {
        &self.v
    }

    pub fn t(&self) -> usize {
        self.s.len()
    }

    pub fn n(&self) -> usize {
        self.u.rows()
    }

    pub fn m(&self) -> usize {
        self.v.rows()
    }

    pub fn reconstruct(&self) -> CMat {
        &self.u.scale_cols(self.s.values()) * &self.v.adjoint()
    }
}

/// Discarded block `(U⊥, S⊥, V⊥)`; empty when nothing was truncated.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdDiscarded {
    pub u: CMat,
    pub s: RealDiag,
    pub v: CMat,
}

impl SvdDiscarded {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn reconstruct(&self) -> CMat {
        &self.u.scale_cols(self.s.values()) * &self.v.adjoint()
    }
}

/// `A X = X diag(lambda)` with `Y = X⁻¹`. Columns of `X` have unit norm and
/// eigenvalues are ordered by non-increasing modulus, then by decreasing real
/// and imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct FullEvd {
    pub x: CMat,
    pub lambda: Vec<C64>,
    pub y: CMat,
}

pub trait DecompositionProvider: Sync {
    fn full_svd(&self, a: &CMat) -> Result<FullSvd>;
    fn full_evd(&self, a: &CMat) -> Result<FullEvd>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceProvider;

impl DecompositionProvider for ReferenceProvider {
    fn full_svd(&self, a: &CMat) -> Result<FullSvd> {
        full_svd(a)
    }

    fn full_evd(&self, a: &CMat) -> Result<FullEvd> {
        full_evd(a)
    }
}

// ---------------------------------------------------------------------------
// SVD

pub fn full_svd(a: &CMat) -> Result<FullSvd> {
    if a.is_empty() {
        return Err(Error::InvalidDimensions("SVD of an empty matrix".into()));
    }
    a.check_finite()?;
    if a.rows() >= a.cols() {
        let (u, s, v) = one_sided_jacobi(a)?;
        Ok(FullSvd { u, s: RealDiag(s), v })
    } else {
        // A† = U' S V'†  =>  A = V' S U'†
        let (u, s, v) = one_sided_jacobi(&a.adjoint())?;
        Ok(FullSvd {
            u: v,
            s: RealDiag(s),
            v: u,
        })
    }
}

/// One-sided (Hestenes) Jacobi on a matrix with `n >= m`. Returns the thin
/// factors `U (n x m)`, `S (m)`, `V (m x m)` with `S` non-increasing.
fn one_sided_jacobi(a: &CMat) -> Result<(CMat, Vec<f64>, CMat)> {
    let n = a.rows();
    let m = a.cols();
    debug_assert!(n >= m);
    let anorm = a.norm_fro();
    let mut w = a.columns();
    let mut v: Vec<Vec<C64>> = (0..m)
        .map(|j| {
            let mut e = vec![ZERO; m];
            e[j] = ONE;
            e
        })
        .collect();

    let rel_tol = f64::EPSILON * n as f64;
    // pairs whose inner product is below this are numerically orthogonal
    let abs_floor = (1e-14 * anorm).powi(2) * 1e-2;
    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let alpha = w[p].iter().map(|z| z.norm_sqr()).sum::<f64>();
                let beta = w[q].iter().map(|z| z.norm_sqr()).sum::<f64>();
                let gamma = dot(&w[p], &w[q]);
                let g = gamma.norm();
                if g <= rel_tol * (alpha * beta).sqrt() || g <= abs_floor {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut w, p, q, c, s, phase);
                rotate_pair(&mut v, p, q, c, s, phase);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "one-sided Jacobi SVD",
            iterations: JACOBI_MAX_SWEEPS,
        });
    }

    let mut sigma: Vec<f64> = w.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let smax = order.first().map_or(0.0, |&i| sigma[i]);
    let zero_cut = smax * 1e-13;

    let mut u_cols: Vec<Vec<C64>> = Vec::with_capacity(m);
    let mut rank = 0;
    for &j in &order {
        if sigma[j] > zero_cut && sigma[j] > 0.0 {
            u_cols.push(w[j].iter().map(|z| z / sigma[j]).collect());
            rank += 1;
        }
    }
    if rank < m {
        // left vectors of (numerically) zero singular values: any orthonormal
        // completion of the range
        let partial = CMat::from_columns(n, &u_cols);
        let comp = orthonormal_complement(&partial);
        for k in 0..(m - rank) {
            u_cols.push(comp.col(k));
        }
    }
    let u = CMat::from_columns(n, &u_cols);
    let v_sorted: Vec<Vec<C64>> = order.iter().map(|&j| v[j].clone()).collect();
    let v = CMat::from_columns(m, &v_sorted);
    sigma = order.iter().map(|&j| sigma[j]).collect();
    Ok((u, sigma, v))
}

/// Applies the unitary `[[c, s], [-s e^{-iφ}, c e^{-iφ}]]` to columns `p, q`.
fn rotate_pair(cols: &mut [Vec<C64>], p: usize, q: usize, c: f64, s: f64, phase: C64) {
    let ph = phase.conj();
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (xp, xq) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *xp;
        let b = *xq * ph;
        *xp = a * c - b * s;
        *xq = a * s + b * c;
    }
}

/// Splits a full SVD into kept and discarded blocks with the default
/// degeneracy settings.
pub fn truncate_svd(full: &FullSvd, t: usize) -> Result<(SvdKept, SvdDiscarded)> {
    truncate_svd_with(full, t, &GradConfig::default())
}

/// Like [`truncate_svd`], using `cfg.eps_deg`. Under a Lorentzian policy a
/// degenerate cut is accepted, since the broadened coefficients stay finite.
pub fn truncate_svd_with(full: &FullSvd, t: usize, cfg: &GradConfig) -> Result<(SvdKept, SvdDiscarded)> {
    let r = full.rank_bound();
    if t == 0 || t > r {
        return Err(Error::Precondition(format!("truncation rank t={t} outside 1..={r}")));
    }
    let s = full.s.values();
    if t < r && cfg.degeneracy_policy == DegeneracyPolicy::Error {
        let gap = cut_gap(s, t);
        if gap < cfg.eps_deg {
            return Err(Error::DegenerateCut { t, gap });
        }
    }
    let kept = SvdKept::new(
        full.u.col_block(0, t),
        RealDiag(s[..t].to_vec()),
        full.v.col_block(0, t),
    )?;
    let disc = SvdDiscarded {
        u: full.u.col_block(t, r),
        s: RealDiag(s[t..].to_vec()),
        v: full.v.col_block(t, r),
    };
    Ok((kept, disc))
}

/// Gap between the `t`-th and `(t+1)`-th singular values, in squared values
/// relative to the largest squared value.
pub(crate) fn cut_gap(s: &[f64], t: usize) -> f64 {
    let scale = s[0] * s[0];
    if scale == 0.0 {
        return 0.0;
    }
    (s[t - 1] * s[t - 1] - s[t] * s[t]) / scale
}

// ---------------------------------------------------------------------------
// EVD

pub fn full_evd(a: &CMat) -> Result<FullEvd> {
    if !a.is_square() || a.is_empty() {
        return Err(Error::InvalidDimensions(format!(
            "eigendecomposition needs a non-empty square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    a.check_finite()?;
    let herm_dev = (a - &a.adjoint()).norm_fro();
    let (x, lambda) = if herm_dev <= 8.0 * f64::EPSILON * a.norm_fro() {
        hermitian_jacobi(a)?
    } else {
        schur_eigen(a)?
    };
    let order = eigen_order(&lambda);
    let x = x.select_cols(&order);
    let lambda: Vec<C64> = order.iter().map(|&i| lambda[i]).collect();
    let y = inverse(&x).map_err(|_| Error::NonDiagonalizable {
        condition: f64::INFINITY,
    })?;
    let condition = x.norm_fro() * y.norm_fro();
    if !(condition <= EVD_MAX_CONDITION) {
        return Err(Error::NonDiagonalizable { condition });
    }
    Ok(FullEvd { x, lambda, y })
}

/// Permutation sorting eigenvalues by non-increasing modulus, then decreasing
/// real part, then decreasing imaginary part.
pub fn eigen_order(lambda: &[C64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..lambda.len()).collect();
    order.sort_by(|&i, &j| eigen_cmp(lambda[i], lambda[j]));
    order
}

fn eigen_cmp(a: C64, b: C64) -> Ordering {
    b.norm()
        .total_cmp(&a.norm())
        .then(b.re.total_cmp(&a.re))
        .then(b.im.total_cmp(&a.im))
}

/// Two-sided cyclic Jacobi for Hermitian matrices. Returns unit eigenvectors
/// (columns) and real eigenvalues, unsorted.
pub(crate) fn hermitian_jacobi(a: &CMat) -> Result<(CMat, Vec<C64>)> {
    const MAX_SWEEPS: usize = 50;
    let n = a.rows();
    let mut h = a.clone();
    // enforce exact Hermitian symmetry
    for i in 0..n {
        h[(i, i)] = C64::new(h[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let z = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    let mut v = CMat::identity(n);
    let scale = h.norm_fro();
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| h[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * scale * 0.1 || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let hpq = h[(p, q)];
                let g = hpq.norm();
                if g == 0.0 {
                    continue;
                }
                let app = h[(p, p)].re;
                let aqq = h[(q, q)].re;
                if g <= f64::EPSILON * 1e-2 * (app.abs() + aqq.abs()) {
                    h[(p, q)] = ZERO;
                    h[(q, p)] = ZERO;
                    continue;
                }
                let phase = hpq / g;
                let theta = (aqq - app) / (2.0 * g);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // W = [[c, s], [-s e^{-iφ}, c e^{-iφ}]] acting on (p, q)
                let ph = phase.conj();
                let w = [[C64::new(c, 0.0), C64::new(s, 0.0)], [ph * (-s), ph * c]];
                apply_right(&mut h, p, q, &w);
                apply_left_adjoint(&mut h, p, q, &w);
                apply_right(&mut v, p, q, &w);
                h[(p, q)] = ZERO;
                h[(q, p)] = ZERO;
                h[(p, p)] = C64::new(h[(p, p)].re, 0.0);
                h[(q, q)] = C64::new(h[(q, q)].re, 0.0);
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "Hermitian Jacobi eigensolver",
            iterations: MAX_SWEEPS,
        });
    }
    let lambda = (0..n).map(|i| C64::new(h[(i, i)].re, 0.0)).collect();
    Ok((v, lambda))
}

/// `M ← M W` on columns `p, q`.
fn apply_right(m: &mut CMat, p: usize, q: usize, w: &[[C64; 2]; 2]) {
    for i in 0..m.rows() {
        let a = m[(i, p)];
        let b = m[(i, q)];
        m[(i, p)] = a * w[0][0] + b * w[1][0];
        m[(i, q)] = a * w[0][1] + b * w[1][1];
    }
}

/// `M ← W† M` on rows `p, q`.
fn apply_left_adjoint(m: &mut CMat, p: usize, q: usize, w: &[[C64; 2]; 2]) {
    for j in 0..m.cols() {
        let a = m[(p, j)];
        let b = m[(q, j)];
        m[(p, j)] = w[0][0].conj() * a + w[1][0].conj() * b;
        m[(q, j)] = w[0][1].conj() * a + w[1][1].conj() * b;
    }
}

/// Householder reduction to upper Hessenberg form: `A = Q H Q†`.
fn hessenberg(a: &CMat) -> (CMat, CMat) {
    let n = a.rows();
    let mut h = a.clone();
    let mut q = CMat::identity(n);
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = ((k + 1)..n).map(|i| h[(i, k)]).collect();
        let xnorm = norm(&x);
        if xnorm == 0.0 {
            continue;
        }
        let x0 = x[0];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = norm(&v);
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|z| *z /= vnorm);
        // H ← P H P with P = I - 2 v v† on indices k+1..n
        for j in 0..n {
            let s: C64 = v.iter().enumerate().map(|(l, vl)| vl.conj() * h[(k + 1 + l, j)]).sum();
            for (l, vl) in v.iter().enumerate() {
                h[(k + 1 + l, j)] -= vl * s * 2.0;
            }
        }
        for mat in [&mut h, &mut q] {
            for i in 0..n {
                let s: C64 = v.iter().enumerate().map(|(l, vl)| mat[(i, k + 1 + l)] * vl).sum();
                for (l, vl) in v.iter().enumerate() {
                    mat[(i, k + 1 + l)] -= s * vl.conj() * 2.0;
                }
            }
        }
        for i in (k + 2)..n {
            h[(i, k)] = ZERO;
        }
    }
    (h, q)
}

/// Complex Schur form `A = Q T Q†` by shifted QR on the Hessenberg form.
fn complex_schur(a: &CMat) -> Result<(CMat, CMat)> {
    let n = a.rows();
    let (mut h, mut q) = hessenberg(a);
    if n == 1 {
        return Ok((h, q));
    }
    let hnorm = h.norm_fro().max(f64::MIN_POSITIVE);
    let max_total = 30 * n;
    let mut total = 0;
    let mut since_deflation = 0;
    let mut hi = n - 1;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let mut s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if s == 0.0 {
                s = hnorm;
            }
            if h[(l, l - 1)].norm() <= f64::EPSILON * s {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        total += 1;
        since_deflation += 1;
        if total > max_total {
            return Err(Error::NoConvergence {
                what: "complex QR eigenvalue iteration",
                iterations: total,
            });
        }
        let mu = if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            h[(hi, hi)] + C64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        for k in l..=hi {
            h[(k, k)] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - l);
        for k in l..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..n {
                let a = h[(k, j)];
                let b = h[(k + 1, j)];
                h[(k, j)] = a * c + s * b;
                h[(k + 1, j)] = -s.conj() * a + b * c;
            }
            h[(k + 1, k)] = ZERO;
            rots.push((c, s));
        }
        for (off, &(c, s)) in rots.iter().enumerate() {
            let k = l + off;
            let rmax = (k + 2).min(hi + 1);
            for i in 0..rmax {
                let a = h[(i, k)];
                let b = h[(i, k + 1)];
                h[(i, k)] = a * c + s.conj() * b;
                h[(i, k + 1)] = -s * a + b * c;
            }
            for i in 0..n {
                let a = q[(i, k)];
                let b = q[(i, k + 1)];
                q[(i, k)] = a * c + s.conj() * b;
                q[(i, k + 1)] = -s * a + b * c;
            }
        }
        for k in l..=hi {
            h[(k, k)] += mu;
        }
    }
    Ok((h, q))
}

/// Eigenvalue of the trailing 2x2 block closest to its last diagonal entry.
fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mean = (a + d) * 0.5;
    let m1 = mean + disc;
    let m2 = mean - disc;
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

/// General complex eigensolver: Schur form, then back-substitution for the
/// eigenvectors of the triangular factor.
fn schur_eigen(a: &CMat) -> Result<(CMat, Vec<C64>)> {
    let n = a.rows();
    let (t, q) = complex_schur(a)?;
    let lambda: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let small = (f64::EPSILON * t.norm_fro()).max(f64::MIN_POSITIVE);
    let mut z = CMat::zeros(n, n);
    for k in 0..n {
        let mut col = vec![ZERO; n];
        col[k] = ONE;
        for j in (0..k).rev() {
            let mut s = ZERO;
            for l in (j + 1)..=k {
                s += t[(j, l)] * col[l];
            }
            let mut d = t[(j, j)] - lambda[k];
            if d.norm() < small {
                d = C64::new(small, 0.0);
            }
            col[j] = -s / d;
            let big = col[j].norm();
            if big > 1e100 {
                col.iter_mut().for_each(|x| *x /= big);
            }
        }
        z.set_col(k, &col);
    }
    let mut x = &q * &z;
    for k in 0..n {
        let c = x.col(k);
        let nk = norm(&c);
        x.set_col(k, &c.iter().map(|v| v / nk).collect::<Vec<_>>());
    }
    Ok((x, lambda))
}

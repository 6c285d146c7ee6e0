//! Krylov solvers for the shifted systems of the iterative paths.
//!
//! Both solvers take the operator as a closure and work on plain vectors.
//! An outer refinement loop restarts from the true residual so that the
//! returned solution is limited by conditioning, not by drift of the
//! recurrence estimate.

use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, givens, norm, C64, ZERO};

const MAX_REFINEMENTS: usize = 6;

/// Approximate inner solve `(rhs, relative tol, iteration cap) -> (x, iterations)`.
type InnerSolve<'a> = dyn FnMut(&[C64], f64, usize) -> (Vec<C64>, usize) + 'a;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn residual(op: &dyn Fn(&[C64]) -> Vec<C64>, b: &[C64], x: &[C64]) -> Vec<C64> {
    let ax = op(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

/// Refinement driver shared by both solvers. `inner` solves `op d = r`
/// approximately to the given relative tolerance and returns `(d, iters)`.
fn refine(
    what: &'static str,
    op: &dyn Fn(&[C64]) -> Vec<C64>,
    b: &[C64],
    tol: f64,
    max_iter: usize,
    inner: &mut InnerSolve,
) -> Result<(Vec<C64>, SolveStats)> {
    let bnorm = norm(b);
    let mut x = vec![ZERO; b.len()];
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    // aim well below the requested tolerance; accept anything within it
    let target = (tol * 1e-3).max(8.0 * f64::EPSILON);
    let mut iterations = 0;
    let mut r = b.to_vec();
    let mut rel = 1.0;
    for _ in 0..MAX_REFINEMENTS {
        if iterations >= max_iter {
            break;
        }
        let rnorm = norm(&r);
        let (d, its) = inner(&r, (target * bnorm / rnorm).min(0.5), max_iter - iterations);
        iterations += its;
        axpy(C64::new(1.0, 0.0), &d, &mut x);
        r = residual(op, b, &x);
        let new_rel = norm(&r) / bnorm;
        let stalled = new_rel > 0.5 * rel;
        rel = new_rel;
        if rel <= target || stalled {
            break;
        }
    }
    if rel <= tol {
        Ok((
            x,
            SolveStats {
                iterations,
                relative_residual: rel,
            },
        ))
    } else {
        Err(Error::NoConvergence { what, iterations })
    }
}

/// MINRES for a Hermitian operator. `op` must map the subspace containing `b`
/// into itself; callers re-project inside `op`.
pub(crate) fn minres(
    op: &dyn Fn(&[C64]) -> Vec<C64>,
    b: &[C64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<C64>, SolveStats)> {
    refine("MINRES", op, b, tol, max_iter, &mut |r, rtol, cap| {
        minres_pass(op, r, rtol, cap)
    })
}

fn minres_pass(op: &dyn Fn(&[C64]) -> Vec<C64>, b: &[C64], rtol: f64, max_iter: usize) -> (Vec<C64>, usize) {
    let n = b.len();
    let mut x = vec![ZERO; n];
    let beta1 = norm(b);
    if beta1 == 0.0 {
        return (x, 0);
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut w = vec![ZERO; n];
    let mut w2 = vec![ZERO; n];
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut its = 0;
    while its < max_iter {
        its += 1;
        let v: Vec<C64> = y.iter().map(|z| z / beta).collect();
        y = op(&v);
        if its >= 2 {
            axpy(C64::new(-beta / oldb, 0.0), &r1, &mut y);
        }
        let alfa = dot(&v, &y).re;
        axpy(C64::new(-alfa / beta, 0.0), &r2, &mut y);
        r1 = std::mem::replace(&mut r2, y.clone());
        oldb = beta;
        beta = norm(&y);

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - w1[i] * oldeps - w2[i] * delta) / gamma;
            x[i] += w[i] * phi;
        }
        if phibar <= rtol * beta1 || beta == 0.0 {
            break;
        }
    }
    (x, its)
}

/// Restarted GMRES for a general operator.
pub(crate) fn gmres(
    op: &dyn Fn(&[C64]) -> Vec<C64>,
    b: &[C64],
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> Result<(Vec<C64>, SolveStats)> {
    let restart = restart.max(1);
    refine("GMRES", op, b, tol, max_iter, &mut |r, rtol, cap| {
        restarted_pass(op, r, rtol, cap, restart)
    })
}

fn restarted_pass(
    op: &dyn Fn(&[C64]) -> Vec<C64>,
    b: &[C64],
    rtol: f64,
    cap: usize,
    restart: usize,
) -> (Vec<C64>, usize) {
    let bnorm = norm(b);
    let mut x = vec![ZERO; b.len()];
    let mut r = b.to_vec();
    let mut its = 0;
    while its < cap {
        let rnorm = norm(&r);
        if rnorm <= rtol * bnorm {
            break;
        }
        let (d, k) = gmres_cycle(op, &r, rtol * bnorm / rnorm, (cap - its).min(restart));
        its += k;
        axpy(C64::new(1.0, 0.0), &d, &mut x);
        let next = residual(op, b, &x);
        if k == 0 || norm(&next) >= rnorm {
            break;
        }
        r = next;
    }
    (x, its)
}

/// One GMRES cycle from a zero initial guess.
fn gmres_cycle(op: &dyn Fn(&[C64]) -> Vec<C64>, b: &[C64], rtol: f64, k_max: usize) -> (Vec<C64>, usize) {
    let n = b.len();
    let beta = norm(b);
    if beta == 0.0 || k_max == 0 {
        return (vec![ZERO; n], 0);
    }
    let mut basis: Vec<Vec<C64>> = vec![b.iter().map(|z| z / beta).collect()];
    // Hessenberg columns after rotation, i.e. the triangular factor
    let mut r_cols: Vec<Vec<C64>> = Vec::with_capacity(k_max);
    let mut rots: Vec<(f64, C64)> = Vec::with_capacity(k_max);
    let mut g = vec![C64::new(beta, 0.0)];
    let mut k = 0;
    while k < k_max {
        let mut w = op(&basis[k]);
        let mut h = vec![ZERO; k + 2];
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = dot(q, &w);
                h[i] += c;
                axpy(-c, q, &mut w);
            }
        }
        let hnext = norm(&w);
        h[k + 1] = C64::new(hnext, 0.0);
        for (i, &(c, s)) in rots.iter().enumerate() {
            let a = h[i];
            let bb = h[i + 1];
            h[i] = a * c + s * bb;
            h[i + 1] = -s.conj() * a + bb * c;
        }
        let (c, s) = givens(h[k], h[k + 1]);
        h[k] = h[k] * c + s * h[k + 1];
        h[k + 1] = ZERO;
        rots.push((c, s));
        let gk = g[k];
        g[k] = gk * c;
        g.push(-s.conj() * gk);
        h.truncate(k + 1);
        r_cols.push(h);
        k += 1;
        if g[k].norm() <= rtol * beta || hnext <= f64::EPSILON * beta {
            break;
        }
        basis.push(w.iter().map(|z| z / hnext).collect());
    }
    // back substitution on the k x k triangular factor
    let mut yv = vec![ZERO; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in (i + 1)..k {
            s -= r_cols[j][i] * yv[j];
        }
        let d = r_cols[i][i];
        yv[i] = if d == ZERO { ZERO } else { s / d };
    }
    let mut x = vec![ZERO; n];
    for (j, yj) in yv.iter().enumerate() {
        axpy(*yj, &basis[j], &mut x);
    }
    (x, k)
}

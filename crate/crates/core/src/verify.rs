//! Finite-difference oracles and randomized verification suites.
//!
//! Oracles compare gauge-invariant quantities only: singular values, the
//! projectors onto kept singular subspaces and eigenspaces, eigenvalues, and
//! eigenvectors normalized at fixed pivot rows.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::GradConfig;
use crate::decomp::{full_evd, full_svd, truncate_svd_with, FullEvd, SvdDiscarded, SvdKept};
use crate::error::{Error, Result};
use crate::generate::{complex_gaussian, haar_isometry};
use crate::iterative::{iterative_residuals, jvp_truncated_svd_iterative};
use crate::matrix::{align_phase, inverse, CMat, C64};
use crate::tevd::{
    complement_eigen_residual, jvp_truncated_evd, kept_eigen_residual, truncate_evd, EvdKept, GaugeChoice, GaugePolicy,
};
use crate::tsvd::{
    anti_hermitian_defect, cross_block_residuals, jvp_truncated_svd_explicit, kept_block_residual, projector_tangent,
    SvdTangent,
};

/// Pass thresholds used by the suites. FD errors are relative to
/// `max(‖FD estimate‖, ‖dA‖)`; residuals are relative to `‖dA‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub spectrum: f64,
    pub projector: f64,
    pub eigenvector: f64,
    pub cross_path: f64,
    pub algebraic: f64,
    pub iterative: f64,
    pub eigen_residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            spectrum: 1e-6,
            projector: 1e-5,
            eigenvector: 1e-5,
            cross_path: 1e-9,
            algebraic: 1e-12,
            iterative: 1e-10,
            eigen_residual: 1e-10,
        }
    }
}

// ---------------------------------------------------------------------------
// oracles

/// Central difference `(f(A + h dA) - f(A - h dA)) / 2h`.
pub fn fd_tangent<F>(f: F, a: &CMat, da: &CMat, h: f64) -> Result<CMat>
where
    F: Fn(&CMat) -> Result<CMat>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step {h} must be positive"
        )));
    }
    let step = da.scale_real(h);
    let plus = f(&(a + &step))?;
    let minus = f(&(a - &step))?;
    plus.try_sub(&minus).map(|d| d.scale_real(0.5 / h))
}

/// FD tangent of the leading `count` singular values, as a column.
pub fn fd_singular_values(a: &CMat, da: &CMat, count: usize, h: f64) -> Result<Vec<f64>> {
    let d = fd_tangent(
        |x| {
            let s = full_svd(x)?.s;
            let s = &s.values()[..count.min(s.len())];
            Ok(CMat::from_fn(s.len(), 1, |i, _| C64::new(s[i], 0.0)))
        },
        a,
        da,
        h,
    )?;
    Ok(d.col(0).iter().map(|z| z.re).collect())
}

/// FD tangents of the projectors `UU†` and `VV†` onto the leading `t`
/// singular subspaces.
pub fn fd_svd_projectors(a: &CMat, da: &CMat, t: usize, h: f64) -> Result<(CMat, CMat)> {
    let left = fd_tangent(
        |x| {
            let f = full_svd(x)?;
            let u = f.u.col_block(0, t);
            u.mul_adjoint(&u)
        },
        a,
        da,
        h,
    )?;
    let right = fd_tangent(
        |x| {
            let f = full_svd(x)?;
            let v = f.v.col_block(0, t);
            v.mul_adjoint(&v)
        },
        a,
        da,
        h,
    )?;
    Ok((left, right))
}

/// Eigenpairs of `a` paired with `reference` eigenvalues by nearest distance,
/// each reference taking a distinct partner.
fn matched_eigenpairs(a: &CMat, reference: &[C64]) -> Result<(Vec<C64>, CMat)> {
    let full = full_evd(a)?;
    let mut used = vec![false; full.lambda.len()];
    let mut lambda = Vec::with_capacity(reference.len());
    let mut idx = Vec::with_capacity(reference.len());
    for r in reference {
        let (best, _) = full
            .lambda
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, l)| (i, (l - r).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .ok_or_else(|| Error::Precondition("more reference eigenvalues than eigenpairs".into()))?;
        used[best] = true;
        lambda.push(full.lambda[best]);
        idx.push(best);
    }
    Ok((lambda, full.x.select_cols(&idx)))
}

/// FD tangent of the eigenvalues matched to `kept`.
pub fn fd_eigenvalues(a: &CMat, da: &CMat, kept: &EvdKept, h: f64) -> Result<Vec<C64>> {
    let d = fd_tangent(
        |x| matched_eigenpairs(x, kept.lambda()).map(|(l, _)| CMat::column(&l)),
        a,
        da,
        h,
    )?;
    Ok(d.col(0))
}

/// FD tangent of the matched eigenvectors, each scaled to 1 at the pivot row
/// of `gauge`.
pub fn fd_pivot_eigenvectors(a: &CMat, da: &CMat, kept: &EvdKept, gauge: &GaugeChoice, h: f64) -> Result<CMat> {
    fd_tangent(
        |x| {
            let (_, vecs) = matched_eigenpairs(x, kept.lambda())?;
            Ok(pivot_normalize(&vecs, &gauge.pivots))
        },
        a,
        da,
        h,
    )
}

fn pivot_normalize(x: &CMat, pivots: &[usize]) -> CMat {
    let scale: Vec<C64> = pivots.iter().enumerate().map(|(k, &m)| x[(m, k)].inv()).collect();
    x.scale_cols_complex(&scale)
}

/// Orthogonal projector onto the column span of `x`.
fn span_projector(x: &CMat) -> Result<CMat> {
    let gram = x.adjoint_mul(x)?;
    Ok(x * &inverse(&gram)?.mul_adjoint(x)?)
}

/// FD tangent of the orthogonal projector onto the span of the matched
/// eigenvectors.
pub fn fd_eigen_projector(a: &CMat, da: &CMat, kept: &EvdKept, h: f64) -> Result<CMat> {
    fd_tangent(
        |x| {
            let (_, vecs) = matched_eigenpairs(x, kept.lambda())?;
            span_projector(&vecs)
        },
        a,
        da,
        h,
    )
}

/// Tangent of the orthogonal projector onto `span(x)` given `dx`:
/// `(1 - Π) dx (x†x)⁻¹ x† + h.c.`
pub fn span_projector_tangent(x: &CMat, dx: &CMat) -> Result<CMat> {
    let pi = span_projector(x)?;
    let gram_inv = inverse(&x.adjoint_mul(x)?)?;
    let outside = dx - &(&pi * dx);
    let half = &outside * &gram_inv.mul_adjoint(x)?;
    Ok(&half + &half.adjoint())
}

/// Multiplies a nonzero column by the unit phase that makes its
/// largest-modulus entry real and positive.
pub fn phase_align(column: &[C64]) -> Result<(Vec<C64>, C64)> {
    align_phase(column).ok_or_else(|| Error::Precondition("cannot phase-align a zero column".into()))
}

// ---------------------------------------------------------------------------
// instances

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Case {
    SvdSquare,
    SvdTall,
    SvdWide,
    SvdIterative,
    Evd,
}

impl Case {
    pub const ALL: [Case; 5] = [
        Case::SvdSquare,
        Case::SvdTall,
        Case::SvdWide,
        Case::SvdIterative,
        Case::Evd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Case::SvdSquare => "svd-square",
            Case::SvdTall => "svd-tall",
            Case::SvdWide => "svd-wide",
            Case::SvdIterative => "svd-iterative",
            Case::Evd => "evd",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Case::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown case '{s}'")))
    }
}

pub const MIN_DIM: usize = 4;
pub const MAX_DIM: usize = 16;
pub const SPECTRUM_LOW: f64 = 0.1;
pub const SPECTRUM_HIGH: f64 = 10.0;

/// Per-trial generator: the suite seed selects the key, the trial index the
/// stream, so trials are independent of execution order.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// `count` values, log-uniform over `[low, high]`, one drawn from the central
/// half of each of `count` equal log-strata, in decreasing order. Adjacent
/// values differ by a factor of at least `(high/low)^(1/(2 count))`.
pub fn stratified_spectrum<R: Rng + ?Sized>(rng: &mut R, count: usize, low: f64, high: f64) -> Vec<f64> {
    let (l0, l1) = (low.ln(), high.ln());
    let width = (l1 - l0) / count as f64;
    (0..count)
        .rev()
        .map(|k| {
            let u: f64 = rng.random();
            (l0 + width * (k as f64 + 0.25 + 0.5 * u)).exp()
        })
        .collect()
}

/// Random shape for a case, dimensions in `[MIN_DIM, MAX_DIM]`.
pub fn random_shape<R: Rng + ?Sized>(rng: &mut R, case: Case) -> (usize, usize) {
    match case {
        Case::SvdSquare | Case::Evd => {
            let n = rng.random_range(MIN_DIM..=MAX_DIM);
            (n, n)
        }
        Case::SvdTall => {
            let n = rng.random_range(MIN_DIM + 1..=MAX_DIM);
            (n, rng.random_range(MIN_DIM..n))
        }
        Case::SvdWide => {
            let (n, m) = random_shape(rng, Case::SvdTall);
            (m, n)
        }
        Case::SvdIterative => {
            let sub = [Case::SvdSquare, Case::SvdTall, Case::SvdWide][rng.random_range(0..3)];
            random_shape(rng, sub)
        }
    }
}

/// `n x m` matrix with a stratified spectrum and Haar singular vectors.
pub fn svd_instance<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> CMat {
    let r = n.min(m);
    let s = stratified_spectrum(rng, r, SPECTRUM_LOW, SPECTRUM_HIGH);
    let u = haar_isometry(rng, n, r);
    let v = haar_isometry(rng, m, r);
    &u.scale_cols(&s) * &v.adjoint()
}

/// Diagonalizable non-normal `n x n` matrix `X diag(λ) X⁻¹` with
/// `X = 1 + 0.3 G / sqrt(n)`, stratified eigenvalue moduli and random phases.
pub fn evd_instance<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let moduli = stratified_spectrum(rng, n, SPECTRUM_LOW, SPECTRUM_HIGH);
    let lambda: Vec<C64> = moduli
        .iter()
        .map(|&r| C64::from_polar(r, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)))
        .collect();
    loop {
        let g = complex_gaussian(rng, n, n);
        let x = &CMat::identity(n) + &g.scale_real(0.3 / (n as f64).sqrt());
        if let Ok(xi) = inverse(&x) {
            return &x.scale_cols_complex(&lambda) * &xi;
        }
    }
}

/// Complex Gaussian direction of unit Frobenius norm.
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> CMat {
    let d = complex_gaussian(rng, n, m);
    d.scale_real(1.0 / d.norm_fro())
}

// ---------------------------------------------------------------------------
// reports

/// Relative errors against the oracles; absent quantities do not apply to
/// the case.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuantityErrors {
    pub ds: Option<f64>,
    pub left_projector: Option<f64>,
    pub right_projector: Option<f64>,
    pub dlambda: Option<f64>,
    pub dx: Option<f64>,
    pub eigen_projector: Option<f64>,
    pub cross_path: Option<f64>,
}

/// Residual norms of the defining relations, divided by `‖dA‖_F`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub kept_block: Option<f64>,
    pub cross_upper: Option<f64>,
    pub cross_lower: Option<f64>,
    pub anti_hermitian: Option<f64>,
    pub iterative_left: Option<f64>,
    pub iterative_right: Option<f64>,
    pub kept_eigen: Option<f64>,
    pub complement_eigen: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    pub case: Case,
    pub seed: u64,
    pub trial: usize,
    pub rows: usize,
    pub cols: usize,
    /// Kept count `t` (SVD) or `p` (EVD).
    pub kept: usize,
    pub fd_step: f64,
    pub errors: QuantityErrors,
    pub residuals: Residuals,
    pub passed: bool,
    /// Error raised by the trial, if any.
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteOptions {
    /// Fixed `(rows, cols)`; random per trial when absent.
    pub shape: Option<(usize, usize)>,
    /// Fixed kept count; random in `[1, min(rows, cols) - 1]` when absent.
    pub kept: Option<usize>,
    pub record_time: bool,
    pub tolerances: Tolerances,
    pub gauge: GaugePolicy,
}

pub fn run_suite(case: Case, trials: usize, cfg: &GradConfig, seed: u64) -> Vec<FdReport> {
    run_suite_with(case, trials, cfg, seed, &SuiteOptions::default())
}

pub fn run_suite_with(case: Case, trials: usize, cfg: &GradConfig, seed: u64, opts: &SuiteOptions) -> Vec<FdReport> {
    (0..trials)
        .into_par_iter()
        .map(|trial| run_trial(case, trial, cfg, seed, opts))
        .collect()
}

fn run_trial(case: Case, trial: usize, cfg: &GradConfig, seed: u64, opts: &SuiteOptions) -> FdReport {
    let start = Instant::now();
    let mut rng = trial_rng(seed, trial);
    let (rows, cols) = opts.shape.unwrap_or_else(|| random_shape(&mut rng, case));
    let r = rows.min(cols);
    let kept = opts
        .kept
        .unwrap_or_else(|| if r > 1 { rng.random_range(1..r) } else { 1 });
    let mut report = FdReport {
        case,
        seed,
        trial,
        rows,
        cols,
        kept,
        fd_step: 0.0,
        errors: QuantityErrors::default(),
        residuals: Residuals::default(),
        passed: false,
        failure: None,
        wall_time_ms: None,
    };
    let outcome = match case {
        Case::Evd => evd_trial(&mut rng, &mut report, cfg, opts),
        _ => svd_trial(&mut rng, &mut report, cfg, opts),
    };
    match outcome {
        Ok(()) => report.passed = judge(&report, &opts.tolerances),
        Err(e) => report.failure = Some(format!("{}: {e}", e.name())),
    }
    if opts.record_time {
        report.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    report
}

fn rel(diff: f64, oracle: f64, da_norm: f64) -> f64 {
    diff / oracle.max(da_norm)
}

fn vec_diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn svd_fd_errors(
    a: &CMat,
    da: &CMat,
    kept: &SvdKept,
    tan: &SvdTangent,
    h: f64,
    errors: &mut QuantityErrors,
) -> Result<()> {
    let t = kept.t();
    let dn = da.norm_fro();
    let fd_s = fd_singular_values(a, da, t, h)?;
    let zero = vec![0.0; t];
    errors.ds = Some(rel(
        vec_diff_norm(tan.ds.values(), &fd_s),
        vec_diff_norm(&fd_s, &zero),
        dn,
    ));
    let (fd_l, fd_r) = fd_svd_projectors(a, da, t, h)?;
    let an_l = projector_tangent(kept.u(), &tan.du);
    let an_r = projector_tangent(kept.v(), &tan.dv);
    errors.left_projector = Some(rel((&an_l - &fd_l).norm_fro(), fd_l.norm_fro(), dn));
    errors.right_projector = Some(rel((&an_r - &fd_r).norm_fro(), fd_r.norm_fro(), dn));
    Ok(())
}

fn split_svd(a: &CMat, t: usize, cfg: &GradConfig) -> Result<(SvdKept, SvdDiscarded)> {
    truncate_svd_with(&full_svd(a)?, t, cfg)
}

fn svd_trial(rng: &mut ChaCha8Rng, report: &mut FdReport, cfg: &GradConfig, _opts: &SuiteOptions) -> Result<()> {
    let a = svd_instance(rng, report.rows, report.cols);
    let da = unit_direction(rng, report.rows, report.cols);
    let h = cfg.fd_step_for(a.norm_fro());
    report.fd_step = h;
    let dn = da.norm_fro();
    let (kept, disc) = split_svd(&a, report.kept, cfg)?;
    let explicit = jvp_truncated_svd_explicit(&kept, &disc, &da, cfg)?;
    let res = &mut report.residuals;
    res.kept_block = Some(kept_block_residual(&kept, &da, &explicit) / dn);
    res.anti_hermitian = Some(anti_hermitian_defect(&explicit) / dn);
    let (up, low) = cross_block_residuals(&kept, &disc, &da, &explicit);
    res.cross_upper = Some(up / dn);
    res.cross_lower = Some(low / dn);

    if report.case == Case::SvdIterative {
        let it = jvp_truncated_svd_iterative(&a, &kept, &da, cfg)?;
        let (l, r) = iterative_residuals(&a, &kept, &da, &it);
        report.residuals.iterative_left = Some(l / dn);
        report.residuals.iterative_right = Some(r / dn);
        let du = (&it.du - &explicit.du).norm_fro();
        let dv = (&it.dv - &explicit.dv).norm_fro();
        let ds = vec_diff_norm(it.ds.values(), explicit.ds.values());
        report.errors.cross_path = Some(du.max(dv).max(ds) / dn);
        svd_fd_errors(&a, &da, &kept, &it, h, &mut report.errors)
    } else {
        svd_fd_errors(&a, &da, &kept, &explicit, h, &mut report.errors)
    }
}

fn evd_trial(rng: &mut ChaCha8Rng, report: &mut FdReport, cfg: &GradConfig, opts: &SuiteOptions) -> Result<()> {
    let n = report.rows;
    if report.cols != n {
        return Err(Error::InvalidDimensions(format!(
            "EVD trials need square shapes, got {n}x{}",
            report.cols
        )));
    }
    let a = evd_instance(rng, n);
    let da = unit_direction(rng, n, n);
    let h = cfg.fd_step_for(a.norm_fro());
    report.fd_step = h;
    let dn = da.norm_fro();
    let full: FullEvd = full_evd(&a)?;
    let kept = truncate_evd(&full, report.kept, cfg)?;
    let tan = jvp_truncated_evd(&a, &kept, &da, opts.gauge, cfg)?;

    let gmax = tan.gauge.gamma.iter().map(|g| g.norm()).fold(1.0, f64::max);
    let res = &mut report.residuals;
    res.kept_eigen = Some(kept_eigen_residual(&kept, &da, &tan) / (dn * gmax * (1.0 + tan.dx.norm_fro())));
    res.complement_eigen = Some(complement_eigen_residual(&a, &kept, &da, &tan) / (dn * gmax * (1.0 + a.norm_fro())));

    let fd_l = fd_eigenvalues(&a, &da, &kept, h)?;
    let diff: f64 = fd_l
        .iter()
        .zip(&tan.dlambda)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let size: f64 = fd_l.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    report.errors.dlambda = Some(rel(diff, size, dn));

    let fd_x = fd_pivot_eigenvectors(&a, &da, &kept, &tan.gauge, h)?;
    report.errors.dx = Some(rel((&fd_x - &tan.dx).norm_fro(), fd_x.norm_fro(), dn));

    let fixed = tan.gauge.apply(kept.x());
    let an_p = span_projector_tangent(&fixed, &tan.dx)?;
    let fd_p = fd_eigen_projector(&a, &da, &kept, h)?;
    report.errors.eigen_projector = Some(rel((&an_p - &fd_p).norm_fro(), fd_p.norm_fro(), dn));
    Ok(())
}

fn judge(report: &FdReport, tol: &Tolerances) -> bool {
    let e = &report.errors;
    let r = &report.residuals;
    let checks: [(Option<f64>, f64); 15] = [
        (e.ds, tol.spectrum),
        (e.left_projector, tol.projector),
        (e.right_projector, tol.projector),
        (e.dlambda, tol.spectrum),
        (e.dx, tol.eigenvector),
        (e.eigen_projector, tol.projector),
        (e.cross_path, tol.cross_path),
        (r.kept_block, tol.algebraic),
        (r.cross_upper, tol.algebraic),
        (r.cross_lower, tol.algebraic),
        (r.anti_hermitian, tol.algebraic),
        (r.iterative_left, tol.iterative),
        (r.iterative_right, tol.iterative),
        (r.kept_eigen, tol.eigen_residual),
        (r.complement_eigen, tol.eigen_residual),
    ];
    checks
        .iter()
        .all(|(v, t)| v.is_none_or(|x| x.is_finite() && x >= 0.0 && x <= *t))
}

/// Aggregate view of a report list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub case: Option<Case>,
    pub trials: usize,
    pub passed: usize,
    pub failed_trials: Vec<usize>,
    pub max_errors: QuantityErrors,
    pub max_residuals: Residuals,
}

fn fold_max(acc: &mut Option<f64>, v: Option<f64>) {
    if let Some(v) = v {
        *acc = Some(acc.map_or(v, |a| a.max(v)));
    }
}

pub fn summarize(reports: &[FdReport]) -> SuiteSummary {
    let mut e = QuantityErrors::default();
    let mut r = Residuals::default();
    for rep in reports {
        let x = &rep.errors;
        fold_max(&mut e.ds, x.ds);
        fold_max(&mut e.left_projector, x.left_projector);
        fold_max(&mut e.right_projector, x.right_projector);
        fold_max(&mut e.dlambda, x.dlambda);
        fold_max(&mut e.dx, x.dx);
        fold_max(&mut e.eigen_projector, x.eigen_projector);
        fold_max(&mut e.cross_path, x.cross_path);
        let y = &rep.residuals;
        fold_max(&mut r.kept_block, y.kept_block);
        fold_max(&mut r.cross_upper, y.cross_upper);
        fold_max(&mut r.cross_lower, y.cross_lower);
        fold_max(&mut r.anti_hermitian, y.anti_hermitian);
        fold_max(&mut r.iterative_left, y.iterative_left);
        fold_max(&mut r.iterative_right, y.iterative_right);
        fold_max(&mut r.kept_eigen, y.kept_eigen);
        fold_max(&mut r.complement_eigen, y.complement_eigen);
    }
    let case = reports
        .first()
        .map(|r| r.case)
        .filter(|c| reports.iter().all(|r| r.case == *c));
    SuiteSummary {
        case,
        trials: reports.len(),
        passed: reports.iter().filter(|r| r.passed).count(),
        failed_trials: reports.iter().filter(|r| !r.passed).map(|r| r.trial).collect(),
        max_errors: e,
        max_residuals: r,
    }
}

impl fmt::Display for SuiteSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let case = self.case.map_or("mixed", Case::as_str);
        writeln!(f, "case {case}: {}/{} trials passed", self.passed, self.trials)?;
        let e = &self.max_errors;
        let r = &self.max_residuals;
        let rows: [(&str, Option<f64>); 15] = [
            ("dS", e.ds),
            ("d(UU†)", e.left_projector),
            ("d(VV†)", e.right_projector),
            ("dλ", e.dlambda),
            ("dx", e.dx),
            ("eigenspace projector", e.eigen_projector),
            ("explicit vs iterative", e.cross_path),
            ("kept block residual", r.kept_block),
            ("cross residual (upper)", r.cross_upper),
            ("cross residual (lower)", r.cross_lower),
            ("anti-Hermitian defect", r.anti_hermitian),
            ("iterative residual (left)", r.iterative_left),
            ("iterative residual (right)", r.iterative_right),
            ("kept eigen residual", r.kept_eigen),
            ("complement eigen residual", r.complement_eigen),
        ];
        for (name, v) in rows {
            if let Some(v) = v {
                writeln!(f, "  max {name:<28} {v:.3e}")?;
            }
        }
        if !self.failed_trials.is_empty() {
            writeln!(f, "  failed trials: {:?}", self.failed_trials)?;
        }
        Ok(())
    }
}

/// The report list as one JSON document with a stable field order.
pub fn reports_to_json(reports: &[FdReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports are always serializable")
}

//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use truncjvp::config::{DegeneracyPolicy, GradConfig, SolverKind};
use truncjvp::decomp::{full_evd, full_svd, truncate_svd_with, SvdKept};
use truncjvp::generate::{gen_matrix, MatrixSeed, SeedKind};
use truncjvp::iterative::{jvp_truncated_svd_iterative, solve_sylvester_projected, ShiftedSystem, Side};
use truncjvp::matrix::{orthonormal_complement, solve, CMat, C64};
use truncjvp::tevd::{dlambda, jvp_truncated_evd, truncate_evd, GaugePolicy};
use truncjvp::tsvd::{
    anti_hermitian_defect, cross_block_residuals, jvp_truncated_svd_explicit, kept_block_residual,
    reconstruction_tangent, tall_correction,
};
use truncjvp::verify::{
    evd_instance, run_suite_with, summarize, svd_instance, trial_rng, unit_direction, Case, SuiteOptions,
};
use truncjvp::Error;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn real(rows: &[&[f64]]) -> CMat {
    CMat::from_real_rows(rows)
}

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

const SHAPES: [(&str, usize, usize); 3] = [("square", 8, 8), ("tall", 12, 5), ("wide", 5, 12)];

fn algebraic_residuals() -> Outcome {
    let cfg = GradConfig::default();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, n, m) in SHAPES {
        let r = n.min(m);
        let mut case_worst = 0.0f64;
        for seed in 0..100u64 {
            let a = gen_matrix(&MatrixSeed::complex(1000 + seed), n, m).unwrap();
            let da = gen_matrix(&MatrixSeed::complex(5000 + seed), n, m).unwrap();
            let t = 1 + (seed as usize) % (r - 1);
            let (kept, disc) = truncate_svd_with(&full_svd(&a).unwrap(), t, &cfg).unwrap();
            let tan = jvp_truncated_svd_explicit(&kept, &disc, &da, &cfg).unwrap();
            let (up, low) = cross_block_residuals(&kept, &disc, &da, &tan);
            let res = max_of([
                kept_block_residual(&kept, &da, &tan),
                up,
                low,
                anti_hermitian_defect(&tan),
            ]);
            case_worst = case_worst.max(res / da.norm_fro());
        }
        parts.push(format!("{name} {case_worst:.1e}"));
        worst = worst.max(case_worst);
    }
    outcome(
        worst <= 1e-12,
        format!("max residual / ‖dA‖: {} (limit 1e-12)", parts.join(", ")),
    )
}

fn finite_differences() -> Outcome {
    let cfg = GradConfig::default();
    let opts = SuiteOptions::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for case in [Case::SvdSquare, Case::SvdTall, Case::SvdWide, Case::Evd] {
        let reps = run_suite_with(case, 100, &cfg, 2024, &opts);
        let s = summarize(&reps);
        let e = &s.max_errors;
        let spectral = e.ds.or(e.dlambda).unwrap_or(f64::INFINITY);
        let proj = match case {
            Case::Evd => e.eigen_projector.unwrap_or(f64::INFINITY),
            _ => e
                .left_projector
                .unwrap_or(f64::INFINITY)
                .max(e.right_projector.unwrap_or(f64::INFINITY)),
        };
        let failed = reps.iter().filter(|r| r.failure.is_some()).count();
        ok &= failed == 0 && spectral <= 1e-6 && proj <= 1e-5;
        parts.push(format!("{case} spectrum {spectral:.1e} projector {proj:.1e}"));
    }
    outcome(ok, format!("{} (limits 1e-6, 1e-5)", parts.join("; ")))
}

fn cross_path() -> Outcome {
    let mut worst = 0.0f64;
    let mut failures = 0;
    for alpha in [0.5, 1.0] {
        let cfg = GradConfig::default().with_alpha(alpha);
        for (_, n, m) in SHAPES {
            let opts = SuiteOptions {
                shape: Some((n, m)),
                ..SuiteOptions::default()
            };
            let reps = run_suite_with(Case::SvdIterative, 50, &cfg, 77, &opts);
            failures += reps.iter().filter(|r| r.failure.is_some()).count();
            worst = worst.max(max_of(
                reps.iter().map(|r| r.errors.cross_path.unwrap_or(f64::INFINITY)),
            ));
        }
    }
    outcome(
        failures == 0 && worst <= 1e-9,
        format!("max ‖explicit - iterative‖ / ‖dA‖ = {worst:.1e} over 300 trials (limit 1e-9)"),
    )
}

/// Independent oracle: explicit complement basis and LU on the reduced system.
fn complement_oracle(a: &CMat, side: Side, basis: &CMat, shift: f64, rhs: &[C64]) -> Vec<C64> {
    let q = orthonormal_complement(basis);
    let m = match side {
        Side::Left => a.clone(),
        Side::Right => a.adjoint(),
    };
    let w = q.adjoint_mul(&m).unwrap();
    let reduced = &CMat::identity(q.cols()).scale_real(shift) - &w.mul_adjoint(&w).unwrap();
    let y = solve(&reduced, &CMat::column(&q.adjoint_mul_vec(rhs))).unwrap();
    q.mul_vec(&y.col(0))
}

fn sylvester_contracts() -> Outcome {
    let cfg = GradConfig::default().with_solver_tol(1e-10);
    let mut solve_err = 0.0f64;
    let mut ortho = 0.0f64;
    for (trial, (n, m)) in [(16, 16), (16, 9), (9, 16), (12, 12), (6, 6)].into_iter().enumerate() {
        let mut rng = trial_rng(31, trial);
        let a = svd_instance(&mut rng, n, m);
        let da = unit_direction(&mut rng, n, m);
        let r = n.min(m);
        for t in [1, r / 2, r - 1] {
            let (kept, _) = truncate_svd_with(&full_svd(&a).unwrap(), t, &cfg).unwrap();
            let scale = kept.s().values()[0].powi(2);
            for (side, basis) in [(Side::Left, kept.u()), (Side::Right, kept.v())] {
                let dim = basis.rows();
                for j in 0..t {
                    let rhs = unit_direction(&mut rng, dim, 1).col(0);
                    let shift = kept.s().values()[j].powi(2);
                    let sys = ShiftedSystem {
                        a: &a,
                        side,
                        basis,
                        shift,
                        rhs: rhs.clone(),
                        scale,
                        column: j,
                    };
                    let x = solve_sylvester_projected(&sys, &cfg).unwrap();
                    let want = complement_oracle(&a, side, basis, shift, &rhs);
                    let diff: f64 = x.iter().zip(&want).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
                    let size: f64 = want.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt();
                    solve_err = solve_err.max(diff / size);
                }
            }
            let tan = jvp_truncated_svd_iterative(&a, &kept, &da, &cfg).unwrap();
            ortho = ortho.max(kept_orthogonality(&kept, &tan.blocks.du2, &tan.blocks.dv2));
        }
    }
    let mut evd_err = 0.0f64;
    let mut evd_ortho = 0.0f64;
    for (trial, n) in [16usize, 12, 8].into_iter().enumerate() {
        let mut rng = trial_rng(32, trial);
        let a = evd_instance(&mut rng, n);
        let da = unit_direction(&mut rng, n, n);
        for p in [1, n / 2, n - 1] {
            let kept = truncate_evd(&full_evd(&a).unwrap(), p, &cfg).unwrap();
            let tan = jvp_truncated_evd(&a, &kept, &da, GaugePolicy::MaxProduct, &cfg).unwrap();
            let dx2 = &tan.blocks.dx2;
            evd_ortho = evd_ortho.max((kept.y() * dx2).norm_fro());
            // null(ȳ) is A-invariant and equals the range of 1 - x̄ȳ
            let q = orthonormal_complement(&orthonormalize_rows(kept.y()));
            let proj = &CMat::identity(n) - &(kept.x() * kept.y());
            for k in 0..p {
                let b = proj.mul_vec(&(&da * kept.x()).col(k));
                let b: Vec<C64> = b.iter().map(|z| z * tan.gauge.gamma[k]).collect();
                let shifted = &CMat::identity(n).scale(kept.lambda()[k]) - &a;
                let reduced = q.adjoint_mul(&(&shifted * &q)).unwrap();
                let w = solve(&reduced, &CMat::column(&q.adjoint_mul_vec(&b))).unwrap();
                let want = q.mul_vec(&w.col(0));
                let got = dx2.col(k);
                let diff: f64 = got
                    .iter()
                    .zip(&want)
                    .map(|(p, q)| (p - q).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                let size: f64 = want.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
                evd_err = evd_err.max(diff / size);
            }
        }
    }
    let passed = solve_err <= 1e-10 && evd_err <= 1e-10 && ortho <= 1e-11 && evd_ortho <= 1e-11;
    outcome(
        passed,
        format!(
            "SVD solve {solve_err:.1e}, EVD solve {evd_err:.1e} (limit 1e-10); \
             ‖U†dU₂‖,‖V†dV₂‖ {ortho:.1e}, ‖ȳdx₂‖ {evd_ortho:.1e} (limit 1e-11)"
        ),
    )
}

/// Orthonormal basis of the row span of `y`, as columns.
fn orthonormalize_rows(y: &CMat) -> CMat {
    truncjvp::matrix::orthonormalize(&y.adjoint()).unwrap()
}

fn kept_orthogonality(kept: &SvdKept, du2: &CMat, dv2: &CMat) -> f64 {
    let l = kept.u().adjoint_mul(du2).unwrap().norm_fro();
    let r = kept.v().adjoint_mul(dv2).unwrap().norm_fro();
    l.max(r)
}

fn worked_instances() -> Outcome {
    let cfg = GradConfig::default();
    let a = real(&[&[2.0, 0.0], &[0.0, 1.0]]);
    let da = real(&[&[0.0, 0.0], &[1.0, 0.0]]);
    let (kept, disc) = truncate_svd_with(&full_svd(&a).unwrap(), 1, &cfg).unwrap();
    let want_u = real(&[&[0.0], &[2.0 / 3.0]]);
    let want_v = real(&[&[0.0], &[1.0 / 3.0]]);
    let mut worst = 0.0f64;
    let explicit = jvp_truncated_svd_explicit(&kept, &disc, &da, &cfg).unwrap();
    let iterative = jvp_truncated_svd_iterative(&a, &kept, &da, &cfg).unwrap();
    for tan in [&explicit, &iterative] {
        worst = worst
            .max((&tan.du - &want_u).norm_fro())
            .max((&tan.dv - &want_v).norm_fro())
            .max(tan.ds.values()[0].abs());
    }

    let evd_kept = truncate_evd(&full_evd(&a).unwrap(), 1, &cfg).unwrap();
    let evd = jvp_truncated_evd(&a, &evd_kept, &da, GaugePolicy::MaxProduct, &cfg).unwrap();
    let evd_err = (&evd.dx - &real(&[&[0.0], &[1.0]]))
        .norm_fro()
        .max(evd.dlambda[0].norm());

    let col = real(&[&[2.0], &[0.0], &[0.0]]);
    let (kc, dc) = truncate_svd_with(&full_svd(&col).unwrap(), 1, &cfg).unwrap();
    let corr = tall_correction(&kc, &dc, &real(&[&[0.0], &[0.0], &[1.0]])).unwrap();
    let tall_err = (&corr - &real(&[&[0.0], &[0.0], &[0.5]])).norm_fro();

    let passed = worst <= 1e-15 && evd_err <= 1e-15 && tall_err <= 1e-15;
    outcome(
        passed,
        format!("SVD (both paths) {worst:.1e}, EVD {evd_err:.1e}, tall correction {tall_err:.1e} (limit 1e-15)"),
    )
}

fn full_rank_reconstruction() -> Outcome {
    let cfg = GradConfig::default();
    let mut worst = 0.0f64;
    for trial in 0..50usize {
        let mut rng = trial_rng(6, trial);
        let n = 4 + trial % 9;
        let a = svd_instance(&mut rng, n, n);
        let da = unit_direction(&mut rng, n, n);
        let (kept, disc) = truncate_svd_with(&full_svd(&a).unwrap(), n, &cfg).unwrap();
        let tan = jvp_truncated_svd_explicit(&kept, &disc, &da, &cfg).unwrap();
        let err = (&reconstruction_tangent(&kept, &tan) - &da).norm_fro() / da.norm_fro();
        worst = worst.max(err);
    }
    outcome(
        worst <= 1e-10,
        format!("max reconstruction error / ‖dA‖ = {worst:.1e} over 50 trials (limit 1e-10)"),
    )
}

fn evd_gauge() -> Outcome {
    let cfg = GradConfig::default();
    let mut nonzero_pivots = 0;
    let mut worst = 0.0f64;
    for trial in 0..50usize {
        let mut rng = trial_rng(7, trial);
        let n = 4 + trial % 13;
        let a = evd_instance(&mut rng, n);
        let da = unit_direction(&mut rng, n, n);
        let p = 1 + trial % (n - 1);
        let kept = truncate_evd(&full_evd(&a).unwrap(), p, &cfg).unwrap();
        for policy in [GaugePolicy::MaxAbsX, GaugePolicy::MaxProduct] {
            let tan = jvp_truncated_evd(&a, &kept, &da, policy, &cfg).unwrap();
            for (k, &m) in tan.gauge.pivots.iter().enumerate() {
                if tan.dx[(m, k)] != C64::new(0.0, 0.0) {
                    nonzero_pivots += 1;
                }
            }
        }
        let base = dlambda(&kept, &da).unwrap();
        let cs: Vec<C64> = (0..p)
            .map(|k| C64::from_polar(0.25 + 0.6 * k as f64, 1.3 * k as f64 - 0.4))
            .collect();
        let scaled = dlambda(&kept.rescaled(&cs).unwrap(), &da).unwrap();
        for (x, y) in scaled.iter().zip(&base) {
            worst = worst.max((x - y).norm() / y.norm().max(f64::MIN_POSITIVE));
        }
    }
    outcome(
        nonzero_pivots == 0 && worst <= 1e-12,
        format!("{nonzero_pivots} nonzero pivot entries; dλ rescaling drift {worst:.1e} (limit 1e-12)"),
    )
}

fn degeneracy_guards() -> Outcome {
    let strict = GradConfig::default();
    let broad = GradConfig::default().with_policy(DegeneracyPolicy::Lorentzian { eps_b: 1e-6 });
    let mut ok = true;
    for (n, m) in [(6, 6), (8, 5), (5, 8)] {
        let a = gen_matrix(&MatrixSeed::new(3, SeedKind::NearDegenerate { gap: 1e-13 }), n, m).unwrap();
        let da = gen_matrix(&MatrixSeed::complex(4), n, m).unwrap();
        let full = full_svd(&a).unwrap();
        // the near-degenerate pair sits inside the kept block
        let (kept, disc) = truncate_svd_with(&full, 3, &strict).unwrap();
        let strict_ok = matches!(
            jvp_truncated_svd_explicit(&kept, &disc, &da, &strict),
            Err(Error::DegenerateSpectrum { .. })
        ) && matches!(
            jvp_truncated_svd_iterative(&a, &kept, &da, &strict),
            Err(Error::DegenerateSpectrum { .. })
        );
        ok &= strict_ok;
        for t in [1, 3] {
            let (kept, disc) = truncate_svd_with(&full, t, &broad).unwrap();
            let tangents = [
                jvp_truncated_svd_explicit(&kept, &disc, &da, &broad),
                jvp_truncated_svd_iterative(&a, &kept, &da, &broad),
                jvp_truncated_svd_iterative(&a, &kept, &da, &broad.clone().with_solver(SolverKind::Dense)),
            ];
            for tan in tangents {
                let finite = tan.is_ok_and(|t| {
                    t.du.check_finite().is_ok()
                        && t.dv.check_finite().is_ok()
                        && t.ds.values().iter().all(|x| x.is_finite())
                });
                ok &= finite;
            }
        }
    }

    let a = CMat::from_diag(&[
        C64::new(2.0, 0.0),
        C64::new(2.0 * (1.0 - 1e-13), 0.0),
        C64::new(0.5, 0.5),
        C64::new(-1.0, 0.0),
    ]);
    let da = gen_matrix(&MatrixSeed::complex(9), 4, 4).unwrap();
    let full = full_evd(&a).unwrap();
    let evd_strict = matches!(truncate_evd(&full, 1, &strict), Err(Error::DegenerateSpectrum { .. }));
    ok &= evd_strict;
    for p in [1, 2, 3] {
        let finite = truncate_evd(&full, p, &broad)
            .and_then(|kept| jvp_truncated_evd(&a, &kept, &da, GaugePolicy::MaxProduct, &broad))
            .is_ok_and(|t| t.dx.check_finite().is_ok() && t.dlambda.iter().all(|z| z.is_finite()));
        ok &= finite;
    }
    outcome(
        ok,
        "SVD and EVD at gap 1e-13: DegenerateSpectrum under the error policy, finite under lorentzian(1e-6)",
    )
}

type Criterion = (u8, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (1, "algebraic residuals", algebraic_residuals),
        (2, "finite differences", finite_differences),
        (3, "explicit vs iterative", cross_path),
        (4, "projected solves", sylvester_contracts),
        (5, "worked micro-instances", worked_instances),
        (6, "full-rank reconstruction", full_rank_reconstruction),
        (7, "EVD gauge", evd_gauge),
        (8, "degeneracy guards", degeneracy_guards),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let tag = if result.passed { "PASS" } else { "FAIL" };
        println!("criterion {id} {tag} {name}: {}", result.detail);
        failed += usize::from(!result.passed);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

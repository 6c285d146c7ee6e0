use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use truncjvp::cmx::{read_cmx_str, write_cmx_string};
use truncjvp::{CMat, C64};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_truncjvp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> CMat {
    read_cmx_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, a: &CMat) {
    fs::write(dir.join(name), write_cmx_string(a)).unwrap();
}

fn ones(n: usize, m: usize) -> CMat {
    CMat::from_fn(n, m, |_, _| C64::new(1.0, 0.0))
}

#[test]
fn gen_then_svd_recovers_spectrum() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let out = run(
        d,
        &["gen", "--kind", "prescribed", "--spectrum", "3,2,1", "--out", "A.cmx"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(d, &["svd", "--in", "A.cmx", "--out-dir", "svd"]);
    assert_eq!(code(&out), 0);
    let s = read(d, "svd/S.cmx");
    for (got, want) in s.col(0).iter().zip([3.0, 2.0, 1.0]) {
        assert!((got.re - want).abs() < 1e-10 && got.im == 0.0);
    }
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["singular_values"].as_array().unwrap().len(), 3);
}

#[test]
fn jvp_svd_diagonal_example() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "A.cmx", &CMat::from_real_diag(&[3.0, 2.0, 1.0]));
    write(d, "dA.cmx", &ones(3, 3));
    let out = run(
        d,
        &[
            "jvp-svd",
            "--in",
            "A.cmx",
            "--tangent",
            "dA.cmx",
            "--t",
            "2",
            "--mode",
            "explicit",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ds = read(d, "dS.cmx");
    assert_eq!(ds.shape(), (2, 1));
    assert!(ds.col(0).iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-14));
}

#[test]
fn explicit_and_iterative_modes_agree() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    for (seed, shape) in [
        ("1", ["--rows", "7", "--cols", "7"]),
        ("2", ["--rows", "9", "--cols", "5"]),
        ("3", ["--rows", "5", "--cols", "9"]),
    ] {
        let mut gen = vec!["gen", "--seed", seed, "--out", "A.cmx"];
        gen.extend(shape);
        assert_eq!(code(&run(d, &gen)), 0);
        let seed2 = format!("{seed}0");
        let mut gen = vec!["gen", "--seed", &seed2, "--out", "dA.cmx"];
        gen.extend(shape);
        assert_eq!(code(&run(d, &gen)), 0);
        for (mode, dir) in [("explicit", "e"), ("iterative", "i")] {
            let out = run(
                d,
                &[
                    "jvp-svd",
                    "--in",
                    "A.cmx",
                    "--tangent",
                    "dA.cmx",
                    "--t",
                    "3",
                    "--mode",
                    mode,
                    "--out-dir",
                    dir,
                ],
            );
            assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        }
        let da = read(d, "dA.cmx").norm_fro();
        for name in ["dU.cmx", "dS.cmx", "dV.cmx"] {
            let e = read(&d.join("e"), name);
            let i = read(&d.join("i"), name);
            assert!((&e - &i).norm_fro() <= 1e-9 * da, "{name}");
        }
    }
}

#[test]
fn alpha_moves_only_the_phase_split() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    run(d, &["gen", "--seed", "4", "--rows", "5", "--out", "A.cmx"]);
    run(d, &["gen", "--seed", "5", "--rows", "5", "--out", "dA.cmx"]);
    for (alpha, dir) in [("0.5", "half"), ("1", "one")] {
        let out = run(
            d,
            &[
                "jvp-svd",
                "--in",
                "A.cmx",
                "--tangent",
                "dA.cmx",
                "--t",
                "2",
                "--alpha",
                alpha,
                "--out-dir",
                dir,
            ],
        );
        assert_eq!(code(&out), 0);
    }
    let ds = (&read(&d.join("half"), "dS.cmx") - &read(&d.join("one"), "dS.cmx")).norm_fro();
    let du = (&read(&d.join("half"), "dU.cmx") - &read(&d.join("one"), "dU.cmx")).norm_fro();
    assert_eq!(ds, 0.0);
    assert!(du > 1e-6);
}

#[test]
fn jvp_evd_worked_example() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "A.cmx", &CMat::from_real_diag(&[2.0, 1.0]));
    write(d, "dA.cmx", &CMat::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]));
    let out = run(
        d,
        &[
            "jvp-evd",
            "--in",
            "A.cmx",
            "--tangent",
            "dA.cmx",
            "--p",
            "1",
            "--gauge",
            "max-abs",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(d, "dx.cmx"), CMat::from_real_rows(&[&[0.0], &[1.0]]));
    assert_eq!(read(d, "dlambda.cmx").col(0), vec![C64::new(0.0, 0.0)]);
}

#[test]
fn evd_writes_factors() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "A.cmx", &CMat::from_real_rows(&[&[0.0, 1.0], &[-2.0, -3.0]]));
    let out = run(d, &["evd", "--in", "A.cmx", "--out-dir", "o"]);
    assert_eq!(code(&out), 0);
    let mut l: Vec<f64> = read(&d.join("o"), "lambda.cmx").col(0).iter().map(|z| z.re).collect();
    l.sort_by(f64::total_cmp);
    assert!((l[0] + 2.0).abs() < 1e-12 && (l[1] + 1.0).abs() < 1e-12);
}

#[test]
fn degenerate_input_exits_one_and_broadening_recovers() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    run(
        d,
        &[
            "gen",
            "--kind",
            "near-degenerate",
            "--gap",
            "1e-13",
            "--rows",
            "6",
            "--out",
            "A.cmx",
        ],
    );
    run(d, &["gen", "--seed", "8", "--rows", "6", "--out", "dA.cmx"]);
    let out = run(d, &["jvp-svd", "--in", "A.cmx", "--tangent", "dA.cmx", "--t", "3"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("DegenerateSpectrum"));
    assert!(out.stdout.is_empty());
    let out = run(
        d,
        &[
            "jvp-svd",
            "--in",
            "A.cmx",
            "--tangent",
            "dA.cmx",
            "--t",
            "3",
            "--broaden",
            "1e-6",
        ],
    );
    assert_eq!(code(&out), 0);
    assert!(read(d, "dU.cmx").check_finite().is_ok());
}

#[test]
fn usage_and_io_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "A.cmx", &CMat::from_real_diag(&[2.0, 1.0]));
    assert_eq!(code(&run(d, &["svd", "--in", "A.cmx", "--no-such-flag"])), 2);
    assert_eq!(code(&run(d, &["svd", "--in", "missing.cmx"])), 2);
    assert_eq!(code(&run(d, &["check", "--case", "svd-everything"])), 2);
    fs::write(d.join("bad.cmx"), "cmx 2 2\n1 0\n").unwrap();
    assert_eq!(code(&run(d, &["svd", "--in", "bad.cmx"])), 2);
    write(d, "dA.cmx", &CMat::identity(3));
    assert_eq!(
        code(&run(
            d,
            &["jvp-svd", "--in", "A.cmx", "--tangent", "dA.cmx", "--t", "1"]
        )),
        2
    );
    assert_eq!(
        code(&run(
            d,
            &[
                "jvp-svd",
                "--in",
                "A.cmx",
                "--tangent",
                "A.cmx",
                "--t",
                "1",
                "--alpha",
                "2"
            ]
        )),
        2
    );
}

#[test]
fn check_suite_passes_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let out = run(
        d,
        &[
            "check",
            "--case",
            "svd-square",
            "--trials",
            "100",
            "--seed",
            "7",
            "--report",
            "r1.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("100/100"));
    run(
        d,
        &[
            "check",
            "--case",
            "svd-square",
            "--trials",
            "100",
            "--seed",
            "7",
            "--report",
            "r2.json",
        ],
    );
    let r1 = fs::read(d.join("r1.json")).unwrap();
    assert_eq!(r1, fs::read(d.join("r2.json")).unwrap());
    let doc: serde_json::Value = serde_json::from_slice(&r1).unwrap();
    let trials = doc.as_array().unwrap();
    assert_eq!(trials.len(), 100);
    assert!(trials
        .iter()
        .all(|t| t["passed"] == true && t.get("wall_time_ms").is_none()));
}

#[test]
fn check_iterative_and_evd_cases() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    for case in ["svd-iterative", "evd"] {
        let out = run(
            d,
            &[
                "check",
                "--case",
                case,
                "--trials",
                "10",
                "--seed",
                "3",
                "--format",
                "structured",
                "--time",
            ],
        );
        assert_eq!(code(&out), 0, "{case}: {}", String::from_utf8_lossy(&out.stderr));
        let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        let first = &doc[0];
        assert!(first["wall_time_ms"].is_number());
        match case {
            "evd" => assert!(first["errors"]["dx"].is_number()),
            _ => assert!(first["errors"]["cross_path"].as_f64().unwrap() <= 1e-9),
        }
    }
}

#[test]
fn check_fails_with_an_impossible_step() {
    let tmp = TempDir::new().unwrap();
    let out = run(
        tmp.path(),
        &["check", "--case", "svd-tall", "--trials", "3", "--fd-step", "0.5"],
    );
    assert_eq!(code(&out), 1);
}

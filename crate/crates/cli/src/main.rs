//! `truncjvp` command-line front end.
//!
//! Matrices go in and out as cmx files; each command prints one report to
//! stdout and diagnostics to stderr. Exit codes: 0 success, 1 numerical
//! failure (or failing `check` trials), 2 usage or I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use truncjvp::cmx::{read_cmx_str, write_cmx_string};
use truncjvp::decomp::{full_evd, full_svd, truncate_svd_with};
use truncjvp::generate::{gen_matrix, MatrixSeed, SeedKind};
use truncjvp::iterative::{gkl_partial_svd_with, jvp_truncated_svd_iterative_branch, Branch};
use truncjvp::tevd::{jvp_truncated_evd, truncate_evd, GaugePolicy};
use truncjvp::tsvd::jvp_truncated_svd_explicit;
use truncjvp::verify::{reports_to_json, run_suite_with, summarize, Case, SuiteOptions};
use truncjvp::{CMat, DegeneracyPolicy, Error, GradConfig, SolverKind, C64};

#[derive(Debug, Parser)]
#[command(name = "truncjvp", version, about = "JVPs of truncated SVD and EVD on cmx matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded random matrix.
    Gen(GenArgs),
    /// Full or truncated SVD of a matrix.
    Svd(SvdArgs),
    /// Eigendecomposition of a square matrix.
    Evd(EvdArgs),
    /// JVP of the truncated SVD along a tangent direction.
    JvpSvd(JvpSvdArgs),
    /// JVP of the truncated EVD along a tangent direction.
    JvpEvd(JvpEvdArgs),
    /// Run a seeded finite-difference verification suite.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Complex,
    Real,
    Prescribed,
    NearDegenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Explicit,
    Iterative,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BranchArg {
    Auto,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GaugeArg {
    MaxAbs,
    MaxProduct,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    Krylov,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    #[value(alias = "json")]
    Structured,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CaseArg {
    SvdSquare,
    SvdTall,
    SvdWide,
    SvdIterative,
    Evd,
}

impl From<CaseArg> for Case {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::SvdSquare => Case::SvdSquare,
            CaseArg::SvdTall => Case::SvdTall,
            CaseArg::SvdWide => Case::SvdWide,
            CaseArg::SvdIterative => Case::SvdIterative,
            CaseArg::Evd => Case::Evd,
        }
    }
}

/// Overrides of the library defaults.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// Share of the diagonal phase term assigned to dU (the rest goes to dV).
    #[arg(long)]
    alpha: Option<f64>,
    /// Relative gap below which spectral values count as degenerate.
    #[arg(long)]
    eps_deg: Option<f64>,
    /// Lorentzian broadening width; degenerate gaps then no longer fail.
    #[arg(long, value_name = "EPS")]
    broaden: Option<f64>,
    /// Central-difference step for `check`.
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long)]
    solver_tol: Option<f64>,
    #[arg(long)]
    solver_max_iter: Option<usize>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
}

impl ConfigArgs {
    fn build(&self) -> Result<GradConfig, Error> {
        let mut cfg = GradConfig::default();
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(e) = self.eps_deg {
            cfg.eps_deg = e;
        }
        if let Some(b) = self.broaden {
            cfg.degeneracy_policy = DegeneracyPolicy::Lorentzian { eps_b: b };
        }
        cfg.fd_step = self.fd_step;
        if let Some(t) = self.solver_tol {
            cfg.solver_tol = t;
        }
        if let Some(n) = self.solver_max_iter {
            cfg.solver_max_iter = n;
        }
        if let Some(s) = self.solver {
            cfg.solver = match s {
                SolverArg::Krylov => SolverKind::Krylov,
                SolverArg::Dense => SolverKind::Dense,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "complex")]
    kind: Kind,
    /// Number of rows; defaults to the spectrum length for `prescribed`.
    #[arg(long)]
    rows: Option<usize>,
    /// Number of columns; defaults to `rows`.
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated singular values for `prescribed`.
    #[arg(long, value_delimiter = ',')]
    spectrum: Vec<f64>,
    /// Relative gap of the leading pair for `near-degenerate`.
    #[arg(long, default_value_t = 1e-13)]
    gap: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SvdArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Keep only the leading `t` triples.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "structured")]
    format: Format,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct EvdArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Keep only the leading `p` eigenpairs.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "structured")]
    format: Format,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct JvpSvdArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    tangent: PathBuf,
    #[arg(long)]
    t: usize,
    #[arg(long, value_enum, default_value = "explicit")]
    mode: Mode,
    /// Which shifted systems the iterative mode solves.
    #[arg(long, value_enum, default_value = "auto")]
    branch: BranchArg,
    /// Take the kept triples from a Lanczos partial SVD instead of a full SVD
    /// (iterative mode only).
    #[arg(long)]
    partial: bool,
    /// Start-vector seed for `--partial`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "structured")]
    format: Format,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct JvpEvdArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    tangent: PathBuf,
    #[arg(long)]
    p: usize,
    #[arg(long, value_enum, default_value = "max-product")]
    gauge: GaugeArg,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "structured")]
    format: Format,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long, value_enum)]
    case: CaseArg,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed shape `ROWSxCOLS` for every trial.
    #[arg(long, value_parser = parse_shape)]
    shape: Option<(usize, usize)>,
    /// Fixed kept count for every trial.
    #[arg(long)]
    kept: Option<usize>,
    #[arg(long, value_enum, default_value = "max-product")]
    gauge: GaugeArg,
    /// Record per-trial wall time in the reports.
    #[arg(long)]
    time: bool,
    /// Write the full per-trial report document here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[command(flatten)]
    config: ConfigArgs,
}

fn parse_shape(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once('x')
        .ok_or_else(|| format!("expected ROWSxCOLS, got '{s}'"))?;
    let r = r.parse().map_err(|e| format!("rows: {e}"))?;
    let c = c.parse().map_err(|e| format!("cols: {e}"))?;
    Ok((r, c))
}

/// Failure of a command, already classified for the exit code.
enum Failure {
    Numerical(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = format!("{}: {e}", e.name());
        if e.is_numerical() {
            Failure::Numerical(msg)
        } else {
            Failure::Usage(msg)
        }
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn read_matrix(path: &Path) -> Result<CMat, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("reading {}: {e}", path.display())))?;
    read_cmx_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_matrix(path: &Path, a: &CMat) -> Result<(), Failure> {
    fs::write(path, write_cmx_string(a)).map_err(|e| Failure::Usage(format!("writing {}: {e}", path.display())))
}

/// Writes each `(name, matrix)` as `<dir>/<name>.cmx` and returns the paths.
fn write_outputs(dir: &Path, outputs: &[(&str, &CMat)]) -> Result<Value, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("creating {}: {e}", dir.display())))?;
    let mut files = serde_json::Map::new();
    for (name, m) in outputs {
        let path = dir.join(format!("{name}.cmx"));
        write_matrix(&path, m)?;
        files.insert(name.to_string(), json!(path.display().to_string()));
    }
    Ok(Value::Object(files))
}

fn real_column(v: &[f64]) -> CMat {
    CMat::from_fn(v.len(), 1, |i, _| C64::new(v[i], 0.0))
}

fn complex_json(v: &[C64]) -> Value {
    json!(v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
}

fn emit(format: Format, report: &Value) {
    match format {
        Format::Structured => println!("{}", serde_json::to_string_pretty(report).expect("json value")),
        Format::Text => {
            if let Value::Object(map) = report {
                for (k, v) in map {
                    println!("{k}: {v}");
                }
            }
        }
    }
}

fn cmd_gen(args: &GenArgs) -> CmdResult {
    let kind = match args.kind {
        Kind::Complex => SeedKind::ComplexGaussian,
        Kind::Real => SeedKind::RealGaussian,
        Kind::Prescribed => {
            if args.spectrum.is_empty() {
                return Err(Failure::Usage("--kind prescribed needs --spectrum".into()));
            }
            SeedKind::PrescribedSpectrum(args.spectrum.clone())
        }
        Kind::NearDegenerate => SeedKind::NearDegenerate { gap: args.gap },
    };
    let rows = match (args.rows, args.kind) {
        (Some(r), _) => r,
        (None, Kind::Prescribed) => args.spectrum.len(),
        (None, _) => return Err(Failure::Usage("--rows is required for this kind".into())),
    };
    let cols = args.cols.unwrap_or(rows);
    let a = gen_matrix(&MatrixSeed::new(args.seed, kind), rows, cols)?;
    write_matrix(&args.out, &a)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_svd(args: &SvdArgs) -> CmdResult {
    let cfg = args.config.build()?;
    let a = read_matrix(&args.input)?;
    let full = full_svd(&a)?;
    let (u, s, v) = match args.t {
        Some(t) => {
            let (kept, _) = truncate_svd_with(&full, t, &cfg)?;
            (kept.u().clone(), kept.s().values().to_vec(), kept.v().clone())
        }
        None => (full.u.clone(), full.s.values().to_vec(), full.v.clone()),
    };
    let sc = real_column(&s);
    let files = write_outputs(&args.out_dir, &[("U", &u), ("S", &sc), ("V", &v)])?;
    emit(
        args.format,
        &json!({ "rows": a.rows(), "cols": a.cols(), "singular_values": s, "files": files }),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_evd(args: &EvdArgs) -> CmdResult {
    let cfg = args.config.build()?;
    let a = read_matrix(&args.input)?;
    let full = full_evd(&a)?;
    let (x, lambda, y) = match args.p {
        Some(p) => {
            let kept = truncate_evd(&full, p, &cfg)?;
            (kept.x().clone(), kept.lambda().to_vec(), kept.y().clone())
        }
        None => (full.x.clone(), full.lambda.clone(), full.y.clone()),
    };
    let lc = CMat::column(&lambda);
    let files = write_outputs(&args.out_dir, &[("X", &x), ("lambda", &lc), ("Y", &y)])?;
    emit(
        args.format,
        &json!({ "n": a.rows(), "eigenvalues": complex_json(&lambda), "files": files }),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_jvp_svd(args: &JvpSvdArgs) -> CmdResult {
    let cfg = args.config.build()?;
    let a = read_matrix(&args.input)?;
    let da = read_matrix(&args.tangent)?;
    if args.partial && args.mode != Mode::Iterative {
        return Err(Failure::Usage("--partial requires --mode iterative".into()));
    }
    let tangent = match args.mode {
        Mode::Explicit => {
            let (kept, disc) = truncate_svd_with(&full_svd(&a)?, args.t, &cfg)?;
            jvp_truncated_svd_explicit(&kept, &disc, &da, &cfg)?
        }
        Mode::Iterative => {
            let kept = if args.partial {
                let tol = cfg.solver_tol.max(1e-14);
                gkl_partial_svd_with(
                    &a,
                    args.t,
                    cfg.solver_max_iter,
                    tol,
                    &MatrixSeed::complex(args.seed),
                    &cfg,
                )?
            } else {
                truncate_svd_with(&full_svd(&a)?, args.t, &cfg)?.0
            };
            let branch = match args.branch {
                BranchArg::Auto => Branch::Auto,
                BranchArg::Left => Branch::Left,
                BranchArg::Right => Branch::Right,
            };
            jvp_truncated_svd_iterative_branch(&a, &kept, &da, &cfg, branch)?
        }
    };
    let ds = real_column(tangent.ds.values());
    let files = write_outputs(&args.out_dir, &[("dU", &tangent.du), ("dS", &ds), ("dV", &tangent.dv)])?;
    emit(
        args.format,
        &json!({
            "mode": format!("{:?}", args.mode).to_lowercase(),
            "t": args.t,
            "alpha": cfg.alpha,
            "ds": tangent.ds.values(),
            "files": files,
        }),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_jvp_evd(args: &JvpEvdArgs) -> CmdResult {
    let cfg = args.config.build()?;
    let a = read_matrix(&args.input)?;
    let da = read_matrix(&args.tangent)?;
    let kept = truncate_evd(&full_evd(&a)?, args.p, &cfg)?;
    let policy = match args.gauge {
        GaugeArg::MaxAbs => GaugePolicy::MaxAbsX,
        GaugeArg::MaxProduct => GaugePolicy::MaxProduct,
    };
    let tangent = jvp_truncated_evd(&a, &kept, &da, policy, &cfg)?;
    let dl = CMat::column(&tangent.dlambda);
    let files = write_outputs(&args.out_dir, &[("dlambda", &dl), ("dx", &tangent.dx)])?;
    emit(
        args.format,
        &json!({
            "p": args.p,
            "dlambda": complex_json(&tangent.dlambda),
            "pivots": tangent.gauge.pivots,
            "files": files,
        }),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(args: &CheckArgs) -> CmdResult {
    let cfg = args.config.build()?;
    let opts = SuiteOptions {
        shape: args.shape,
        kept: args.kept,
        record_time: args.time,
        gauge: match args.gauge {
            GaugeArg::MaxAbs => GaugePolicy::MaxAbsX,
            GaugeArg::MaxProduct => GaugePolicy::MaxProduct,
        },
        ..SuiteOptions::default()
    };
    let reports = run_suite_with(args.case.into(), args.trials, &cfg, args.seed, &opts);
    let doc = reports_to_json(&reports);
    if let Some(path) = &args.report {
        fs::write(path, &doc).map_err(|e| Failure::Usage(format!("writing {}: {e}", path.display())))?;
    }
    let summary = summarize(&reports);
    match args.format {
        Format::Text => print!("{summary}"),
        Format::Structured => println!("{doc}"),
    }
    for r in reports.iter().filter(|r| !r.passed) {
        match &r.failure {
            Some(f) => eprintln!("trial {} failed: {f}", r.trial),
            None => eprintln!("trial {} exceeded a tolerance", r.trial),
        }
    }
    Ok(if summary.passed == summary.trials {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Svd(a) => cmd_svd(a),
        Command::Evd(a) => cmd_evd(a),
        Command::JvpSvd(a) => cmd_jvp_svd(a),
        Command::JvpEvd(a) => cmd_jvp_evd(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

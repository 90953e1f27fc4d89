use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sfwg::checks::{run_checks, CheckOptions};
use sfwg::error_norms::EnergyErrorMode;
use sfwg::solver::{KappaInterpolation, LinearSolverKind, Method, Penalty, SolverConfig};
use sfwg::study::{run_comparison, run_study, StudySpec};
use sfwg::{Benchmark, Error, GradientDegree, GridFamily, KappaModel, Rect};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_INVALID: u8 = 3;

#[derive(Parser)]
#[command(name = "sfwg", version, about = "Stabilizer-free weak Galerkin convergence studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve on a range of levels and print errors and rates.
    Study(StudyArgs),
    /// Run the stabilizer-free and the penalized scheme side by side.
    Compare(StudyArgs),
    /// Run the property probes; exits nonzero if any fails.
    Check(CheckArgs),
    /// Write a mesh in the plain-text format.
    Mesh(MeshArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum PenaltyArg {
    None,
    Global,
    Local,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnergyArg {
    Pointwise,
    Projected,
}

#[derive(Clone, Copy, ValueEnum)]
enum LinearArg {
    Cholesky,
    Cg,
}

#[derive(Args)]
struct StudyArgs {
    /// Benchmark problem (1 or 2).
    #[arg(long, default_value_t = 1)]
    example: u8,
    /// Coefficient model replacing the benchmark's (exp, rational, smooth, const:c).
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long, default_value = "rect")]
    grid: String,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Gradient degree: k+1, k+2, n+k-1 or an integer. Defaults to k+1 on
    /// rect and k+2 on qph.
    #[arg(long)]
    j: Option<String>,
    /// Level range such as 4..7 (inclusive) or a single level.
    #[arg(long, default_value = "1..4")]
    levels: String,
    #[arg(long, default_value = "kacanov")]
    method: String,
    /// Kačanov relaxation.
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Richardson step; defaults to α/β² of the coefficient.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Penalty of the stabilized scheme; `compare` uses global when none.
    #[arg(long, value_enum, default_value = "none")]
    penalty: PenaltyArg,
    #[arg(long, default_value = "pk-1")]
    kappa_interp: String,
    #[arg(long, value_enum, default_value = "pointwise")]
    energy: EnergyArg,
    #[arg(long, value_enum, default_value = "cholesky")]
    linear: LinearArg,
    /// Eliminate interior DOFs before the global solve.
    #[arg(long)]
    condense: bool,
    #[arg(long, value_enum, default_value = "md")]
    format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 20)]
    seed: u64,
    /// Overrides β of the first coefficient model (fault injection).
    #[arg(long)]
    tamper_beta: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    flux_samples: usize,
    #[arg(long, default_value_t = 1_000)]
    form_samples: usize,
}

#[derive(Args)]
struct MeshArgs {
    #[arg(long, default_value = "rect")]
    grid: String,
    #[arg(long)]
    level: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_levels(s: &str) -> Result<std::ops::RangeInclusive<u32>, Error> {
    let bad = || Error::InvalidArgument(format!("level range '{s}' is not of the form A..B"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (s, s),
    };
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    Ok(a..=b)
}

fn build_spec(args: &StudyArgs) -> Result<StudySpec, Error> {
    let mut bench = Benchmark::example(args.example)?;
    if let Some(k) = &args.kappa {
        bench = bench.with_kappa(k.parse::<KappaModel>()?);
    }
    let family: GridFamily = args.grid.parse()?;
    let mut spec = StudySpec::new(bench, family, args.k, parse_levels(&args.levels)?);
    if let Some(j) = &args.j {
        spec = spec.with_degree(j.parse::<GradientDegree>()?);
    }
    let method = match args.method.parse::<Method>()? {
        Method::Kacanov { .. } => Method::Kacanov { theta: args.theta },
        Method::Richardson { .. } => {
            let kappa = &spec.benchmark.kappa;
            Method::Richardson { eps: args.eps.unwrap_or(kappa.alpha / (kappa.beta * kappa.beta)) }
        }
    };
    let mut solver = SolverConfig { method, tol: args.tol, max_iter: args.max_iter, condense: args.condense, ..SolverConfig::default() };
    solver.form.interpolation = args.kappa_interp.parse::<KappaInterpolation>()?;
    solver.form.penalty = match args.penalty {
        PenaltyArg::None => Penalty::None,
        PenaltyArg::Global => Penalty::GlobalH,
        PenaltyArg::Local => Penalty::LocalH,
    };
    solver.linear = match args.linear {
        LinearArg::Cholesky => LinearSolverKind::Cholesky,
        LinearArg::Cg => LinearSolverKind::cg(),
    };
    spec = spec.with_solver(solver);
    spec.energy_mode = match args.energy {
        EnergyArg::Pointwise => EnergyErrorMode::Pointwise,
        EnergyArg::Projected => EnergyErrorMode::Projected,
    };
    spec.validate()?;
    Ok(spec)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => EXIT_INVALID,
        Error::NotConverged { .. } | Error::Diverged { .. } => EXIT_NOT_CONVERGED,
        _ => 1,
    }
}

fn study(args: &StudyArgs, compare: bool) -> Result<u8, Error> {
    let spec = build_spec(args)?;
    let start = Instant::now();
    let (text, failure) = if compare {
        let cmp = run_comparison(&spec)?;
        let text = match args.format {
            Format::Md => cmp.to_markdown(),
            Format::Csv => cmp.to_csv(),
        };
        (text, cmp.failure)
    } else {
        let run = run_study(&spec)?;
        let text = match args.format {
            Format::Md => format!("{}\nTotal wall-clock time: {:.2} s\n", run.table.to_markdown(), run.table.total_seconds()),
            Format::Csv => run.table.to_csv(),
        };
        (text, run.failure)
    };
    emit(&args.out, &text)?;
    log::info!("finished in {:.2} s", start.elapsed().as_secs_f64());
    match failure {
        Some(e) => {
            eprintln!("error: {e}");
            Ok(exit_for(&e))
        }
        None => Ok(0),
    }
}

fn check(args: &CheckArgs) -> Result<u8, Error> {
    let mut opts = CheckOptions { seed: args.seed, flux_samples: args.flux_samples, form_samples: args.form_samples, ..CheckOptions::default() };
    if let Some(b) = args.tamper_beta {
        opts = opts.with_tampered_beta(b);
    }
    let report = run_checks(&opts)?;
    print!("{report}");
    Ok(if report.passed() { 0 } else { EXIT_CHECK_FAILED })
}

fn mesh(args: &MeshArgs) -> Result<u8, Error> {
    let family: GridFamily = args.grid.parse()?;
    let m = family.build(args.level, Rect::unit_square())?;
    let mut buf = Vec::new();
    m.write_text(&mut buf)?;
    emit(&args.out, &String::from_utf8_lossy(&buf))?;
    let s = m.statistics();
    eprintln!("{} level {}: {} cells, {} edges, {} vertices, h = {:.6}", family.name(), args.level, s.cells, s.edges, s.vertices, s.h);
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out = match &cli.command {
        Command::Study(a) => study(a, false),
        Command::Compare(a) => study(a, true),
        Command::Check(a) => check(a),
        Command::Mesh(a) => mesh(a),
    };
    match out {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}

//! `scare` — solve, verify and benchmark stochastic continuous-time
//! algebraic Riccati equations.
//!
//! Exit codes: 0 converged/verified, 2 not converged, 3 invalid input,
//! 4 solver error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use scare::bench::{self, BenchId, BenchmarkSpec, RunOutcome};
use scare::oracle;
use scare::problem::{ScareProblem, SymMatrix};
use scare::solvers::{self, SolverConfig, SolverKind};
use scare::ScareError;

#[derive(Parser)]
#[command(name = "scare", version, about = "Stochastic CARE solver suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem from a JSON file with the selected iteration.
    Solve(SolveArgs),
    /// Run benchmark campaigns and export history/count CSVs.
    Bench(BenchArgs),
    /// Check a candidate solution: residual, stabilization, oracles.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Problem JSON file.
    #[arg(long)]
    problem: PathBuf,
    /// One of fpc|nt|mnt|fpc-nt|fpc-mnt|gl-fp.
    #[arg(long)]
    solver: String,
    /// Stopping tolerance on the normalized residual.
    #[arg(long)]
    tol: Option<f64>,
    /// Cap on outer iterations.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Starting matrix: `zero` or a JSON file with a nested array.
    #[arg(long, default_value = "zero")]
    x0: String,
    /// Cayley shift of the Lyapunov doubling.
    #[arg(long)]
    alpha: Option<f64>,
    /// Doubling/Möbius shift.
    #[arg(long)]
    gamma: Option<f64>,
    /// Spectral-norm step threshold for the hybrid phase switch.
    #[arg(long)]
    warm_tol: Option<f64>,
    /// Write the residual history CSV here.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Write the solution matrix (JSON nested array) here.
    #[arg(long)]
    x_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated list like `ex1,ex5` or `all`.
    #[arg(long, default_value = "all")]
    examples: String,
    /// Noise seed for the regenerated benchmarks.
    #[arg(long, default_value_t = bench::DEFAULT_NOISE_SEED)]
    seed: u64,
    /// Output directory for the CSV files.
    #[arg(long)]
    out: PathBuf,
    /// Solvers to run (comma separated), default the four robust ones.
    #[arg(long, default_value = "fpc,fpc-nt,fpc-mnt,gl-fp")]
    solvers: String,
    /// Chain size for ex5.
    #[arg(long, default_value_t = 100)]
    ex5_size: usize,
    /// Stopping tolerance on the normalized residual.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Problem JSON file.
    #[arg(long)]
    problem: PathBuf,
    /// Candidate solution (JSON nested array).
    #[arg(long)]
    x: PathBuf,
    /// Residual tolerance for the verdict.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

const EXIT_OK: u8 = 0;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_INVALID_INPUT: u8 = 3;
const EXIT_SOLVER_ERROR: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve(args) => run_solve(&args),
        Command::Bench(args) => run_bench(&args),
        Command::Verify(args) => run_verify(&args),
    };
    ExitCode::from(code)
}

fn load_problem(path: &Path) -> Result<ScareProblem, String> {
    let file = File::open(path).map_err(|e| format!("cannot open {}: {e}", path.display()))?;
    ScareProblem::from_json_reader(file).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_matrix(path: &Path, n: usize) -> Result<SymMatrix, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
        .map_err(|e| format!("{}: expected a JSON nested array: {e}", path.display()))?;
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(format!("{}: expected a {n}x{n} matrix", path.display()));
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    SymMatrix::try_new(m, "X", 1e-8).map_err(|e| e.to_string())
}

fn write_matrix(path: &Path, m: &DMatrix<f64>) -> std::io::Result<()> {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect();
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &rows)?;
    out.write_all(b"\n")
}

fn config_from(
    tol: Option<f64>,
    max_iter: Option<usize>,
    alpha: Option<f64>,
    gamma: Option<f64>,
    warm_tol: Option<f64>,
) -> SolverConfig {
    let mut cfg = SolverConfig::default();
    if let Some(t) = tol {
        cfg.outer_tol = t;
    }
    if let Some(n) = max_iter {
        cfg.max_outer = n;
    }
    cfg.alpha = alpha;
    cfg.gamma = gamma;
    if let Some(w) = warm_tol {
        cfg.warm_threshold = w;
    }
    cfg
}

fn run_solve(args: &SolveArgs) -> u8 {
    let problem = match load_problem(&args.problem) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID_INPUT;
        }
    };
    let solver: SolverKind = match args.solver.parse() {
        Ok(k) => k,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID_INPUT;
        }
    };
    let x0 = if args.x0 == "zero" {
        SymMatrix::zeros(problem.n())
    } else {
        match load_matrix(Path::new(&args.x0), problem.n()) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_INVALID_INPUT;
            }
        }
    };
    let cfg = config_from(args.tol, args.max_iter, args.alpha, args.gamma, args.warm_tol);

    let started = std::time::Instant::now();
    match solvers::solve(solver, &problem, Some(&x0), &cfg) {
        Ok(report) => {
            println!(
                "{} converged: nres={:.3e} outer_rows={} care_solves={} lyap_solves={} fp_iters={} monotone={} wall={:.3}s",
                solver,
                report.final_nres(),
                report.history.len(),
                report.counts.care_solves,
                report.counts.lyap_solves,
                report.counts.fp_iters,
                report.monotone_direction,
                started.elapsed().as_secs_f64()
            );
            if let Some(path) = &args.history {
                let out = File::create(path).map(BufWriter::new);
                if let Err(e) = out.and_then(|w| bench::write_history_csv(&report, w)) {
                    eprintln!("error: cannot write history: {e}");
                    return EXIT_SOLVER_ERROR;
                }
            }
            if let Some(path) = &args.x_out {
                if let Err(e) = write_matrix(path, report.x.matrix()) {
                    eprintln!("error: cannot write solution: {e}");
                    return EXIT_SOLVER_ERROR;
                }
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_convergence_failure() {
                EXIT_NOT_CONVERGED
            } else {
                EXIT_SOLVER_ERROR
            }
        }
    }
}

fn write_history(record: &bench::RunRecord, path: &Path) -> std::io::Result<()> {
    let out = BufWriter::new(File::create(path)?);
    bench::export_history(record, out)
}

fn parse_examples(text: &str, seed: u64, ex5_size: usize) -> Result<Vec<BenchmarkSpec>, String> {
    let ids: Vec<BenchId> = if text == "all" {
        BenchId::ALL.to_vec()
    } else {
        text.split(',')
            .map(|tok| tok.trim().parse::<BenchId>().map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?
    };
    Ok(ids
        .into_iter()
        .map(|id| {
            let mut spec = BenchmarkSpec::new(id).with_seed(seed);
            if id == BenchId::Ex5 {
                spec = spec.with_chain_size(ex5_size);
            }
            spec
        })
        .collect())
}

fn run_bench(args: &BenchArgs) -> u8 {
    let specs = match parse_examples(&args.examples, args.seed, args.ex5_size) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID_INPUT;
        }
    };
    let kinds: Vec<SolverKind> = match args
        .solvers
        .split(',')
        .map(|tok| tok.trim().parse::<SolverKind>())
        .collect::<Result<Vec<_>, _>>()
    {
        Ok(k) => k,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID_INPUT;
        }
    };
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        eprintln!("error: cannot create {}: {e}", args.out.display());
        return EXIT_INVALID_INPUT;
    }

    let mut cfg = SolverConfig::default();
    if let Some(t) = args.tol {
        cfg.outer_tol = t;
    }
    let records = bench::run_campaign(&specs, &kinds, &cfg);

    for record in &records {
        let name = format!("{}_{}_history.csv", record.spec.label(), record.solver);
        let path = args.out.join(name.replace(['(', ')', '='], "_"));
        if let Err(e) = write_history(record, &path) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_SOLVER_ERROR;
        }
    }
    let counts_path = args.out.join("counts.csv");
    let counts = match File::create(&counts_path) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: cannot create {}: {e}", counts_path.display());
            return EXIT_SOLVER_ERROR;
        }
    };
    if let Err(e) = bench::export_counts(&records, BufWriter::new(counts)) {
        eprintln!("error: cannot write counts: {e}");
        return EXIT_SOLVER_ERROR;
    }

    let mut all_ok = true;
    for record in &records {
        match &record.outcome {
            RunOutcome::Solved(rep) => println!(
                "{:>10} {:>8}: nres={:.3e} care={} lyap={} fp={} wall={:.3}s",
                record.spec.label(),
                record.solver.to_string(),
                rep.final_nres(),
                rep.counts.care_solves,
                rep.counts.lyap_solves,
                rep.counts.fp_iters,
                record.wall.as_secs_f64()
            ),
            RunOutcome::Failed { message, .. } => {
                all_ok = false;
                println!(
                    "{:>10} {:>8}: FAILED {message}",
                    record.spec.label(),
                    record.solver.to_string()
                );
            }
        }
    }
    println!("wrote {}", counts_path.display());
    if all_ok {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    }
}

fn run_verify(args: &VerifyArgs) -> u8 {
    let problem = match load_problem(&args.problem) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID_INPUT;
        }
    };
    let x = match load_matrix(&args.x, problem.n()) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID_INPUT;
        }
    };
    match oracle::verify_solution(&problem, &x) {
        Ok(report) => {
            let stab = report.mean_square_stable;
            println!(
                "nres={:.3e} mean_square_stable={} closed_loop_abscissa={:.3e}",
                report.nres, stab, report.closed_loop_abscissa
            );
            // Cross-check against the scalar oracle when available.
            if problem.n() == 1 && problem.m() == 1 {
                match oracle::scalar_scare_solve(&problem) {
                    Ok(root) => println!("scalar_oracle_root={root:.12e}"),
                    Err(e) => println!("scalar_oracle_root=unavailable ({e})"),
                }
            }
            if report.nres <= args.tol && stab {
                println!("verified");
                EXIT_OK
            } else {
                println!("not verified");
                EXIT_NOT_CONVERGED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                ScareError::DimensionMismatch(_) | ScareError::InvalidProblem(_) => {
                    EXIT_INVALID_INPUT
                }
                _ => EXIT_SOLVER_ERROR,
            }
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use picardo::bench::{
    gen_synthetic, median, read_matrix, render_svg, run_benchmark, write_matrix_bin,
    write_matrix_csv, write_trace_csv, Algorithm, DatasetSpec, Mixing, Preset, RunRecord,
};
use picardo::lbfgs::RhoConvention;
use picardo::{fastica_solve, solve, IcaError, ScoreFunction, SolverConfig};

#[derive(Parser)]
#[command(name = "picardo", version, about = "ICA under a whiteness constraint")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Unmix one signal file.
    Run(RunArgs),
    /// Compare both solvers on a family of synthetic datasets.
    Bench(BenchArgs),
    /// Write a synthetic mixture.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Signals as CSV (one channel per row) or PICO binary (`.bin`).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "picardo")]
    algo: Algorithm,
    #[arg(long, default_value = "tanh")]
    score: ScoreFunction,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = picardo::lbfgs::DEFAULT_MEMORY)]
    memory: usize,
    #[arg(long, default_value_t = picardo::lbfgs::DEFAULT_KAPPA_MIN)]
    kappa_min: f64,
    /// Label written to the trace's seed column.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Unmixed sources as CSV.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Store `⟨ℰ, Δ⟩` itself rather than its reciprocal with each L-BFGS pair.
    #[arg(long)]
    rho_literal: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "synthetic-small")]
    preset: Preset,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Per-iteration records of every run, as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Seed of the first repeat; later repeats use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    t: usize,
    #[arg(long, default_value_t = 0)]
    uniform: usize,
    #[arg(long, default_value_t = 0)]
    laplace: usize,
    #[arg(long, default_value_t = 0)]
    gaussian: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mixture file; `.bin` selects the binary format, anything else CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    mixing_out: Option<PathBuf>,
    /// Leave the sources unmixed.
    #[arg(long)]
    identity: bool,
    /// AR(1) coefficient for every source.
    #[arg(long, default_value_t = 0.0)]
    ar1: f64,
    /// Keep each family's marginal exact under `--ar1` (Gaussian copula).
    #[arg(long)]
    ar1_copula: bool,
}

fn exit_code(err: &IcaError) -> ExitCode {
    if err.is_numerical() {
        ExitCode::from(4)
    } else {
        ExitCode::from(3)
    }
}

fn cmd_run(args: RunArgs) -> picardo::Result<()> {
    let config = SolverConfig {
        max_iter: args.max_iter,
        tol: args.tol,
        memory_size: args.memory,
        kappa_min: args.kappa_min,
        score: args.score,
        rho_convention: if args.rho_literal {
            RhoConvention::Literal
        } else {
            RhoConvention::Reciprocal
        },
        ..SolverConfig::default()
    };
    let x = read_matrix(&args.input)?;
    let res = match args.algo {
        Algorithm::Picardo => solve(&x, &config)?,
        Algorithm::FastIca => fastica_solve(&x, &config)?,
    };
    let last = res.trace.last().copied();
    println!(
        "{}: {:?} after {} iterations, gradient norm {:.3e}",
        args.algo,
        res.termination,
        res.trace.n_steps(),
        last.map_or(f64::NAN, |r| r.grad_norm)
    );
    if let Some(path) = &args.output {
        write_matrix_csv(path, res.y.as_matrix())?;
    }
    if let Some(path) = &args.trace {
        let record = RunRecord {
            algorithm: args.algo,
            seed: args.seed,
            converged: res.converged,
            iterations: res.trace.len(),
            seconds: last.map_or(0.0, |r| r.elapsed_s),
            final_grad_norm: last.map_or(f64::NAN, |r| r.grad_norm),
            final_amari: f64::NAN,
            trace: res.trace,
            termination: res.termination,
            input_checksum: 0,
        };
        write_trace_csv(path, &[record])?;
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> picardo::Result<()> {
    let config = SolverConfig {
        tol: args.tol,
        max_iter: args.max_iter,
        ..SolverConfig::default()
    };
    let specs = args.preset.specs(args.n, args.t, args.repeats, args.seed);
    let records = run_benchmark(&specs, &config, &Algorithm::ALL)?;
    for algo in Algorithm::ALL {
        let runs: Vec<&RunRecord> = records.iter().filter(|r| r.algorithm == algo).collect();
        let converged = runs.iter().filter(|r| r.converged).count();
        let iters: Vec<f64> = runs.iter().map(|r| r.trace.n_steps() as f64).collect();
        let amari: Vec<f64> = runs.iter().map(|r| r.final_amari).collect();
        let secs: Vec<f64> = runs.iter().map(|r| r.seconds).collect();
        println!(
            "{algo:8} converged {converged}/{}  median iterations {:.1}  median seconds {:.3}  median amari {:.2e}",
            runs.len(),
            median(&iters),
            median(&secs),
            median(&amari)
        );
    }
    if let Some(path) = &args.out {
        write_trace_csv(path, &records)?;
    }
    if let Some(path) = &args.svg {
        render_svg(path, &records)?;
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> picardo::Result<()> {
    let spec = DatasetSpec {
        n_channels: args.n,
        n_samples: args.t,
        uniform: args.uniform,
        laplace: args.laplace,
        gaussian: args.gaussian,
        mixing: if args.identity {
            Mixing::Identity
        } else {
            Mixing::RandomGaussian
        },
        ar_coef: args.ar1,
        ar_copula: args.ar1_copula,
        seed: args.seed,
    };
    let data = gen_synthetic(&spec)?;
    if args.out.extension().is_some_and(|e| e == "bin") {
        write_matrix_bin(&args.out, &data.x)?;
    } else {
        write_matrix_csv(&args.out, data.x.as_matrix())?;
    }
    if let Some(path) = &args.mixing_out {
        write_matrix_csv(path, &data.a_true)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Gen(args) => cmd_gen(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

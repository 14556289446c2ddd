//! `hellinger`: spectrum approximation and estimation from the command line.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::*;
use error::{code, CliResult};

/// Default output directory when `--out` is not given.
const OUT_ENV: &str = "HELLINGER_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "hellinger", version, about = "Hellinger-distance spectrum approximation and estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one approximation problem read from JSON.
    Approx(ApproxArgs),
    /// Estimate spectra from sampled data.
    Estimate(EstimateArgs),
    /// Generate data from a simulation scenario.
    Simulate(SimulateArgs),
    /// Average spectral-norm error of estimates against a true spectrum.
    ErrorCurve(ErrorCurveArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Gradient norm at which Newton stops.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Armijo parameter in (0, 0.5).
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Points of the output frequency grid.
    #[arg(long, default_value_t = 512)]
    grid: usize,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct ApproxArgs {
    /// JSON with `bank`, `sigma` and `prior`.
    problem: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, env = OUT_ENV, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct EstimateArgs {
    /// Time series CSV files; several files are estimated independently.
    #[arg(required = true)]
    data: Vec<PathBuf>,
    /// covext:N, sinusoid, bivariate, or a bank JSON file.
    #[arg(long, default_value = "covext:6")]
    bank: String,
    /// constant, yw:K, or an AR model JSON file.
    #[arg(long, default_value = "constant")]
    prior: String,
    /// Discarded filter outputs (default max(10n, 100), clipped to the record).
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, env = OUT_ENV, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct SimulateArgs {
    /// arma, sinusoids or bivariate.
    scenario: String,
    /// Samples per run (default depends on the scenario).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent runs with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 512)]
    grid: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, env = OUT_ENV, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct ErrorCurveArgs {
    /// Directory searched recursively for spectrum.csv files.
    estimates: PathBuf,
    true_spectrum: PathBuf,
    #[arg(long, env = OUT_ENV, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Write here instead of the recorded directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(command: Command, args: &[String]) -> CliResult<()> {
    match command {
        Command::Approx(a) => approx(
            &ApproxOptions {
                problem: a.problem,
                tol: a.solver.tol,
                alpha: a.solver.alpha,
                max_iters: a.solver.max_iters,
                grid: a.solver.grid,
                out: a.out,
            },
            args,
        ),
        Command::Estimate(a) => estimate(
            &EstimateOptions {
                data: a.data,
                bank: a.bank,
                prior: a.prior,
                burn_in: a.burn_in,
                grid: a.solver.grid,
                seed: a.seed,
                tol: a.solver.tol,
                alpha: a.solver.alpha,
                max_iters: a.solver.max_iters,
                jobs: a.jobs,
                out: a.out,
            },
            args,
        ),
        Command::Simulate(a) => simulate(
            &SimulateOptions {
                scenario: a.scenario,
                n: a.n,
                seed: a.seed,
                runs: a.runs,
                grid: a.grid,
                jobs: a.jobs,
                out: a.out,
            },
            args,
        ),
        Command::ErrorCurve(a) => error_curve(
            &ErrorCurveOptions { estimates: a.estimates, truth: a.true_spectrum, out: a.out },
            args,
        ),
        Command::Replay(a) => {
            let recorded = replay_args(&a.manifest, a.out.as_deref())?;
            let cli = Cli::try_parse_from(std::iter::once("hellinger".to_string()).chain(recorded.clone()))
                .map_err(|e| error::CliError::usage(format!("recorded command does not parse: {e}")))?;
            if matches!(cli.command, Command::Replay(_)) {
                return Err(error::CliError::usage("a manifest cannot record a replay"));
            }
            run(cli.command, &recorded)
        }
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match run(cli.command, &args) {
        Ok(()) => ExitCode::from(code::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}

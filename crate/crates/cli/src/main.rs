use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sfot::eval::Method;
use sfot_cli::{cmd_cv, cmd_estimate, cmd_simulate, cmd_sweep, CliResult, Overrides, RunConfig};

/// Plane-wave sound field estimation from phase-perturbed microphone data.
///
/// Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 IO error.
#[derive(Parser)]
#[command(name = "sfot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct Shared {
    /// Scenario seed; also the master seed of a sweep.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    seed: Option<u64>,
    /// Directory for all outputs.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
}

#[derive(Args)]
struct MethodArgs {
    /// Estimator: ot, tikhonov, lasso or ladlasso.
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Fixed regularization weight for the baselines.
    #[arg(long)]
    lambda: Option<f64>,
    /// Fixed transport cost offset.
    #[arg(long)]
    gamma: Option<f64>,
    /// Fixed data-fit weight for the transport estimator.
    #[arg(long)]
    eta: Option<f64>,
    /// Phase-grid size K.
    #[arg(long)]
    phase_grid: Option<usize>,
    #[arg(long)]
    rel_gap: Option<f64>,
    #[arg(long)]
    feas_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a scenario and write scenario.toml and measurements.toml.
    Simulate {
        /// Run configuration; defaults apply when omitted.
        config: Option<PathBuf>,
    },
    /// Estimate coefficients from a measurements file.
    Estimate {
        measurements: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        method: MethodArgs,
        /// Also write field.svg and coefficients.svg.
        #[arg(long)]
        render: bool,
    },
    /// Cross-validate the hyperparameter grid on a measurements file.
    Cv {
        measurements: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        method: MethodArgs,
    },
    /// Monte Carlo sweep; writes sweep.csv.
    Sweep {
        config: Option<PathBuf>,
        #[command(flatten)]
        method: MethodArgs,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: sfot::Error| e.to_string())
}

fn overrides(shared: &Shared, m: Option<&MethodArgs>) -> Overrides {
    let mut o = Overrides {
        seed: shared.seed,
        out_dir: shared.out_dir.clone(),
        threads: shared.threads.map(|t| t as usize),
        ..Overrides::default()
    };
    if let Some(m) = m {
        o.method = m.method;
        o.lambda = m.lambda;
        o.gamma = m.gamma;
        o.eta = m.eta;
        o.phase_grid = m.phase_grid;
        o.rel_gap = m.rel_gap;
        o.feas_tol = m.feas_tol;
        o.max_iters = m.max_iters;
    }
    o
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate { config } => {
            let cfg = RunConfig::load(config.as_deref(), &overrides(&cli.shared, None))?;
            let out = cmd_simulate(&cfg)?;
            println!("wrote {}", out.scenario.display());
            println!("wrote {}", out.measurements.display());
        }
        Command::Estimate {
            measurements,
            config,
            method,
            render,
        } => {
            let cfg = RunConfig::load(config.as_deref(), &overrides(&cli.shared, Some(method)))?;
            let out = cmd_estimate(measurements, &cfg, *render)?;
            let h = out.result.hyper;
            match h.eta {
                Some(eta) => println!(
                    "{}: gamma = {}, eta = {eta}",
                    out.result.method, h.lambda_or_gamma
                ),
                None => println!("{}: lambda = {}", out.result.method, h.lambda_or_gamma),
            }
            for p in std::iter::once(&out.estimate).chain(&out.renders) {
                println!("wrote {}", p.display());
            }
        }
        Command::Cv {
            measurements,
            config,
            method,
        } => {
            let cfg = RunConfig::load(config.as_deref(), &overrides(&cli.shared, Some(method)))?;
            let (path, cv) = cmd_cv(measurements, &cfg)?;
            let name = if cv.method == Method::Ot {
                "gamma"
            } else {
                "lambda"
            };
            let show = |h: &sfot::eval::Hyper| {
                let eta = h.eta.map(|e| format!(" eta={e}")).unwrap_or_default();
                format!("{name}={}{eta}", h.lambda_or_gamma)
            };
            for c in &cv.candidates {
                println!("{}  score={:e}", show(&c.hyper), c.score);
            }
            println!("best: {}", show(&cv.best));
            println!("wrote {}", path.display());
        }
        Command::Sweep { config, method } => {
            let cfg = RunConfig::load(config.as_deref(), &overrides(&cli.shared, Some(method)))?;
            let out = cmd_sweep(&cfg)?;
            println!(
                "{:<14} {:>12} {:<10} {:>12} {:>12}",
                "param", "value", "method", "mean_nmse", "std_err"
            );
            for r in &out.outcome.reports {
                println!(
                    "{:<14} {:>12} {:<10} {:>12.4e} {:>12.4e}",
                    r.sweep_param.as_str(),
                    r.value,
                    r.method.as_str(),
                    r.nmse,
                    r.std_error
                );
            }
            println!("wrote {}", out.csv.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sfot: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

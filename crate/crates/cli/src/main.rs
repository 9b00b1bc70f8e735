//! `tmeig`: run EIG estimation experiments from a TOML config.
//!
//! Exit codes: 0 on success, 1 when a computation fails (artifacts for the
//! other cells are still written), 2 for config or schema errors.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ConfigError;
use run::{RunError, Verb};

#[derive(Parser)]
#[command(
    name = "tmeig",
    version,
    about = "Transport-map estimators of expected information gain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One estimate per estimator kind at the first budget and exponent.
    Estimate(Common),
    /// Convergence study over kinds, exponents, budgets and replicates.
    Sweep(Common),
    /// Projected estimates over reduction bases and ranks.
    Dimred(Common),
    /// Nested Monte Carlo baseline over the configured budgets.
    Nmc(Common),
    /// Check a config without computing anything. Only `--config` is used.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads. Defaults to the config's value, then to all cores.
    #[arg(long, value_name = "INT")]
    workers: Option<usize>,
    /// Output directory. Overrides the config's `out`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn config_failure(e: &ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn execute(verb: Verb, args: Common) -> ExitCode {
    let (cfg, bytes) = match config::load(&args.config) {
        Ok(v) => v,
        Err(e) => return config_failure(&e),
    };
    let model = match cfg.check() {
        Ok(m) => m,
        Err(e) => return config_failure(&e),
    };
    let Some(out) = args.out.or_else(|| cfg.out.clone()) else {
        return config_failure(&ConfigError {
            path: "out".into(),
            message: "no output directory; set `out` or pass --out".into(),
        });
    };
    match args.workers.or(cfg.workers) {
        Some(0) => {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(2);
        }
        Some(n) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("error: cannot start worker pool: {e}");
                return ExitCode::from(1);
            }
        }
        None => {}
    }
    let seed = args.seed.unwrap_or(cfg.seed);
    match run::run(verb, &cfg, model.as_ref(), &bytes, seed, &out) {
        Ok(summary) => {
            for e in &summary.errors {
                eprintln!("cell failed: {e}");
            }
            eprintln!(
                "{} cells, {} failed; artifacts in {}",
                summary.n_cells,
                summary.n_failed,
                summary.out.display()
            );
            if summary.n_failed > 0 {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(RunError::Config(e)) => config_failure(&e),
        Err(RunError::Compute(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Validate(a) => match config::load(&a.config).and_then(|(cfg, _)| cfg.check().map(|_| cfg)) {
            Ok(cfg) => {
                println!("ok: {} config", cfg.kind.as_str());
                ExitCode::SUCCESS
            }
            Err(e) => config_failure(&e),
        },
        Command::Estimate(a) => execute(Verb::Estimate, a),
        Command::Sweep(a) => execute(Verb::Sweep, a),
        Command::Dimred(a) => execute(Verb::Dimred, a),
        Command::Nmc(a) => execute(Verb::Nmc, a),
    }
}

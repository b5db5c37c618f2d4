use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use drocc_cli::{grid::Bounds, CliError, CliResult, ExperimentConfig};

/// Thread count for per-seed parallelism; unset means rayon's default.
const THREADS_ENV: &str = "DROCC_THREADS";

#[derive(Parser)]
#[command(name = "drocc", version, about = "Train and evaluate one-class classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per seed and write snapshots plus a run record.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Train this seed only.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Evaluate a saved model on the test data described by a config.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Data seed; defaults to the first configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Run a reproduction suite or sweep.
    Repro {
        #[arg(long)]
        suite: String,
        /// Run a single seed instead of the suite defaults.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Score a 2-D grid with a saved model and write CSV.
    BoundaryGrid {
        #[arg(long)]
        model: PathBuf,
        /// x1min,x1max,x2min,x2max
        #[arg(long, allow_hyphen_values = true)]
        bounds: String,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Print the default config, or a suite's configs.
    Defaults {
        #[arg(long)]
        suite: Option<String>,
    },
}

fn load_config(path: Option<&PathBuf>) -> CliResult<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn setup_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}: expected a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("{THREADS_ENV}: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    setup_threads()?;
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(s) = seed {
                cfg.run.seeds = vec![s];
            }
            let rec = drocc_cli::cmd_train(&cfg, &out)?;
            for m in &rec.aggregate {
                println!("{:<24} {:.6} ± {:.6}", m.metric, m.mean, m.std);
            }
            println!("wrote {}", out.join("record.toml").display());
        }
        Command::Eval { model, config, seed, out } => {
            let cfg = load_config(config.as_ref())?;
            let seed = seed.unwrap_or(cfg.run.seeds[0]);
            let rep = drocc_cli::cmd_eval(&model, &cfg, seed, &out)?;
            print!("{}", rep.to_text());
        }
        Command::Repro { suite, seed, out } => {
            let seeds = seed.map(|s| vec![s]);
            let res = drocc_cli::cmd_repro(&suite, seeds.as_deref(), &out)?;
            print!("{}", res.table.render());
        }
        Command::BoundaryGrid {
            model,
            bounds,
            resolution,
            out,
        } => {
            let path = drocc_cli::cmd_boundary_grid(&model, Bounds::parse(&bounds)?, resolution, &out)?;
            println!("wrote {}", path.display());
        }
        Command::Defaults { suite } => print!("{}", drocc_cli::cmd_defaults(suite.as_deref())?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use softrgg_cli::run::{bounds, simulate, sweep_table};
use softrgg_cli::verify::{run_checks, Check};
use softrgg_cli::{
    load_config, resolve_workers, CliError, ConfigError, Format, Purpose, RunConfig, WORKER_CAP_VAR,
};

/// Isolated nodes in soft random geometric graphs on a one-dimensional torus.
#[derive(Parser)]
#[command(name = "softrgg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte Carlo trials at one torus length.
    Simulate(Common),
    /// Run trials and evaluate the bounds over `L_values`.
    Sweep(Common),
    /// Evaluate the Chen–Stein terms without simulating.
    Bounds(Common),
    /// Run the desk-scale acceptance checks.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (TOML key-value pairs).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Write results here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn resolve(&self, purpose: Purpose) -> Result<RunConfig, ConfigError> {
        let path = self.config.as_ref().ok_or_else(|| ConfigError::Semantic {
            key: "--config".into(),
            message: "a configuration file is required".into(),
        })?;
        let mut config = load_config(path)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(trials) = self.trials {
            config.trials = trials;
        }
        if let Some(out) = &self.out {
            config.out = Some(out.clone());
        }
        if let Some(format) = self.format {
            config.format = format;
        }
        if let Some(workers) = self.workers {
            config.workers = Some(workers);
        }
        config.validate()?;
        config.validate_for(purpose)?;
        Ok(config)
    }

    fn workers(&self, config_workers: Option<usize>) -> Result<usize, ConfigError> {
        let cap = std::env::var(WORKER_CAP_VAR).ok();
        resolve_workers(self.workers.or(config_workers), cap.as_deref())
    }
}

fn emit(bytes: &[u8], out: Option<&PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn print_resolved(config: &RunConfig, workers: usize) {
    eprintln!("# resolved configuration");
    eprint!("{}", config.to_toml());
    eprintln!("# effective workers: {workers}");
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (common, purpose) = match &cli.command {
        Command::Simulate(c) => (c, Purpose::Simulate),
        Command::Sweep(c) => (c, Purpose::Sweep),
        Command::Bounds(c) => (c, Purpose::Bounds),
        Command::Verify(c) => return verify(c),
    };
    let config = common.resolve(purpose)?;
    let workers = common.workers(config.workers)?;
    print_resolved(&config, workers);
    let bytes = match purpose {
        Purpose::Simulate => simulate(&config, workers)?,
        Purpose::Sweep => sweep_table(&config, workers)?,
        Purpose::Bounds => bounds(&config)?,
    };
    emit(&bytes, config.out.as_ref())
}

fn verify(common: &Common) -> Result<(), CliError> {
    // only the seed, worker count and output settings matter here
    let (seed, config_workers, config_out, config_format) = match &common.config {
        Some(path) => {
            let c = load_config(path)?;
            (c.seed, c.workers, c.out, c.format)
        }
        None => (0, None, None, Format::Json),
    };
    let seed = common.seed.unwrap_or(seed);
    let workers = common.workers(config_workers)?;
    let out = common.out.clone().or(config_out);
    eprintln!("# resolved configuration");
    eprintln!("seed = {seed}");
    eprintln!("# effective workers: {workers}");
    let checks = run_checks(seed, workers, |c| {
        println!(
            "check {:>2} {}  {}: {}",
            c.id,
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    })?;
    if let Some(path) = out {
        let bytes = match common.format.unwrap_or(config_format) {
            Format::Json => softrgg::output::to_json_string(&checks).into_bytes(),
            Format::Csv => checks_csv(&checks).into_bytes(),
        };
        emit(&bytes, Some(&path))?;
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(CliError::Verification(failed));
    }
    Ok(())
}

fn checks_csv(checks: &[Check]) -> String {
    let mut s = String::from("id,name,pass\n");
    for c in checks {
        s.push_str(&format!("{},{},{}\n", c.id, c.name, c.pass));
    }
    s
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

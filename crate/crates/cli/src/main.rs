use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relaylab_cli::acceptance;
use relaylab_cli::config::{Engine, ExperimentConfig};
use relaylab_cli::run::{cdf_to_writer, execute_to_file, run_to_writer, Command, RunOptions};
use relaylab_cli::CliError;

#[derive(Parser)]
#[command(name = "relaylab", version, about = "Relay-assisted uplink throughput and energy experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate schemes over an optional parameter sweep.
    Run(Args),
    /// Throughput CDF over the cell.
    Cdf(Args),
    /// Run the acceptance checks and report each one.
    Validate(Args),
}

#[derive(clap::Args)]
struct Args {
    /// TOML config, or JSON (including a sidecar written by `run`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV; stdout when neither this nor `output` in the config is set.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    engine: Option<Engine>,
    /// Monte Carlo trials (per position for fixed-position runs).
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores by default. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Fill the wall_time_s column.
    #[arg(long)]
    timing: bool,
}

impl Args {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(e) = self.engine {
            cfg.engine = e;
        }
        if let Some(n) = self.trials {
            cfg.mc.trials = n;
        }
        if let Some(s) = self.seed {
            cfg.mc.seed = s;
            cfg.validate.seed = s;
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(CliError::Config("--threads must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        }
        Ok(cfg)
    }
}

fn produce(command: Command, args: &Args) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let opts = RunOptions { timing: args.timing };
    let summary = match cfg.output.clone() {
        Some(path) => execute_to_file(command, &cfg, &path, opts)?,
        None => {
            let stdout = std::io::stdout().lock();
            match command {
                Command::Run => run_to_writer(&cfg, stdout, opts)?,
                Command::Cdf => cdf_to_writer(&cfg, stdout)?,
            }
        }
    };
    eprintln!("{} rows, sha256 {}", summary.rows, summary.csv_sha256);
    Ok(())
}

fn validate(args: &Args) -> Result<bool, CliError> {
    let cfg = args.resolve()?;
    cfg.validate()?;
    let mut all = true;
    for id in acceptance::selected_ids(&cfg) {
        let report = acceptance::run_check(id, &cfg);
        println!("{}", report.headline());
        for l in report.detail.lines() {
            println!("       {l}");
        }
        all &= report.passed;
    }
    Ok(all)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Cmd::Run(a) => produce(Command::Run, a).map(|_| true),
        Cmd::Cdf(a) => produce(Command::Cdf, a).map(|_| true),
        Cmd::Validate(a) => validate(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more acceptance checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("relaylab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

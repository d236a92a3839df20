mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{write_manifest, RunInfo};

/// Experiment driver for quantum belief propagation on tree models.
#[derive(Parser)]
#[command(name = "qbp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sliding-window error and single-step bound per (beta, ell).
    WindowSweep(Common),
    /// Cumulant norms of the leaf thermal potential and their exponential fit.
    CumulantDecay(Common),
    /// Conjugation residual and norm of the Hastings operator on random two-qubit pairs.
    HastingsVerify(Common),
    /// Randomized matrix-inequality checks; exits 4 on any failure.
    LemmaSuite(Common),
    /// Markov deficiencies and leaf-trace preservation.
    MarkovAudit(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let (name, common) = match &cli.command {
        Command::WindowSweep(c) => ("window-sweep", c),
        Command::CumulantDecay(c) => ("cumulant-decay", c),
        Command::HastingsVerify(c) => ("hastings-verify", c),
        Command::LemmaSuite(c) => ("lemma-suite", c),
        Command::MarkovAudit(c) => ("markov-audit", c),
    };
    let loaded = ExperimentConfig::load(&common.config)?;
    let mut cfg = loaded.config;
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    cfg.validate()?;
    let out = match (&common.out, &cfg.out) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => loaded.base_dir.join(dir),
        (None, None) => PathBuf::from("qbp-out"),
    };
    std::fs::create_dir_all(&out)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", common.jobs)))?;
    let base = loaded.base_dir.as_path();
    let outcome = pool.install(|| match &cli.command {
        Command::WindowSweep(_) => commands::window_sweep(&cfg, base, &out),
        Command::CumulantDecay(_) => commands::cumulant_decay(&cfg, base, &out),
        Command::HastingsVerify(_) => commands::hastings_verify(&cfg, &out),
        Command::LemmaSuite(_) => commands::lemma_suite(&cfg, &out),
        Command::MarkovAudit(_) => commands::markov_audit(&cfg, base, &out),
    })?;

    write_manifest(
        &out,
        &RunInfo {
            command: name,
            raw_config: &loaded.raw,
            seed: cfg.seed(),
            jobs: pool.current_num_threads(),
            files: &outcome.files,
            elapsed: started.elapsed(),
        },
    )?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    match outcome.failure {
        Some(msg) => Err(CliError::CheckFailed(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qbp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

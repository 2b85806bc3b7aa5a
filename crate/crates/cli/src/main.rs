mod commands;
mod config;
mod output;

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use crate::commands::Ctx;
use crate::config::FileConfig;

/// Reproducible qudit control experiments.
#[derive(Parser, Debug)]
#[command(name = "qudit", version)]
struct Cli {
    /// JSON config with one section per command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Transition table and ranked qudit state chains.
    Levels,
    /// Gradient-descent pulse synthesis for one target.
    Synth,
    /// Score the shipped pulse tables under every convention.
    VerifyTables,
    /// Grover outcome matrix and iteration sweep.
    Grover,
    /// Randomized benchmarking survival curve.
    Rb,
    /// Ramsey coherence decay.
    Ramsey,
    /// Tone-amplitude calibration and fidelity landscape.
    Calibrate,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let cfg = FileConfig::load(cli.config.as_deref())?;

    if let Some(n) = cli.threads.or(cfg.threads) {
        anyhow::ensure!(n > 0, "--threads must be positive");
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    let explicit = cli.seed.or(cfg.seed);
    let ctx = Ctx {
        seed: explicit.unwrap_or(0),
        seed_explicit: explicit.is_some(),
        out: cli.out.or(cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
        note: cfg.note.clone(),
    };

    let record = match cli.command {
        Command::Levels => commands::levels(&cfg.levels, &ctx),
        Command::Synth => commands::synth(&cfg.synth, &ctx),
        Command::VerifyTables => commands::verify_tables(&cfg.verify_tables, &ctx),
        Command::Grover => commands::grover(&cfg.grover, &ctx),
        Command::Rb => commands::rb(&cfg.rb, &ctx),
        Command::Ramsey => commands::ramsey_cmd(&cfg.ramsey, &ctx),
        Command::Calibrate => commands::calibrate(&cfg.calibrate, &ctx),
    }?;
    println!("{}", record.display());
    Ok(())
}

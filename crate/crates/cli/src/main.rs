//! `nsteer` — synthesize datasets, train neural steerers, evaluate and query
//! them.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nsteer_core::commands::{cmd_eval, cmd_export, cmd_interp, cmd_synth, cmd_train, CommandOutput};
use nsteer_core::config::RunConfig;
use nsteer_core::Error;

#[derive(Parser)]
#[command(
    name = "nsteer",
    version,
    about = "Neural steering-vector fields: synth | train | eval | interp | export"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic grid dataset.
    Synth(Common),
    /// Train (or resume) a model.
    Train(Common),
    /// Evaluate a checkpoint and/or baselines under a protocol.
    Eval(Common),
    /// Query a checkpoint at arbitrary directions and frequencies.
    Interp(Common),
    /// Write plot-ready sweep CSVs.
    Export(Common),
}

fn load_config(common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<CommandOutput, Error> {
    let (common, f): (&Common, fn(&RunConfig) -> nsteer_core::Result<CommandOutput>) = match &cli.command {
        Command::Synth(c) => (c, cmd_synth),
        Command::Train(c) => (c, cmd_train),
        Command::Eval(c) => (c, cmd_eval),
        Command::Interp(c) => (c, cmd_interp),
        Command::Export(c) => (c, cmd_export),
    };
    f(&load_config(common)?)
}

fn main() -> ExitCode {
    nsteer_core::parallel::init_threads(None);
    match run(Cli::parse()) {
        Ok(out) => {
            for line in &out.summary {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}

//! `cascademix`: batch runs of cascade mixture inference, clustering, hypothesis
//! tests, influencer ranking and intervention simulation.

mod args;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::RunConfig;

const USAGE_ERROR: u8 = 2;
const RUNTIME_ERROR: u8 = 1;

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Generate(_) => "generate",
        Command::Infer => "infer",
        Command::Cluster(_) => "cluster",
        Command::Stats => "stats",
        Command::Influencers(_) => "influencers",
        Command::Intervene(_) => "intervene",
        Command::Dump => "dump",
        Command::Sweep(_) => "sweep",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let cfg = match RunConfig::resolve(command_name(&cli.command), &cli.global) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(USAGE_ERROR);
        }
    };
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: setting up {n} worker threads: {e}");
            return ExitCode::from(RUNTIME_ERROR);
        }
    }
    match commands::run(&cli.command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(RUNTIME_ERROR)
        }
    }
}

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cascademix::{FitConfig, Window};
use serde::{Deserialize, Serialize};

use crate::args::GlobalArgs;

/// Keys accepted in a `--config` TOML file; the same names as the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    cascades: Option<PathBuf>,
    followers: Option<PathBuf>,
    model: Option<PathBuf>,
    window: Option<String>,
    tol: Option<f64>,
    max_iters: Option<usize>,
    restarts: Option<usize>,
    k: Option<usize>,
    init_seed: Option<u64>,
    rounds: Option<usize>,
    seed: Option<u64>,
    time_scale: Option<f64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    force: Option<bool>,
}

/// Fully resolved settings of one run, recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub cascades: Option<PathBuf>,
    pub followers: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// `None` means "take it from the model, else the default".
    pub window: Option<Window>,
    pub fit: FitConfig,
    pub rounds: usize,
    pub seed: u64,
    pub time_scale: f64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub force: bool,
    /// `--out` was given rather than defaulted.
    #[serde(skip)]
    pub out_explicit: bool,
}

pub const DEFAULT_ROUNDS: usize = 1000;
pub const DEFAULT_OUT: &str = "cascademix-out";

fn absolute(p: PathBuf) -> Result<PathBuf> {
    if p.is_absolute() {
        return Ok(p);
    }
    Ok(std::env::current_dir()
        .context("reading the working directory")?
        .join(p))
}

fn read_file_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

impl RunConfig {
    /// Flags win over the config file, which wins over defaults.
    pub fn resolve(command: &str, flags: &GlobalArgs) -> Result<Self> {
        let file = match &flags.config {
            Some(p) => read_file_config(p)?,
            None => FileConfig::default(),
        };
        let window = match (flags.window, &file.window) {
            (Some(w), _) => Some(w),
            (None, Some(s)) => Some(s.parse::<Window>().context("config key `window`")?),
            (None, None) => None,
        };
        let seed = flags.seed.or(file.seed).unwrap_or(0);
        let defaults = FitConfig::default();
        let fit = FitConfig {
            k: flags.k.or(file.k).unwrap_or(defaults.k),
            init_seed: flags.init_seed.or(file.init_seed).unwrap_or(seed),
            max_iters: flags
                .max_iters
                .or(file.max_iters)
                .unwrap_or(defaults.max_iters),
            tol: flags.tol.or(file.tol).unwrap_or(defaults.tol),
            restarts: flags
                .restarts
                .or(file.restarts)
                .unwrap_or(defaults.restarts),
            failure_rule: defaults.failure_rule,
        };
        fit.validate().context("EM settings")?;
        let time_scale = flags.time_scale.or(file.time_scale).unwrap_or(1.0);
        anyhow::ensure!(
            time_scale.is_finite() && time_scale > 0.0,
            "--time-scale must be positive, got {time_scale}"
        );
        let threads = flags.threads.or(file.threads);
        anyhow::ensure!(threads != Some(0), "--threads must be at least 1");
        let rounds = flags.rounds.or(file.rounds).unwrap_or(DEFAULT_ROUNDS);
        anyhow::ensure!(rounds > 0, "--rounds must be at least 1");
        Ok(Self {
            command: command.to_string(),
            cascades: flags
                .cascades
                .clone()
                .or(file.cascades)
                .map(absolute)
                .transpose()?,
            followers: flags
                .followers
                .clone()
                .or(file.followers)
                .map(absolute)
                .transpose()?,
            model: flags
                .model
                .clone()
                .or(file.model)
                .map(absolute)
                .transpose()?,
            window,
            fit,
            rounds,
            seed,
            time_scale,
            out_explicit: flags.out.is_some() || file.out.is_some(),
            out: absolute(
                flags
                    .out
                    .clone()
                    .or(file.out)
                    .unwrap_or_else(|| DEFAULT_OUT.into()),
            )?,
            threads,
            force: flags.force || file.force.unwrap_or(false),
        })
    }

    pub fn require_cascades(&self) -> Result<&Path> {
        self.cascades
            .as_deref()
            .context("this subcommand needs --cascades")
    }

    pub fn require_model(&self) -> Result<&Path> {
        self.model
            .as_deref()
            .context("this subcommand needs --model")
    }
}

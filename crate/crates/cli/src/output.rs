use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::config::RunConfig;

/// Output directory of one run. Tracks every file written for the manifest.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
    started: Instant,
}

impl OutDir {
    /// Creates `root`, refusing a non-empty directory unless `force` is set.
    pub fn prepare(root: &Path, force: bool) -> Result<Self> {
        if root.exists() {
            let mut entries =
                std::fs::read_dir(root).with_context(|| format!("reading {}", root.display()))?;
            if entries.next().is_some() && !force {
                bail!(
                    "output directory {} is not empty; pass --force to overwrite",
                    root.display()
                );
            }
        } else {
            std::fs::create_dir_all(root)
                .with_context(|| format!("creating {}", root.display()))?;
        }
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
            started: Instant::now(),
        })
    }

    fn track(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.track(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let path = self.track(name);
        let mut w =
            csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `manifest.json` last, so a partial run never leaves one behind.
    pub fn finish(mut self, cfg: &RunConfig, extra: serde_json::Value) -> Result<()> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: cfg,
            seed: cfg.seed,
            init_seed: cfg.fit.init_seed,
            threads: rayon::current_num_threads(),
            wall_time_secs: self.started.elapsed().as_secs_f64(),
            outputs: std::mem::take(&mut self.written),
            details: extra,
        };
        self.write_json("manifest.json", &manifest)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    seed: u64,
    init_seed: u64,
    threads: usize,
    wall_time_secs: f64,
    outputs: Vec<String>,
    details: serde_json::Value,
}

/// `0.5` → `pi0.50`, used in per-mixture file names.
pub fn pi_tag(pi: f64) -> String {
    format!("pi{pi:.2}")
}

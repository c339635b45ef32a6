//! Configuration-driven experiment runner.

pub mod config;
pub mod oracles;
pub mod output;
pub mod report;
pub mod run;
pub mod schema;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use config::ExperimentConfig;
use output::{Manifest, Sink, SUMMARY};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] homog_core::Error),
    #[error("corrupt output: {0}")]
    Corrupt(String),
    #[error("checks failed: {}", .0.join("; "))]
    CheckFailed(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use homog_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Core(E::InvalidInput(_)) => 2,
            CliError::Core(E::NonConvergence { .. } | E::NonFinite(_)) => 3,
            CliError::CheckFailed(_) => 4,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub cached: bool,
}

/// Validates, runs and records one configuration under `out`.
///
/// Nothing is written when validation fails. With `cache` on, a directory
/// holding a complete run of the same content hash is reused. Failed checks
/// are recorded in the manifest and reported as [`CliError::CheckFailed`]
/// by the caller through [`Outcome::check`].
pub fn run_config(cfg: &ExperimentConfig, out: &Path, cache: bool) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let hash = cfg.content_hash();
    let dir = out.join(cfg.dir_name());
    if cache {
        if let Ok(m) = Manifest::read(&dir) {
            if m.status == "ok" && m.is_complete_for(&dir, &hash) {
                return Ok(Outcome {
                    dir,
                    manifest: m,
                    cached: true,
                });
            }
        }
    }
    fs::create_dir_all(&dir)?;
    let start = Instant::now();
    let mut sink = Sink::new(&dir);
    let summary = run::execute(cfg, &mut sink)?;
    sink.json(SUMMARY, &summary)?;
    let failed_checks: Vec<String> = cfg.checks.iter().filter_map(|c| c.evaluate(&summary)).collect();
    let manifest = Manifest {
        name: cfg.name.clone(),
        kind: cfg.experiment.kind().into(),
        config_hash: hash,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: start.elapsed().as_secs_f64(),
        status: "ok".into(),
        files: sink.into_files(),
        summary,
        failed_checks,
        config: cfg.clone(),
    };
    manifest.write(&dir)?;
    Ok(Outcome {
        dir,
        manifest,
        cached: false,
    })
}

impl Outcome {
    pub fn check(&self) -> Result<(), CliError> {
        if self.manifest.failed_checks.is_empty() {
            Ok(())
        } else {
            Err(CliError::CheckFailed(self.manifest.failed_checks.clone()))
        }
    }
}

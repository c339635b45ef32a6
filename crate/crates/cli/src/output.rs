use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub kind: String,
    pub config_hash: String,
    pub tool_version: String,
    pub wall_time_s: f64,
    pub status: String,
    pub files: Vec<String>,
    pub summary: BTreeMap<String, f64>,
    #[serde(default)]
    pub failed_checks: Vec<String>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        serde_json::from_str(&text).map_err(|e| CliError::Corrupt(format!("{}: {e}", dir.display())))
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(dir.join(MANIFEST), text + "\n")?;
        Ok(())
    }

    /// Whether `dir` already holds a complete run of this configuration.
    pub fn is_complete_for(&self, dir: &Path, hash: &str) -> bool {
        self.config_hash == hash && self.files.iter().all(|f| dir.join(f).is_file())
    }
}

/// Shortest representation that reads back to the same `f64`.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Collects the artifacts of one run.
pub struct Sink {
    dir: PathBuf,
    files: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.dir.join(name)).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            debug_assert_eq!(r.len(), header.len(), "{name}");
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("value serializes");
        fs::write(self.dir.join(name), text + "\n")?;
        self.files.push(name.into());
        Ok(())
    }

    /// Registers a grid dump written under `stem` (`.bin` and `.json`).
    pub fn dump(&mut self, stem: &str) -> PathBuf {
        self.files.push(format!("{stem}.bin"));
        self.files.push(format!("{stem}.json"));
        self.dir.join(stem)
    }

    pub fn into_files(self) -> Vec<String> {
        self.files
    }
}

pub fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

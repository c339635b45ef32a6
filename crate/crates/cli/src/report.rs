//! Aggregation of finished runs into cross-run tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use crate::output::{num, Manifest, Sink, MANIFEST};
use crate::run::HBAR_HEADER;
use crate::CliError;

pub const RUNS_HEADER: [&str; 6] = ["name", "kind", "config_hash", "status", "wall_time_s", "failed_checks"];
pub const ERRORS_HEADER: [&str; 3] = ["name", "epsilon", "sup_error"];

#[derive(Debug, Default)]
pub struct Report {
    pub runs: usize,
    pub corrupt: Vec<PathBuf>,
    pub files: Vec<String>,
}

/// Loads every `*/manifest.json` below `out`; unreadable ones are listed
/// rather than fatal.
pub fn scan(out: &Path) -> Result<(Vec<(PathBuf, Manifest)>, Vec<PathBuf>), CliError> {
    let mut good = Vec::new();
    let mut corrupt = Vec::new();
    if !out.is_dir() {
        return Ok((good, corrupt));
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(out)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST).is_file())
        .collect();
    dirs.sort();
    for d in dirs {
        match Manifest::read(&d) {
            Ok(m) => good.push((d, m)),
            Err(_) => corrupt.push(d),
        }
    }
    Ok((good, corrupt))
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut r = csv::Reader::from_path(path).map_err(crate::output::csv_err)?;
    let header = r.headers().map_err(crate::output::csv_err)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(crate::output::csv_err)?;
    Ok((header, rows))
}

/// Writes `runs.csv`, one `summary_<kind>.csv` per kind present, and the merged
/// `errors_vs_epsilon.csv` and `hbar.csv` into `dest`.
pub fn write_report(out: &Path, dest: &Path) -> Result<Report, CliError> {
    let (runs, corrupt) = scan(out)?;
    fs::create_dir_all(dest)?;
    let mut sink = Sink::new(dest);

    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|(_, m)| {
            vec![
                m.name.clone(),
                m.kind.clone(),
                m.config_hash.clone(),
                m.status.clone(),
                num(m.wall_time_s),
                m.failed_checks.join("; "),
            ]
        })
        .collect();
    sink.csv("runs.csv", &RUNS_HEADER, &rows)?;

    let mut by_kind: BTreeMap<&str, Vec<&Manifest>> = BTreeMap::new();
    for (_, m) in &runs {
        by_kind.entry(m.kind.as_str()).or_default().push(m);
    }
    for (kind, ms) in &by_kind {
        let keys: BTreeSet<&String> = ms.iter().flat_map(|m| m.summary.keys()).collect();
        let mut header = vec!["name", "config_hash"];
        header.extend(keys.iter().map(|k| k.as_str()));
        let rows: Vec<Vec<String>> = ms
            .iter()
            .map(|m| {
                let mut r = vec![m.name.clone(), m.config_hash.clone()];
                r.extend(keys.iter().map(|k| m.summary.get(*k).map(|v| num(*v)).unwrap_or_default()));
                r
            })
            .collect();
        sink.csv(&format!("summary_{kind}.csv"), &header, &rows)?;
    }

    let mut errors: Vec<(f64, String, String)> = Vec::new();
    let mut hbar: Vec<Vec<String>> = Vec::new();
    for (dir, m) in &runs {
        let path = dir.join("errors_vs_epsilon.csv");
        if path.is_file() {
            let (h, rows) = read_csv(&path)?;
            let (ie, is) = (col(&h, "epsilon", &path)?, col(&h, "sup_error", &path)?);
            for r in rows {
                let eps: f64 = r[ie].parse().map_err(|_| CliError::Corrupt(path.display().to_string()))?;
                errors.push((eps, m.name.clone(), r[is].clone()));
            }
        }
        let path = dir.join("hbar.csv");
        if path.is_file() {
            let (h, rows) = read_csv(&path)?;
            if h != HBAR_HEADER {
                return Err(CliError::Corrupt(format!("{}: unexpected header", path.display())));
            }
            hbar.extend(rows.into_iter().map(|r| std::iter::once(m.name.clone()).chain(r).collect()));
        }
    }
    errors.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let rows: Vec<Vec<String>> = errors.into_iter().map(|(e, n, s)| vec![n, num(e), s]).collect();
    sink.csv("errors_vs_epsilon.csv", &ERRORS_HEADER, &rows)?;
    let mut header = vec!["name"];
    header.extend(HBAR_HEADER);
    sink.csv("hbar.csv", &header, &hbar)?;

    Ok(Report {
        runs: runs.len(),
        corrupt,
        files: sink.into_files(),
    })
}

fn col(header: &[String], name: &str, path: &Path) -> Result<usize, CliError> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Corrupt(format!("{}: no column {name}", path.display())))
}

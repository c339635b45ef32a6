//! The shipped CSV column schema.

use serde::Deserialize;

pub const SCHEMA_TOML: &str = include_str!("../schema/csv-columns.toml");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSchema {
    pub name: String,
    pub scope: String,
    #[serde(default)]
    pub kinds: Vec<String>,
    #[serde(default)]
    pub open: bool,
    pub columns: Vec<(String, String)>,
}

#[derive(Debug, Deserialize)]
struct Schema {
    file: Vec<FileSchema>,
}

pub fn files() -> Vec<FileSchema> {
    toml::from_str::<Schema>(SCHEMA_TOML).expect("shipped schema parses").file
}

/// Checks a written header against the schema entry for `file` in `scope`.
pub fn check_header(scope: &str, file: &str, header: &[String]) -> Result<(), String> {
    let key = match file.strip_prefix("summary_") {
        Some(_) if scope == "report" => "summary_<kind>.csv",
        _ => file,
    };
    let all = files();
    let entry = all
        .iter()
        .find(|f| f.scope == scope && f.name == key)
        .ok_or_else(|| format!("{scope}/{file}: not in the schema"))?;
    let want: Vec<&str> = entry.columns.iter().map(|(c, _)| c.as_str()).collect();
    let ok = if entry.open {
        header.len() >= want.len() && header[..want.len()].iter().zip(&want).all(|(a, b)| a == b)
    } else {
        header.iter().map(String::as_str).eq(want.iter().copied())
    };
    if ok {
        Ok(())
    } else {
        Err(format!("{scope}/{file}: header {header:?} does not match {want:?}"))
    }
}

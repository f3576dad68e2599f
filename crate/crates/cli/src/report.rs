//! Dual-format reports: `<name>.txt` and `<name>.json` in the directory
//! named by `TABLEBDD_REPORT_DIR`, when that variable is set.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{CliError, REPORT_DIR_ENV};

pub fn report_dir() -> Option<PathBuf> {
    std::env::var_os(REPORT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Writes both report files into `dir` and returns their paths.
pub fn write_reports_to(
    dir: &Path,
    name: &str,
    text: &str,
    json: &impl Serialize,
) -> Result<Vec<PathBuf>, CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let txt = dir.join(format!("{name}.txt"));
    std::fs::write(&txt, text).map_err(io(&txt))?;
    let json_path = dir.join(format!("{name}.json"));
    let mut body = serde_json::to_string_pretty(json).expect("reports serialize");
    body.push('\n');
    std::fs::write(&json_path, body).map_err(io(&json_path))?;
    Ok(vec![txt, json_path])
}

/// [`write_reports_to`] the configured report directory, if any.
pub fn write_reports(name: &str, text: &str, json: &impl Serialize) -> Result<Vec<PathBuf>, CliError> {
    match report_dir() {
        Some(dir) => write_reports_to(&dir, name, text, json),
        None => Ok(Vec::new()),
    }
}

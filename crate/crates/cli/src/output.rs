use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::CliResult;

/// One CSV artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    /// File name suffix appended to the config name (empty for the main
    /// table).
    pub suffix: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(suffix: &str, header: &[&'static str]) -> Self {
        Self {
            suffix: suffix.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self, stem: &str) -> String {
        format!("{stem}{}.csv", self.suffix)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub tables: Vec<CsvTable>,
    /// Derived quantities that do not fit a row (fitted slopes etc.).
    pub summary: serde_json::Value,
}

/// Plain decimal for estimates and parameters.
pub fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

/// Scientific notation for errors, standard errors, condition numbers.
pub fn sci(v: f64) -> String {
    format!("{v:.3e}")
}

pub fn int(v: impl std::fmt::Display) -> String {
    v.to_string()
}

/// Writes every table and the JSON sidecar into `dir`; returns the paths.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &RunOutput) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for t in &out.tables {
        let path = dir.join(t.file_name(&cfg.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&t.header)?;
        for r in &t.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        written.push(path);
    }
    let sidecar = json!({
        "config": cfg,
        "seed": cfg.seed,
        "outputs": out.tables.iter().map(|t| t.file_name(&cfg.name)).collect::<Vec<_>>(),
        "summary": out.summary,
    });
    let path = dir.join(format!("{}.json", cfg.name));
    std::fs::write(&path, serde_json::to_string_pretty(&sidecar).expect("json") + "\n")?;
    written.push(path);
    Ok(written)
}

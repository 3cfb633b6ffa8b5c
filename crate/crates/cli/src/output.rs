//! CSV rendering and run manifests.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use qnnent_core::schedule::fmt_float;
use qnnent_core::TimeGrid;
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

/// One CSV field.
#[derive(Clone, Debug)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Header plus rows, rendered with 17 significant digits per float.
#[derive(Clone, Debug)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    /// Fails rather than emit a NaN or infinity.
    pub fn render(&self) -> Result<String> {
        let mut out = self.header.join(",");
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let mut fields = Vec::with_capacity(row.len());
            for (cell, name) in row.iter().zip(&self.header) {
                fields.push(match cell {
                    Cell::Int(v) => v.to_string(),
                    Cell::Float(v) if v.is_finite() => fmt_float(*v),
                    Cell::Float(v) => bail!("non-finite value {v} in column {name}, row {i}"),
                    Cell::Text(s) => s.clone(),
                });
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        Ok(out)
    }
}

/// Sidecar written next to every command's outputs. `request` holds every
/// input the command read, so a replay needs nothing else.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub grid: TimeGrid<f64>,
    pub request: serde_json::Value,
    pub files: Vec<String>,
    pub wall_time_seconds: f64,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
    }
}

/// Writes `files` into `dir`, then the manifest listing them.
pub fn write_outputs(dir: &Path, files: &[(String, String)], mut manifest: Manifest) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    }
    manifest.files = files.iter().map(|(n, _)| n.clone()).collect();
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

//! CSV tables, cell bookkeeping and the run manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// One CSV field. Floats print with 17 significant digits; non-finite
/// floats and `Null` print as empty fields.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    Null,
}

impl Field {
    pub fn render(&self) -> String {
        match self {
            Field::Str(s) => s.clone(),
            Field::Int(i) => i.to_string(),
            // `+ 0.0` turns a negative zero into zero
            Field::Float(x) if x.is_finite() => format!("{:.16e}", x + 0.0),
            Field::Float(_) | Field::Null => String::new(),
            Field::Bool(b) => b.to_string(),
        }
    }
}

impl From<f64> for Field {
    fn from(x: f64) -> Self {
        Field::Float(x)
    }
}

impl From<Option<f64>> for Field {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Field::Null, Field::Float)
    }
}

impl From<usize> for Field {
    fn from(x: usize) -> Self {
        Field::Int(x as i64)
    }
}

impl From<u64> for Field {
    fn from(x: u64) -> Self {
        // seeds above i64::MAX keep their digits
        Field::Str(x.to_string())
    }
}

impl From<bool> for Field {
    fn from(x: bool) -> Self {
        Field::Bool(x)
    }
}

impl From<&str> for Field {
    fn from(x: &str) -> Self {
        Field::Str(x.to_string())
    }
}

impl From<String> for Field {
    fn from(x: String) -> Self {
        Field::Str(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File name inside the output directory.
    pub file: String,
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new(file: impl Into<String>, header: &'static [&'static str]) -> Self {
        Table {
            file: file.into(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Field>) {
        assert_eq!(row.len(), self.header.len(), "row width for {}", self.file);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> io::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Field::render))?;
        }
        w.into_inner().map_err(|e| io::Error::other(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellStatus {
    pub cell: String,
    /// `ok`, `failed` or `skipped`.
    pub status: &'static str,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Invariant {
    pub name: String,
    /// Hard invariants decide the exit status; the others are diagnostics.
    pub hard: bool,
    pub passed: bool,
    pub detail: String,
}

/// Everything a subcommand produces before it touches the disk.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub json: Vec<(String, serde_json::Value)>,
    pub cells: Vec<CellStatus>,
    pub invariants: Vec<Invariant>,
}

impl RunOutput {
    pub fn failed_cells(&self) -> Vec<&CellStatus> {
        self.cells.iter().filter(|c| c.status == "failed").collect()
    }

    pub fn failed_invariants(&self) -> Vec<&Invariant> {
        self.invariants.iter().filter(|i| i.hard && !i.passed).collect()
    }

    pub fn success(&self) -> bool {
        self.failed_cells().is_empty() && self.failed_invariants().is_empty()
    }

    pub fn invariant(&mut self, name: &str, hard: bool, passed: bool, detail: String) {
        self.invariants.push(Invariant {
            name: name.to_string(),
            hard,
            passed,
            detail,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileHash {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub run_id: String,
    pub seed: u64,
    pub threads: usize,
    /// The resolved configuration in config-file syntax.
    pub config: String,
    pub status: &'static str,
    pub wall_seconds: f64,
    pub cells: Vec<CellStatus>,
    pub invariants: Vec<Invariant>,
    pub files: Vec<FileHash>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes every table and JSON side file, then `manifest.json`. Returns the
/// paths written, manifest last.
pub fn write_all(dir: &Path, out: &RunOutput, mut manifest: RunManifest) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8], hashes: &mut Vec<FileHash>| -> io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        hashes.push(FileHash {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        written.push(path);
        Ok(())
    };
    let mut hashes = Vec::new();
    for t in &out.tables {
        put(&t.file, &t.to_csv()?, &mut hashes)?;
    }
    for (name, value) in &out.json {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        put(name, text.as_bytes(), &mut hashes)?;
    }
    manifest.files = hashes;
    let mut text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    text.push('\n');
    let path = dir.join("manifest.json");
    fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}

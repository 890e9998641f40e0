//! Versioned CSV tables with provenance headers and a trailing checksum,
//! and JSON helpers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::KeyValues;
use crate::error::{Error, Result};

/// Bumped on any breaking change of column layout.
pub const CSV_SCHEMA_VERSION: u32 = 1;
const CHECKSUM_PREFIX: &str = "# sha256 = ";

#[derive(Debug, Clone)]
pub struct CsvTable {
    pub kind: String,
    pub provenance: KeyValues,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(kind: &str, provenance: KeyValues, columns: &[&str]) -> Self {
        Self {
            kind: kind.into(),
            provenance,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Body followed by `# sha256 = <hex>` over all preceding bytes.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# sharpen {} csv", self.kind);
        let _ = writeln!(out, "# version = {CSV_SCHEMA_VERSION}");
        out.push_str(&self.provenance.render("# "));
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        let digest = hex::encode(Sha256::digest(out.as_bytes()));
        let _ = writeln!(out, "{CHECKSUM_PREFIX}{digest}");
        out
    }

    /// Writes through a temporary file so a crash never leaves a file that
    /// passes [`verify_checksum`].
    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// True when `path` exists and its trailing checksum matches its body.
pub fn verify_checksum(path: &Path) -> bool {
    let Ok(text) = fs::read_to_string(path) else {
        return false;
    };
    let Some(body_end) = text.trim_end_matches('\n').rfind('\n').map(|i| i + 1) else {
        return false;
    };
    let (body, last) = text.split_at(body_end);
    match last.trim_end().strip_prefix(CHECKSUM_PREFIX) {
        Some(hexdigest) => hex::encode(Sha256::digest(body.as_bytes())) == hexdigest,
        None => false,
    }
}

/// A parsed CSV table: provenance pairs, header and rows.
#[derive(Debug, Clone)]
pub struct ParsedCsv {
    pub provenance: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedCsv {
    pub fn read(path: &Path) -> Result<Self> {
        let schema = |reason: String| Error::Schema {
            path: path.to_path_buf(),
            reason,
        };
        if !verify_checksum(path) {
            return Err(schema("missing or mismatched checksum".into()));
        }
        let text = fs::read_to_string(path)?;
        let mut provenance = Vec::new();
        let mut columns = None;
        let mut rows = Vec::new();
        for line in text.lines() {
            if let Some(comment) = line.strip_prefix("# ") {
                if let Some((k, v)) = comment.split_once(" = ") {
                    provenance.push((k.to_string(), v.to_string()));
                }
            } else if columns.is_none() {
                columns = Some(line.split(',').map(str::to_string).collect::<Vec<_>>());
            } else if !line.is_empty() {
                rows.push(line.split(',').map(str::to_string).collect());
            }
        }
        let columns = columns.ok_or_else(|| schema("no header row".into()))?;
        match provenance.iter().find(|(k, _)| k == "version") {
            Some((_, v)) if v.parse() == Ok(CSV_SCHEMA_VERSION) => {}
            Some((_, v)) => return Err(schema(format!("unsupported schema version {v}"))),
            None => return Err(schema("no version field".into())),
        }
        if rows.iter().any(|r: &Vec<String>| r.len() != columns.len()) {
            return Err(schema("row width differs from header".into()));
        }
        Ok(Self {
            provenance,
            columns,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.provenance.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Shortest round-trip decimal form, so identical values give identical bytes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// File-name-safe rendering of a rate, e.g. `0.15` -> `0p15`.
pub fn tag(v: f64) -> String {
    fmt_f64(v).replace('.', "p").replace('-', "m")
}

/// Files in `dir` whose names start with `prefix` and end with `suffix`,
/// sorted by name.
pub fn list_files(dir: &Path, prefix: &str, suffix: &str) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(prefix) && n.ends_with(suffix))
        })
        .collect();
    out.sort();
    Ok(out)
}

//! Run directories, CSV tables and the checksum manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV table with a fixed header.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| quote(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn quote(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    file: String,
    bytes: usize,
    sha256: String,
}

/// `<base>/<subcommand>/<timestamp>/`, with every written file recorded.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl RunDir {
    pub fn create(base: &Path, subcommand: &str) -> io::Result<Self> {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.6fZ").to_string();
        let parent = base.join(subcommand);
        fs::create_dir_all(&parent)?;
        let mut path = parent.join(&stamp);
        let mut k = 1;
        while path.exists() {
            path = parent.join(format!("{stamp}-{k}"));
            k += 1;
        }
        fs::create_dir(&path)?;
        Ok(Self { path, entries: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> io::Result<()> {
        let target = self.path.join(name);
        if let Some(dir) = target.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&target, contents)?;
        self.entries.push(ManifestEntry {
            file: name.to_string(),
            bytes: contents.len(),
            sha256: hex::encode(Sha256::digest(contents)),
        });
        Ok(())
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> io::Result<()> {
        self.write(name, table.render().as_bytes())
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json` and returns the directory.
    pub fn finish(self) -> io::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(&self.entries).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(self.path.join("manifest.json"), text)?;
        Ok(self.path)
    }
}

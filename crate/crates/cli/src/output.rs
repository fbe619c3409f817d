//! Result tables and their CSV/JSON files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::ser::{Serialize, SerializeMap, Serializer};
use serde_json::Value;

use crate::spec::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    /// Exact rational as "p/q".
    Exact(String),
    Missing,
}

impl Cell {
    /// Shortest text that parses back to the same value.
    pub fn to_text(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format!("{x:?}"),
            Cell::Exact(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Float)
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Int(i) => s.serialize_i64(*i),
            Cell::Float(x) if x.is_finite() => s.serialize_f64(*x),
            Cell::Float(x) => s.serialize_str(&format!("{x:?}")),
            Cell::Exact(q) => s.serialize_str(q),
            Cell::Missing => s.serialize_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

impl Serialize for Table {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(2))?;
        m.serialize_entry("columns", &self.columns)?;
        m.serialize_entry("rows", &self.rows)?;
        m.end()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub metadata: BTreeMap<String, Value>,
    pub notes: Vec<String>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn to_json(&self) -> Value {
        let tables: serde_json::Map<String, Value> = self
            .tables
            .iter()
            .map(|t| (t.name.clone(), serde_json::to_value(t).expect("tables serialize")))
            .collect();
        serde_json::json!({
            "metadata": self.metadata,
            "notes": self.notes,
            "tables": tables,
        })
    }

    fn csv_bytes(&self, table: &Table) -> anyhow::Result<Vec<u8>> {
        let mut buf = Vec::new();
        for (k, v) in &self.metadata {
            let text = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            writeln!(buf, "# {k}: {text}")?;
        }
        writeln!(buf, "# table: {}", table.name)?;
        for note in &self.notes {
            writeln!(buf, "# note: {note}")?;
        }
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(&table.columns)?;
        for row in &table.rows {
            w.write_record(row.iter().map(Cell::to_text))?;
        }
        w.into_inner().map_err(|e| anyhow::anyhow!("flushing csv: {e}"))
    }

    /// Destination of each file: `out` itself for JSON and single-table CSV,
    /// otherwise `<stem>_<table>.csv` beside it.
    pub fn planned_paths(&self, out: &Path, format: Format) -> Vec<PathBuf> {
        if format == Format::Json || self.tables.len() == 1 {
            return vec![out.to_path_buf()];
        }
        let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let ext = out.extension().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
        self.tables
            .iter()
            .map(|t| out.with_file_name(format!("{stem}_{}.{ext}", t.name)))
            .collect()
    }

    /// Writes every file to a temporary sibling first and renames only after all
    /// of them were written.
    pub fn write(&self, out: &Path, format: Format) -> anyhow::Result<Vec<PathBuf>> {
        let paths = self.planned_paths(out, format);
        let contents: Vec<Vec<u8>> = match format {
            Format::Json => vec![serde_json::to_vec_pretty(&self.to_json())?],
            Format::Csv => self.tables.iter().map(|t| self.csv_bytes(t)).collect::<anyhow::Result<_>>()?,
        };
        let mut staged = Vec::with_capacity(paths.len());
        for (path, bytes) in paths.iter().zip(&contents) {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
                _ => PathBuf::from("."),
            };
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            #[cfg(unix)]
            {
                use std::os::unix::fs::PermissionsExt;
                tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
            }
            staged.push((tmp, path));
        }
        for (tmp, path) in staged {
            tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(paths)
    }
}

/// Parses a CSV file written by [`Report::write`]: metadata lines and the table.
pub fn read_csv(path: &Path) -> anyhow::Result<(BTreeMap<String, String>, Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut meta = BTreeMap::new();
    let mut body = String::new();
    for line in text.lines() {
        match line.strip_prefix("# ") {
            Some(kv) => {
                if let Some((k, v)) = kv.split_once(": ") {
                    meta.entry(k.to_string()).or_insert_with(|| v.to_string());
                }
            }
            None => {
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()?;
    Ok((meta, header, rows))
}

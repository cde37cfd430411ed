use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Fixed 17-significant-digit form used in every numeric output.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Optional values are written as empty fields.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Output directory that records the files it writes.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(OutDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    pub fn write_csv(&mut self, name: &str, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_path(self.root.join(name)).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(&r).map_err(csv_err)?;
        }
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        std::fs::write(self.root.join(name), text + "\n")?;
        self.written.push(name.to_string());
        Ok(())
    }
}

/// Column names `prefix_1 … prefix_n`.
pub fn axis_columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

pub fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

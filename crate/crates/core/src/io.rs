//! File helpers shared by persistence and the experiment harness.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{KsError, Result};

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| KsError::io(parent, e))?;
        }
    }
    let file_name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{file_name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| KsError::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| KsError::io(&tmp, e))?;
        f.sync_all().map_err(|e| KsError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| KsError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| KsError::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Serializes rows to CSV in memory and writes them atomically.
pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for row in rows {
        wtr.serialize(row)?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| KsError::io(path, e.into_error()))?;
    atomic_write(path, &bytes)
}

/// Two-column plot data, one `x y` pair per line.
pub fn write_plot_data(path: &Path, xs: &[f64], ys: &[f64]) -> Result<()> {
    let mut out = String::new();
    for (x, y) in xs.iter().zip(ys) {
        out.push_str(&format!("{x:e} {y:e}\n"));
    }
    atomic_write(path, out.as_bytes())
}

//! The append-only `results.csv` table.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};
use clnr_core::eval::METRICS_HEADER;

use crate::{CliResult, Failure};

/// Appends `row`, writing the header first when the file is new or empty.
/// Refuses to append to a file whose header differs.
pub fn append(path: &Path, row: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let existing = fs::read_to_string(path).unwrap_or_default();
    let needs_header = existing.trim().is_empty();
    if let Some(first) = existing.lines().next().filter(|_| !needs_header) {
        if first.trim() != METRICS_HEADER {
            return Err(Failure::usage(anyhow!("{} has an unexpected header '{first}'", path.display())));
        }
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path).with_context(|| path.display().to_string()).map_err(Failure::usage)?;
    if needs_header {
        writeln!(f, "{METRICS_HEADER}")?;
    } else if !existing.ends_with('\n') {
        writeln!(f)?;
    }
    writeln!(f, "{row}")?;
    Ok(())
}

/// Header and data rows of a comma-separated table.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Table> {
        let text = fs::read_to_string(path).with_context(|| path.display().to_string()).map_err(Failure::usage)?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = match lines.next() {
            Some(h) => h.split(',').map(|s| s.trim().to_string()).collect(),
            None => return Err(Failure::usage(anyhow!("{} is empty", path.display()))),
        };
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(Failure::usage(anyhow!(
                    "{} row {}: {} fields, header has {}",
                    path.display(),
                    i + 1,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Failure::usage(anyhow!("no column '{name}' (have {})", self.header.join(", "))))
    }
}

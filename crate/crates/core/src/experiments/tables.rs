use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentReport;

/// A named table written as `<name>.csv` and `<name>.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// 17 significant digits, enough to round-trip every `f64`.
fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let line = |cells: &[String]| cells.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(",");
        writeln!(out, "{}", line(&self.columns))?;
        for row in &self.rows {
            writeln!(out, "{}", line(row))?;
        }
        Ok(())
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.len()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        writeln!(out, "{}", line(&self.columns))?;
        writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "))?;
        for row in &self.rows {
            writeln!(out, "{}", line(row))?;
        }
        Ok(())
    }

    /// Parses the output of [`Table::write_csv`] (unquoted fields only).
    pub fn parse_csv(name: &str, text: &str) -> Self {
        let mut lines = text.lines();
        let split = |l: &str| l.split(',').map(str::to_string).collect::<Vec<_>>();
        let columns = lines.next().map(split).unwrap_or_default();
        let rows = lines.filter(|l| !l.is_empty()).map(split).collect();
        Self {
            name: name.to_string(),
            columns,
            rows,
        }
    }
}

/// Error tables: one row per experiment setting.
pub fn error_table(name: &str, reports: &[ExperimentReport]) -> Table {
    let mut t = Table::new(
        name,
        &["algorithm", "topology", "players", "iterations", "paths", "mean_error", "ci_width"],
    );
    for r in reports {
        let alg = match r.algorithm {
            super::Algorithm::Sync => "sync",
            super::Algorithm::Gossip => "gossip",
        };
        t.rows.push(vec![
            alg.to_string(),
            r.topology.clone(),
            r.players.to_string(),
            r.iters.to_string(),
            r.sample_paths.to_string(),
            float(r.mean_error),
            float(r.ci_width),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingRow {
    pub topology: String,
    pub p_ratio: f64,
    pub lambda: f64,
    pub second_eigenvalue: f64,
    pub iterations: Option<usize>,
}

/// Mixing table: `p_min/p_max`, `lambda` and concurrence iterations per
/// topology.
pub fn mixing_table(name: &str, rows: &[MixingRow]) -> Table {
    let mut t = Table::new(
        name,
        &["topology", "p_min/p_max", "lambda", "second_eigenvalue_w", "iterations"],
    );
    for r in rows {
        t.rows.push(vec![
            r.topology.clone(),
            float(r.p_ratio),
            float(r.lambda),
            float(r.second_eigenvalue),
            r.iterations.map(|i| i.to_string()).unwrap_or_default(),
        ]);
    }
    t
}

/// Writes each table as CSV and aligned text under `dir`.
pub fn emit_tables(dir: &Path, tables: &[Table]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for t in tables {
        let csv = dir.join(format!("{}.csv", t.name));
        t.write_csv(io::BufWriter::new(fs::File::create(&csv)?))?;
        let txt = dir.join(format!("{}.txt", t.name));
        t.write_text(io::BufWriter::new(fs::File::create(&txt)?))?;
        written.push(csv);
        written.push(txt);
    }
    Ok(written)
}

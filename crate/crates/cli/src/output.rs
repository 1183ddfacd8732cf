//! CSV tables, the run manifest and the plot script.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::config::RunConfig;
use crate::CliError;

/// A CSV file: header line plus rows, written with LF endings.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: String,
    pub rows: Vec<String>,
}

impl Table {
    pub fn new(file: &str, header: &str) -> Self {
        Self {
            file: file.into(),
            header: header.into(),
            rows: Vec::new(),
        }
    }

    pub fn with_rows(mut self, rows: Vec<String>) -> Self {
        self.rows = rows;
        self
    }

    pub fn render(&self) -> String {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(&self.header);
        s.push('\n');
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }
}

/// One acceptance assertion of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    /// `value <= limit`, failing on `NaN`.
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self::new(name, value <= limit, format!("{value:e} <= {limit:e}"))
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_err(path))
}

pub(crate) fn write_tables(dir: &Path, tables: &[Table]) -> Result<Vec<PathBuf>, CliError> {
    tables
        .iter()
        .map(|t| {
            let path = dir.join(&t.file);
            write_file(&path, &t.render())?;
            Ok(path)
        })
        .collect()
}

pub(crate) fn manifest(
    cfg: &RunConfig,
    tables: &[Table],
    checks: &[Check],
    wall: Duration,
) -> String {
    let mut m = String::from("# monopole-lab run manifest\n");
    for (k, v) in cfg.echo() {
        m.push_str(&format!("{k} = {v}\n"));
    }
    m.push_str(&format!(
        "monopole_lab_version = {}\n",
        env!("CARGO_PKG_VERSION")
    ));
    m.push_str(&format!(
        "monopole_core_version = {}\n",
        monopole_core::VERSION
    ));
    m.push_str(&format!("wall_time_s = {:.3}\n", wall.as_secs_f64()));
    for t in tables {
        m.push_str(&format!("# file {} rows {}\n", t.file, t.rows.len()));
    }
    for c in checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        m.push_str(&format!("# check {} {verdict} {}\n", c.name, c.detail));
    }
    m
}

/// A matplotlib script drawing every numeric column of every table
/// against its first column, one PNG per table.
pub(crate) fn plot_script(tables: &[Table]) -> String {
    let files: Vec<String> = tables
        .iter()
        .map(|t| format!("    \"{}\",", t.file))
        .collect();
    format!(
        r#"#!/usr/bin/env python3
"""Plots the CSV tables of a monopole-lab run. Run from the output directory."""
import csv
import math
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

FILES = [
{}
]


def numeric(value):
    try:
        x = float(value)
    except ValueError:
        return None
    return x if math.isfinite(x) else None


def plot(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        return
    header, body = rows[0], rows[1:]
    xs = [numeric(r[0]) for r in body]
    xlabel = header[0]
    if all(x is None for x in xs):
        xs, xlabel = list(range(len(body))), "row"
    fig, ax = plt.subplots(figsize=(7, 4))
    drawn = 0
    for j, name in enumerate(header[1:], start=1):
        pts = [(x, numeric(r[j])) for x, r in zip(xs, body) if len(r) > j]
        pts = [(x, y) for x, y in pts if x is not None and y is not None]
        if pts:
            ax.plot(*zip(*pts), ".", label=name, markersize=3)
            drawn += 1
    ax.set_xlabel(xlabel)
    ax.set_title(path)
    if drawn:
        ax.legend(fontsize="x-small")
    fig.tight_layout()
    fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=120)
    plt.close(fig)


if __name__ == "__main__":
    for f in sys.argv[1:] or FILES:
        plot(f)
"#,
        files.join("\n")
    )
}

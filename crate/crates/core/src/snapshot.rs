//! CSV snapshots of grids and cell data.
//!
//! One header line, then one record per grid cell in grid order:
//! `line,level,center_x[,center_y],size[,<component>...]`. Floats are
//! written in Rust's shortest round-trip form (scientific notation for very
//! small or large magnitudes), so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::matrix::MeshMatrix;
use crate::monitor::MonitorResult;
use crate::topology::{check_rsm, Grid};

/// Renders a snapshot. `data` holds `names.len()` values per cell.
pub fn render(matrix: &MeshMatrix, grid: &Grid, names: &[&str], data: &[f64]) -> Result<String> {
    if data.len() != grid.len() * names.len() {
        return Err(Error::GridMismatch(format!(
            "{} values for {} cells x {} columns",
            data.len(),
            grid.len(),
            names.len()
        )));
    }
    check_rsm(matrix, grid)?;
    let axes: &[&str] = if matrix.dim() == 2 { &["center_x", "center_y"] } else { &["center_x"] };
    let mut out = String::with_capacity(64 * (grid.len() + 1));
    let header: Vec<&str> = ["line", "level"]
        .into_iter()
        .chain(axes.iter().copied())
        .chain(["size"])
        .chain(names.iter().copied())
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, &c) in grid.cells().iter().enumerate() {
        let g = matrix.geometry(c);
        write!(out, "{},{}", c.line(), matrix.level(c)).unwrap();
        for &x in g.center().iter().chain([&g.size]) {
            write!(out, ",{}", format_float(x)).unwrap();
        }
        for &v in &data[i * names.len()..(i + 1) * names.len()] {
            write!(out, ",{}", format_float(v)).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Shortest round-trip text of `v`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Grid-only snapshot.
pub fn write_grid(matrix: &MeshMatrix, grid: &Grid, path: &Path) -> Result<()> {
    write_file(path, &render(matrix, grid, &[], &[])?)
}

/// Grid plus the monitor value of every cell.
pub fn write_monitor(matrix: &MeshMatrix, grid: &Grid, monitor: &MonitorResult, path: &Path) -> Result<()> {
    write_file(path, &render(matrix, grid, &["monitor"], monitor.values())?)
}

/// Grid plus all field components under the given column names.
pub fn write_field(matrix: &MeshMatrix, field: &Field, names: &[&str], path: &Path) -> Result<()> {
    if names.len() != field.components() {
        return Err(Error::GridMismatch(format!(
            "{} names for {} components",
            names.len(),
            field.components()
        )));
    }
    write_file(path, &render(matrix, field.grid(), names, field.values())?)
}

/// `index.csv` listing every snapshot of a run with its time and cell count.
#[derive(Debug, Default)]
pub struct SnapshotIndex {
    rows: Vec<(String, String, usize)>,
}

impl SnapshotIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a file written into the run directory; `label` is usually the
    /// simulated time.
    pub fn push(&mut self, file: &Path, label: impl ToString, cells: usize) {
        let name = file.file_name().map_or_else(
            || file.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        self.rows.push((name, label.to_string(), cells));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let mut text = String::from("file,time,cells\n");
        for (f, t, n) in &self.rows {
            writeln!(text, "{f},{t},{n}").unwrap();
        }
        let path = dir.join("index.csv");
        write_file(&path, &text)?;
        Ok(path)
    }
}

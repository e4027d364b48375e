//! The tree of all dyadic cells between two refinement levels, stored as a
//! flat matrix with one line per cell.
//!
//! Each line holds the intra-level index `k`, the level `l`, the line of the
//! mother cell and the lines of the `2^d` daughters. Lines are 1-based and the
//! value `0` marks a missing mother (minimum level) or missing daughters
//! (maximum level). Within a level cells are enumerated lexicographically with
//! the x index varying fastest, so in 2D `k = (k_y - 1) * 2^l + k_x`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::par::*;

/// Sentinel entry for "no mother" / "no daughter".
pub const NONE: u32 = 0;

const COL_K: usize = 0;
const COL_LEVEL: usize = 1;
const COL_MOTHER: usize = 2;
const COL_DAUGHTERS: usize = 3;

/// Daughter column order in 2D.
pub const NW: usize = 0;
pub const NE: usize = 1;
pub const SW: usize = 2;
pub const SE: usize = 3;

/// Daughter column order in 1D.
pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Level range, spatial dimension and mesh regularity of a family of grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RefinementBounds {
    dim: usize,
    l_min: u32,
    l_max: u32,
    regularity: u32,
}

impl RefinementBounds {
    /// `l_min == l_max` is accepted as a degenerate single-level family.
    pub fn new(dim: usize, l_min: u32, l_max: u32, regularity: u32) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidBounds(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if l_min > l_max {
            return Err(Error::InvalidBounds(format!(
                "l_min ({l_min}) exceeds l_max ({l_max})"
            )));
        }
        if regularity == 0 {
            return Err(Error::InvalidBounds("mesh regularity must be >= 1".into()));
        }
        if (l_max as usize) * dim >= 63 {
            return Err(Error::CapacityOverflow(format!(
                "level {l_max} in {dim}D overflows the intra-level index"
            )));
        }
        Ok(Self {
            dim,
            l_min,
            l_max,
            regularity,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn l_min(&self) -> u32 {
        self.l_min
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    pub fn regularity(&self) -> u32 {
        self.regularity
    }

    /// Number of daughters per cell, `2^d`.
    pub fn children(&self) -> usize {
        1 << self.dim
    }

    /// Cells along one axis at level `l`.
    pub fn width(&self, level: u32) -> u64 {
        1u64 << level
    }

    /// Cells in the uniform grid of level `l`, `2^{l d}`.
    pub fn cells_at(&self, level: u32) -> u64 {
        1u64 << (level as usize * self.dim)
    }

    /// Number of matrix lines, `sum_{l = l_min}^{l_max} 2^{l d}`.
    pub fn total_lines(&self) -> u64 {
        (self.l_min..=self.l_max).map(|l| self.cells_at(l)).sum()
    }

    /// Columns per line in the full layout: `k`, `l`, mother, daughters.
    pub fn columns(&self) -> usize {
        COL_DAUGHTERS + self.children()
    }
}

/// A cell, identified by its 1-based line in the mesh matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(u32);

impl CellId {
    /// Panics on line 0, which is reserved as the sentinel.
    pub fn new(line: u32) -> Self {
        assert!(line != NONE, "matrix lines are 1-based");
        CellId(line)
    }

    pub fn line(self) -> u32 {
        self.0
    }

    /// 0-based row in the matrix storage.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }

    fn from_entry(entry: u32) -> Option<Self> {
        (entry != NONE).then_some(CellId(entry))
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Center and edge length of a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    dim: usize,
    center: [f64; 2],
    pub size: f64,
}

impl CellGeometry {
    pub fn center(&self) -> &[f64] {
        &self.center[..self.dim]
    }

    pub fn x(&self) -> f64 {
        self.center[0]
    }

    /// Second coordinate; 0 in 1D.
    pub fn y(&self) -> f64 {
        self.center[1]
    }

    /// `|C| = size^d`.
    pub fn volume(&self) -> f64 {
        self.size.powi(self.dim as i32)
    }

    /// Lower and upper corner of the occupied domain along `axis`.
    pub fn extent(&self, axis: usize) -> (f64, f64) {
        let half = 0.5 * self.size;
        (self.center[axis] - half, self.center[axis] + half)
    }

    pub fn distance(&self, other: &CellGeometry) -> f64 {
        self.center()
            .iter()
            .zip(other.center())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Storage layouts used for memory accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Every line carries `k`, `l`, mother and all daughter columns.
    Full,
    /// Mother entries dropped on `l_min`, daughter entries dropped on `l_max`.
    NoEdgeColumns,
    /// As `NoEdgeColumns`, with `k` and `l` recomputed from the line.
    NoKlColumns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryFootprint {
    pub lines: u64,
    pub entries: u64,
    pub bytes: u64,
}

impl MemoryFootprint {
    /// Decimal kilobytes, rounded to the nearest integer.
    pub fn approx_kb(&self) -> u64 {
        (self.bytes as f64 / 1e3).round() as u64
    }

    /// Decimal megabytes, rounded to the nearest integer.
    pub fn approx_mb(&self) -> u64 {
        (self.bytes as f64 / 1e6).round() as u64
    }
}

/// Entry count of the matrix for `bounds` in the given layout, at 4 bytes
/// per entry.
pub fn entry_count_and_memory(bounds: &RefinementBounds, layout: Layout) -> MemoryFootprint {
    let lines = bounds.total_lines();
    let full = lines * bounds.columns() as u64;
    let edge = bounds.cells_at(bounds.l_min()) + bounds.cells_at(bounds.l_max()) * bounds.children() as u64;
    let entries = match layout {
        Layout::Full => full,
        Layout::NoEdgeColumns => full - edge,
        Layout::NoKlColumns => full - edge - 2 * lines,
    };
    MemoryFootprint {
        lines,
        entries,
        bytes: 4 * entries,
    }
}

/// The precomputed tree-as-matrix. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshMatrix {
    bounds: RefinementBounds,
    stride: usize,
    entries: Vec<u32>,
    /// `offsets[i]` is the number of lines on levels below `l_min + i`.
    offsets: Vec<u64>,
}

impl MeshMatrix {
    pub fn build(bounds: RefinementBounds) -> Result<Self> {
        let total = bounds.total_lines();
        if total >= u32::MAX as u64 {
            return Err(Error::CapacityOverflow(format!(
                "{total} lines do not fit in 32-bit entries"
            )));
        }
        let stride = bounds.columns();
        let len = usize::try_from(total)
            .ok()
            .and_then(|n| n.checked_mul(stride))
            .ok_or_else(|| {
                Error::CapacityOverflow(format!("{total} lines x {stride} columns"))
            })?;

        let mut offsets = Vec::with_capacity((bounds.l_max - bounds.l_min + 2) as usize);
        let mut acc = 0u64;
        for l in bounds.l_min..=bounds.l_max {
            offsets.push(acc);
            acc += bounds.cells_at(l);
        }
        offsets.push(acc);

        let mut matrix = Self {
            bounds,
            stride,
            entries: vec![NONE; len],
            offsets,
        };
        let rows: Vec<[u32; 7]> = (0..total as u32)
            .into_par_iter()
            .map(|row| matrix.compute_row(CellId(row + 1)))
            .collect();
        for (dst, src) in matrix.entries.chunks_mut(stride).zip(&rows) {
            dst.copy_from_slice(&src[..stride]);
        }
        Ok(matrix)
    }

    fn compute_row(&self, cell: CellId) -> [u32; 7] {
        let (level, k) = self.recover_level_and_index(cell);
        let coords = self.split_index(level, k);
        let mut row = [NONE; 7];
        row[COL_K] = k as u32;
        row[COL_LEVEL] = level;
        if level > self.bounds.l_min {
            let mut up = [0u64; 2];
            for axis in 0..self.bounds.dim {
                up[axis] = coords[axis].div_ceil(2);
            }
            row[COL_MOTHER] = self.cell_at_unchecked(level - 1, up).0;
        }
        if level < self.bounds.l_max {
            for (slot, offset) in daughter_offsets(self.bounds.dim).iter().enumerate() {
                let mut down = [0u64; 2];
                for axis in 0..self.bounds.dim {
                    down[axis] = 2 * coords[axis] - 1 + offset[axis];
                }
                row[COL_DAUGHTERS + slot] = self.cell_at_unchecked(level + 1, down).0;
            }
        }
        row
    }

    pub fn bounds(&self) -> &RefinementBounds {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim
    }

    pub fn total_lines(&self) -> usize {
        self.entries.len() / self.stride
    }

    pub fn columns(&self) -> usize {
        self.stride
    }

    /// Raw line `k, l, m, d_1 .. d_{2^d}` with `0` for missing entries.
    pub fn row(&self, cell: CellId) -> &[u32] {
        let start = cell.index() * self.stride;
        &self.entries[start..start + self.stride]
    }

    pub fn is_valid(&self, cell: CellId) -> bool {
        cell.index() < self.total_lines()
    }

    pub fn cell(&self, line: u32) -> Result<CellId> {
        if line == NONE || line as usize > self.total_lines() {
            return Err(Error::OutOfRange(format!(
                "line {line} outside 1..={}",
                self.total_lines()
            )));
        }
        Ok(CellId(line))
    }

    fn offset(&self, level: u32) -> u64 {
        self.offsets[(level - self.bounds.l_min) as usize]
    }

    /// Line of the cell with intra-level index `k` on level `l`.
    pub fn line_of(&self, level: u32, k: u64) -> Result<CellId> {
        if level < self.bounds.l_min || level > self.bounds.l_max {
            return Err(Error::OutOfRange(format!(
                "level {level} outside {}..={}",
                self.bounds.l_min, self.bounds.l_max
            )));
        }
        if k == 0 || k > self.bounds.cells_at(level) {
            return Err(Error::OutOfRange(format!(
                "intra-level index {k} outside 1..={} on level {level}",
                self.bounds.cells_at(level)
            )));
        }
        Ok(CellId((self.offset(level) + k) as u32))
    }

    /// `(l, k)` read from the stored columns.
    pub fn level_and_index_of(&self, cell: CellId) -> (u32, u64) {
        let row = self.row(cell);
        (row[COL_LEVEL], row[COL_K] as u64)
    }

    /// `(l, k)` recomputed from the line number alone: the unique level with
    /// `offset(l) < line <= offset(l + 1)`, and `k = line - offset(l)`.
    pub fn recover_level_and_index(&self, cell: CellId) -> (u32, u64) {
        let line = cell.line() as u64;
        // offsets is sorted; find the last offset strictly below `line`.
        let i = self.offsets.partition_point(|&o| o < line) - 1;
        (self.bounds.l_min + i as u32, line - self.offsets[i])
    }

    pub fn level(&self, cell: CellId) -> u32 {
        self.row(cell)[COL_LEVEL]
    }

    pub fn index(&self, cell: CellId) -> u64 {
        self.row(cell)[COL_K] as u64
    }

    pub fn mother(&self, cell: CellId) -> Option<CellId> {
        CellId::from_entry(self.row(cell)[COL_MOTHER])
    }

    /// Daughter in column `slot` (`NW..SE` in 2D, `LEFT`/`RIGHT` in 1D).
    pub fn daughter(&self, cell: CellId, slot: usize) -> Option<CellId> {
        CellId::from_entry(self.row(cell)[COL_DAUGHTERS + slot])
    }

    /// All daughters in column order; empty on `l_max`.
    pub fn daughters(&self, cell: CellId) -> impl Iterator<Item = CellId> + '_ {
        self.row(cell)[COL_DAUGHTERS..]
            .iter()
            .filter_map(|&e| CellId::from_entry(e))
    }

    pub fn has_daughters(&self, cell: CellId) -> bool {
        self.row(cell)[COL_DAUGHTERS] != NONE
    }

    /// Strict ancestors, nearest first.
    pub fn ancestors(&self, cell: CellId) -> impl Iterator<Item = CellId> + '_ {
        std::iter::successors(self.mother(cell), move |&c| self.mother(c))
    }

    /// The ancestor of `cell` on `level`, or `cell` itself if it lives there.
    pub fn ancestor_at(&self, cell: CellId, level: u32) -> Option<CellId> {
        let mut current = cell;
        let mut l = self.level(cell);
        if level > l || level < self.bounds.l_min {
            return None;
        }
        while l > level {
            current = self.mother(current)?;
            l -= 1;
        }
        Some(current)
    }

    /// Per-axis 1-based indices `(k_1, k_2)`; the second is 1 in 1D.
    pub fn coords(&self, cell: CellId) -> [u64; 2] {
        let (level, k) = self.level_and_index_of(cell);
        self.split_index(level, k)
    }

    fn split_index(&self, level: u32, k: u64) -> [u64; 2] {
        match self.bounds.dim {
            1 => [k, 1],
            _ => {
                let w = self.bounds.width(level);
                [(k - 1) % w + 1, (k - 1) / w + 1]
            }
        }
    }

    fn join_index(&self, level: u32, coords: [u64; 2]) -> u64 {
        match self.bounds.dim {
            1 => coords[0],
            _ => (coords[1] - 1) * self.bounds.width(level) + coords[0],
        }
    }

    fn cell_at_unchecked(&self, level: u32, coords: [u64; 2]) -> CellId {
        CellId((self.offset(level) + self.join_index(level, coords)) as u32)
    }

    /// Cell on `level` with per-axis indices `coords`, if inside the domain.
    pub fn cell_at(&self, level: u32, coords: [u64; 2]) -> Option<CellId> {
        if level < self.bounds.l_min || level > self.bounds.l_max {
            return None;
        }
        let w = self.bounds.width(level);
        let inside = (0..self.bounds.dim).all(|a| (1..=w).contains(&coords[a]));
        inside.then(|| self.cell_at_unchecked(level, coords))
    }

    /// The cell on `level` whose domain contains `point`. Points on the upper
    /// boundary of the unit cube belong to the last cell.
    pub fn locate(&self, level: u32, point: &[f64]) -> Option<CellId> {
        let w = self.bounds.width(level);
        let mut coords = [1u64; 2];
        for axis in 0..self.bounds.dim {
            let x = point[axis];
            if !(0.0..=1.0).contains(&x) {
                return None;
            }
            coords[axis] = ((x * w as f64).floor() as u64 + 1).min(w);
        }
        self.cell_at(level, coords)
    }

    pub fn geometry(&self, cell: CellId) -> CellGeometry {
        let level = self.level(cell);
        let coords = self.coords(cell);
        let denom = (1u64 << (level + 1)) as f64;
        let mut center = [0.0; 2];
        for axis in 0..self.bounds.dim {
            center[axis] = (2 * coords[axis] - 1) as f64 / denom;
        }
        CellGeometry {
            dim: self.bounds.dim,
            center,
            size: 1.0 / (1u64 << level) as f64,
        }
    }

    /// Writes the matrix as a little-endian dump: `d, l_min, l_max, lines`
    /// followed by the full-layout entries row by row.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header = [
            self.bounds.dim as u32,
            self.bounds.l_min,
            self.bounds.l_max,
            self.total_lines() as u32,
        ];
        let mut buf = Vec::with_capacity(4 * (header.len() + self.entries.len()));
        for v in header.iter().chain(&self.entries) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)
    }

    /// Reads a dump written by [`MeshMatrix::dump`]. The regularity is not
    /// part of the dump and is supplied by the caller.
    pub fn load<R: Read>(mut input: R, regularity: u32) -> Result<Self> {
        let mut bytes = Vec::new();
        input
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io("<matrix dump>", e))?;
        let words: Vec<u32> = bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if bytes.len() % 4 != 0 || words.len() < 4 {
            return Err(Error::Config("truncated matrix dump".into()));
        }
        let bounds = RefinementBounds::new(words[0] as usize, words[1], words[2], regularity)?;
        let expected = Self::build(bounds)?;
        if words[3] as usize != expected.total_lines() || words[4..] != expected.entries[..] {
            return Err(Error::Config(
                "matrix dump does not match its header".into(),
            ));
        }
        Ok(expected)
    }

    pub fn dump_to_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.dump(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load_from_file(path: &Path, regularity: u32) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::load(std::io::BufReader::new(file), regularity)
    }
}

/// Per-axis offsets of each daughter relative to `2 k - 1`, in column order.
fn daughter_offsets(dim: usize) -> &'static [[u64; 2]] {
    match dim {
        1 => &[[0, 0], [1, 0]],
        _ => &[[0, 1], [1, 1], [0, 0], [1, 0]],
    }
}

//! Grids as sets of matrix lines, and sibling/neighbor queries on them.

use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::{CellId, MeshMatrix, RefinementBounds, LEFT, NE, NW, RIGHT, SE, SW};
use crate::par::*;

/// Interface direction as seen from a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    W,
    E,
    S,
    N,
}

impl Direction {
    const ALL_1D: [Direction; 2] = [Direction::W, Direction::E];
    const ALL_2D: [Direction; 4] = [Direction::W, Direction::E, Direction::S, Direction::N];

    pub fn all(dim: usize) -> &'static [Direction] {
        if dim == 1 {
            &Self::ALL_1D
        } else {
            &Self::ALL_2D
        }
    }

    pub fn axis(self) -> usize {
        match self {
            Direction::W | Direction::E => 0,
            Direction::S | Direction::N => 1,
        }
    }

    /// True for E and N, the directions along the coordinate versors.
    pub fn is_positive(self) -> bool {
        matches!(self, Direction::E | Direction::N)
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::W => Direction::E,
            Direction::E => Direction::W,
            Direction::S => Direction::N,
            Direction::N => Direction::S,
        }
    }

    /// Daughter columns of a cell lying in this direction that touch the
    /// searching cell, i.e. the daughters on the opposite side.
    fn facing_daughters(self, dim: usize) -> &'static [usize] {
        match (dim, self) {
            (1, Direction::E) => &[LEFT],
            (1, _) => &[RIGHT],
            (_, Direction::E) => &[NW, SW],
            (_, Direction::W) => &[NE, SE],
            (_, Direction::N) => &[SW, SE],
            (_, Direction::S) => &[NW, NE],
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A set of matrix lines covering the unit cube, kept in a fixed order.
///
/// Membership and position lookups are O(1) through a dense slot table over
/// all matrix lines.
#[derive(Clone)]
pub struct Grid {
    bounds: RefinementBounds,
    cells: Vec<CellId>,
    slots: Vec<u32>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("bounds", &self.bounds)
            .field("cells", &self.cells)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.bounds == other.bounds && self.cells == other.cells
    }
}

impl Grid {
    /// Builds a grid from an ordered list of lines. Only checks that lines
    /// exist and are distinct; see [`check_rsm`] for the mesh invariants.
    pub fn new(matrix: &MeshMatrix, cells: Vec<CellId>) -> Result<Self> {
        let mut slots = vec![0u32; matrix.total_lines()];
        for (pos, &c) in cells.iter().enumerate() {
            if !matrix.is_valid(c) {
                return Err(Error::OutOfRange(format!("line {c} is not in the matrix")));
            }
            if slots[c.index()] != 0 {
                return Err(Error::InconsistentGrid(format!("line {c} listed twice")));
            }
            slots[c.index()] = pos as u32 + 1;
        }
        Ok(Self {
            bounds: *matrix.bounds(),
            cells,
            slots,
        })
    }

    pub fn from_lines(matrix: &MeshMatrix, lines: &[u32]) -> Result<Self> {
        let cells = lines
            .iter()
            .map(|&l| matrix.cell(l))
            .collect::<Result<Vec<_>>>()?;
        Self::new(matrix, cells)
    }

    /// The uniform grid `G_l` in intra-level order.
    pub fn uniform(matrix: &MeshMatrix, level: u32) -> Result<Self> {
        let first = matrix.line_of(level, 1)?;
        let n = matrix.bounds().cells_at(level) as u32;
        let cells = (0..n).map(|i| CellId::new(first.line() + i)).collect();
        Self::new(matrix, cells)
    }

    pub fn bounds(&self) -> &RefinementBounds {
        &self.bounds
    }

    pub fn cells(&self) -> &[CellId] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: CellId) -> bool {
        self.slots.get(cell.index()).is_some_and(|&s| s != 0)
    }

    /// Position of `cell` in [`Grid::cells`].
    pub fn position(&self, cell: CellId) -> Option<usize> {
        match self.slots.get(cell.index()) {
            Some(&s) if s != 0 => Some(s as usize - 1),
            _ => None,
        }
    }

    pub fn lines(&self) -> Vec<u32> {
        self.cells.iter().map(|c| c.line()).collect()
    }

    /// Number of cells on each level, indexed from `l_min`.
    pub fn level_counts(&self, matrix: &MeshMatrix) -> Vec<usize> {
        let b = matrix.bounds();
        let mut counts = vec![0; (b.l_max() - b.l_min() + 1) as usize];
        for &c in &self.cells {
            counts[(matrix.level(c) - b.l_min()) as usize] += 1;
        }
        counts
    }

    /// The grid cell whose domain contains `point`.
    pub fn locate(&self, matrix: &MeshMatrix, point: &[f64]) -> Option<CellId> {
        (self.bounds.l_min()..=self.bounds.l_max())
            .filter_map(|l| matrix.locate(l, point))
            .find(|&c| self.contains(c))
    }

    /// `sum_C 2^{-d L(C)}`; equals 1 on a tiling.
    pub fn tiling_sum(&self, matrix: &MeshMatrix) -> f64 {
        let d = matrix.dim() as i32;
        self.cells
            .iter()
            .map(|&c| 2f64.powi(-d * matrix.level(c) as i32))
            .sum()
    }
}

/// All `2^d` daughters of the mother of `cell`, including `cell`.
pub fn siblings(matrix: &MeshMatrix, cell: CellId) -> Result<Vec<CellId>> {
    let mother = matrix.mother(cell).ok_or(Error::NoMother(cell))?;
    Ok(matrix.daughters(mother).collect())
}

/// Where a cell sits among its siblings. `y` is `None` in 1D.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiblingPosition {
    pub x: Direction,
    pub y: Option<Direction>,
}

/// W for odd `k_1`, E for even; S for odd `k_2`, N for even.
pub fn sibling_position(matrix: &MeshMatrix, cell: CellId) -> Result<SiblingPosition> {
    if matrix.mother(cell).is_none() {
        return Err(Error::NoMother(cell));
    }
    let [k1, k2] = matrix.coords(cell);
    let x = if k1 % 2 == 1 { Direction::W } else { Direction::E };
    let y = (matrix.dim() == 2).then_some(if k2 % 2 == 1 { Direction::S } else { Direction::N });
    Ok(SiblingPosition { x, y })
}

/// The cell of the same level across the `dir` face, or `None` on the domain
/// boundary. In 2D the W/E step is `k -/+ 1` and the S/N step is `k -/+ 2^l`.
pub fn same_level_neighbor(matrix: &MeshMatrix, cell: CellId, dir: Direction) -> Option<CellId> {
    let axis = dir.axis();
    if axis >= matrix.dim() {
        return None;
    }
    let level = matrix.level(cell);
    let mut coords = matrix.coords(cell);
    coords[axis] = if dir.is_positive() {
        coords[axis] + 1
    } else {
        coords[axis].checked_sub(1)?
    };
    matrix.cell_at(level, coords)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Neighbor {
    pub cell: CellId,
    pub dir: Direction,
}

/// Cells of `grid` sharing a face of positive measure with `cell`.
///
/// Per direction: the same-level neighbor if present, else up to `m_r` of its
/// ancestors, else its descendants facing `cell` down to `m_r` generations.
pub fn neighbors_in_grid(matrix: &MeshMatrix, grid: &Grid, cell: CellId) -> Result<Vec<Neighbor>> {
    let m_r = matrix.bounds().regularity();
    let mut out = Vec::with_capacity(2 * matrix.dim());
    search_neighbors(matrix, grid, cell, m_r, m_r, &mut out)?;
    Ok(out)
}

fn search_neighbors(
    matrix: &MeshMatrix,
    grid: &Grid,
    cell: CellId,
    max_up: u32,
    max_down: u32,
    out: &mut Vec<Neighbor>,
) -> Result<()> {
    for &dir in Direction::all(matrix.dim()) {
        let Some(same) = same_level_neighbor(matrix, cell, dir) else {
            continue;
        };
        if grid.contains(same) {
            out.push(Neighbor { cell: same, dir });
            continue;
        }
        if let Some(anc) = matrix
            .ancestors(same)
            .take(max_up as usize)
            .find(|&a| grid.contains(a))
        {
            out.push(Neighbor { cell: anc, dir });
            continue;
        }
        let facing = dir.facing_daughters(matrix.dim());
        let mut queue = vec![same];
        for generation in 0..=max_down {
            let mut next = Vec::with_capacity(queue.len() * facing.len());
            for entry in queue {
                if grid.contains(entry) {
                    out.push(Neighbor { cell: entry, dir });
                } else if generation < max_down && matrix.has_daughters(entry) {
                    next.extend(facing.iter().filter_map(|&s| matrix.daughter(entry, s)));
                } else {
                    return Err(Error::InconsistentGrid(format!(
                        "no {dir} neighbor of cell {cell} within {max_up} ancestor and \
                         {max_down} descendant generations of line {entry}"
                    )));
                }
            }
            if next.is_empty() {
                break;
            }
            queue = next;
        }
    }
    Ok(())
}

/// Neighbor entry of a [`Neighborhood`], addressing the grid by position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Adjacent {
    pub index: usize,
    pub dir: Direction,
}

/// Neighbor lists of every grid cell, computed once per grid.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    starts: Vec<usize>,
    entries: Vec<Adjacent>,
}

impl Neighborhood {
    pub fn build(matrix: &MeshMatrix, grid: &Grid) -> Result<Self> {
        let lists: Vec<Vec<Neighbor>> = grid
            .cells()
            .par_iter()
            .map(|&c| neighbors_in_grid(matrix, grid, c))
            .collect::<Result<_>>()?;
        let mut starts = Vec::with_capacity(lists.len() + 1);
        let mut entries = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        starts.push(0);
        for list in lists {
            entries.extend(list.into_iter().map(|n| Adjacent {
                index: grid.position(n.cell).expect("neighbor is a grid member"),
                dir: n.dir,
            }));
            starts.push(entries.len());
        }
        Ok(Self { starts, entries })
    }

    pub fn of(&self, index: usize) -> &[Adjacent] {
        &self.entries[self.starts[index]..self.starts[index + 1]]
    }

    pub fn len(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Verifies that `grid` is a regular structured mesh: its cells tile the unit
/// cube and neighboring levels differ by at most `m_r`.
pub fn check_rsm(matrix: &MeshMatrix, grid: &Grid) -> Result<()> {
    let b = matrix.bounds();
    let d = b.dim() as u32;
    let full: u128 = 1u128 << (d * b.l_max());
    let covered: u128 = grid
        .cells()
        .iter()
        .map(|&c| 1u128 << (d * (b.l_max() - matrix.level(c))))
        .sum();
    if covered != full {
        return Err(Error::InconsistentGrid(format!(
            "cells cover {covered}/{full} of the domain at level {}",
            b.l_max()
        )));
    }
    let m_r = b.regularity();
    let depth = b.l_max() - b.l_min();
    grid.cells().par_iter().try_for_each(|&c| {
        if let Some(a) = matrix.ancestors(c).find(|&a| grid.contains(a)) {
            return Err(Error::InconsistentGrid(format!(
                "cell {c} overlaps its ancestor {a}"
            )));
        }
        let mut found = Vec::new();
        search_neighbors(matrix, grid, c, depth, depth, &mut found)?;
        let level = matrix.level(c);
        match found.iter().find(|n| matrix.level(n.cell).abs_diff(level) > m_r) {
            Some(n) => Err(Error::InconsistentGrid(format!(
                "cells {c} (level {level}) and {} (level {}) violate regularity {m_r}",
                n.cell,
                matrix.level(n.cell)
            ))),
            None => Ok(()),
        }
    })
}

//! Monitor-driven marking, strong refinement and weak coarsening.
//!
//! Refinement may grow the marked set so that the refined grid stays regular;
//! coarsening may shrink it for the same reason. Both walk the marked cells
//! from the finest to the coarsest level, and within a level by ascending
//! line, so results are deterministic.

use crate::error::{Error, Result};
use crate::matrix::{CellId, MeshMatrix};
use crate::monitor::MonitorResult;
use crate::topology::{check_rsm, neighbors_in_grid, Grid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    refine: f64,
    coarsen: f64,
}

impl Thresholds {
    /// Equal thresholds are allowed; strict comparisons in [`mark`] keep the
    /// two mark sets disjoint.
    pub fn new(refine: f64, coarsen: f64) -> Result<Self> {
        let unit = 0.0..=1.0;
        if !unit.contains(&refine) || !unit.contains(&coarsen) {
            return Err(Error::Config(format!(
                "thresholds must lie in [0, 1], got refine {refine}, coarsen {coarsen}"
            )));
        }
        if coarsen > refine {
            return Err(Error::Config(format!(
                "coarsening threshold {coarsen} exceeds refinement threshold {refine}"
            )));
        }
        Ok(Self { refine, coarsen })
    }

    pub fn refine(&self) -> f64 {
        self.refine
    }

    pub fn coarsen(&self) -> f64 {
        self.coarsen
    }
}

/// Cells marked for refinement and for coarsening, each sorted by line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkSets {
    pub refine: Vec<CellId>,
    pub coarsen: Vec<CellId>,
}

/// Marks `value > refine` below `l_max` for refinement and `value < coarsen`
/// above `l_min` for coarsening.
pub fn mark(
    matrix: &MeshMatrix,
    grid: &Grid,
    monitor: &MonitorResult,
    thresholds: &Thresholds,
) -> MarkSets {
    assert_eq!(monitor.len(), grid.len(), "monitor not aligned with grid");
    let b = matrix.bounds();
    let mut marks = MarkSets::default();
    for (&c, &value) in grid.cells().iter().zip(monitor.values()) {
        let level = matrix.level(c);
        if value > thresholds.refine && level < b.l_max() {
            marks.refine.push(c);
        } else if value < thresholds.coarsen && level > b.l_min() {
            marks.coarsen.push(c);
        }
    }
    marks.refine.sort_unstable();
    marks.coarsen.sort_unstable();
    marks
}

/// Per-level work lists over matrix lines with O(1) membership.
struct LevelSets {
    l_min: u32,
    member: Vec<bool>,
    buckets: Vec<Vec<CellId>>,
}

impl LevelSets {
    fn new(matrix: &MeshMatrix) -> Self {
        let b = matrix.bounds();
        Self {
            l_min: b.l_min(),
            member: vec![false; matrix.total_lines()],
            buckets: vec![Vec::new(); (b.l_max() - b.l_min() + 1) as usize],
        }
    }

    fn insert(&mut self, matrix: &MeshMatrix, c: CellId) -> bool {
        if std::mem::replace(&mut self.member[c.index()], true) {
            return false;
        }
        self.buckets[(matrix.level(c) - self.l_min) as usize].push(c);
        true
    }

    fn contains(&self, c: CellId) -> bool {
        self.member[c.index()]
    }

    fn sorted_members(&self) -> Vec<CellId> {
        let mut all: Vec<CellId> = self.buckets.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }
}

/// Refines `marks` plus every coarser neighbor that would otherwise end up
/// more than `m_r` levels away. Returns the new grid and the refined set.
pub fn strong_refine(
    matrix: &MeshMatrix,
    grid: &Grid,
    marks: &[CellId],
) -> Result<(Grid, Vec<CellId>)> {
    let b = matrix.bounds();
    let m_r = b.regularity();
    let mut set = LevelSets::new(matrix);
    for &c in marks {
        if grid.contains(c) && matrix.level(c) < b.l_max() {
            set.insert(matrix, c);
        }
    }

    for level in (b.l_min()..b.l_max()).rev() {
        let slot = (level - b.l_min()) as usize;
        let mut bucket = std::mem::take(&mut set.buckets[slot]);
        bucket.sort_unstable();
        for &c in &bucket {
            for n in neighbors_in_grid(matrix, grid, c)? {
                if level - matrix.level(n.cell).min(level) >= m_r {
                    set.insert(matrix, n.cell);
                }
            }
        }
        set.buckets[slot] = bucket;
    }

    let mut cells = Vec::with_capacity(grid.len());
    for &c in grid.cells() {
        if set.contains(c) {
            cells.extend(matrix.daughters(c));
        } else {
            cells.push(c);
        }
    }
    Ok((Grid::new(matrix, cells)?, set.sorted_members()))
}

/// Coarsens the complete sibling groups of `marks` whose removal keeps the
/// grid regular. Returns the new grid and the coarsened cells (the daughters
/// that were replaced by their mothers).
pub fn weak_coarsen(
    matrix: &MeshMatrix,
    grid: &Grid,
    marks: &[CellId],
) -> Result<(Grid, Vec<CellId>)> {
    let b = matrix.bounds();
    let m_r = b.regularity();
    let mut marked = vec![false; matrix.total_lines()];
    for &c in marks {
        if grid.contains(c) && matrix.level(c) > b.l_min() {
            marked[c.index()] = true;
        }
    }

    // Mothers whose full daughter set is present and marked, bucketed by the
    // daughters' level.
    let mut groups = LevelSets::new(matrix);
    for &c in marks {
        if !marked[c.index()] {
            continue;
        }
        let mother = matrix.mother(c).expect("level above l_min has a mother");
        if !groups.contains(mother) && matrix.daughters(mother).all(|d| marked[d.index()]) {
            groups.insert(matrix, mother);
        }
    }
    let mut accepted = vec![false; matrix.total_lines()];
    for &c in marks {
        if let Some(mother) = matrix.mother(c) {
            if marked[c.index()] && groups.contains(mother) {
                accepted[c.index()] = true;
            }
        }
    }

    // Mothers sit one level below the daughters; walk daughter levels from
    // the finest down. A group is dropped when any daughter has a neighbor
    // m_r levels finer that is not itself being coarsened.
    for mother_level in (b.l_min()..b.l_max()).rev() {
        let slot = (mother_level - b.l_min()) as usize;
        let mut bucket = std::mem::take(&mut groups.buckets[slot]);
        bucket.sort_unstable();
        for &mother in &bucket {
            let level = mother_level + 1;
            let mut keep = true;
            'daughters: for d in matrix.daughters(mother) {
                for n in neighbors_in_grid(matrix, grid, d)? {
                    let nl = matrix.level(n.cell);
                    if nl >= level + m_r && !accepted[n.cell.index()] {
                        keep = false;
                        break 'daughters;
                    }
                }
            }
            if !keep {
                for d in matrix.daughters(mother) {
                    accepted[d.index()] = false;
                }
            }
        }
        groups.buckets[slot] = bucket;
    }

    let mut cells = Vec::with_capacity(grid.len());
    let mut coarsened = Vec::new();
    let mut emitted = vec![false; matrix.total_lines()];
    for &c in grid.cells() {
        if accepted[c.index()] {
            coarsened.push(c);
            let mother = matrix.mother(c).expect("accepted cells have mothers");
            if !std::mem::replace(&mut emitted[mother.index()], true) {
                cells.push(mother);
            }
        } else {
            cells.push(c);
        }
    }
    coarsened.sort_unstable();
    Ok((Grid::new(matrix, cells)?, coarsened))
}

/// Result of one [`mesh_update`].
#[derive(Debug, Clone)]
pub struct MeshUpdate {
    /// Grid after strong refinement, before coarsening.
    pub refined_grid: Grid,
    /// Final grid.
    pub grid: Grid,
    /// Cells replaced by their daughters.
    pub refined: Vec<CellId>,
    /// Cells replaced, together with their siblings, by their mother.
    pub coarsened: Vec<CellId>,
}

/// Mark, refine strongly, then coarsen weakly the coarsening marks that
/// survived refinement.
pub fn mesh_update(
    matrix: &MeshMatrix,
    grid: &Grid,
    monitor: &MonitorResult,
    thresholds: &Thresholds,
) -> Result<MeshUpdate> {
    let marks = mark(matrix, grid, monitor, thresholds);
    let (refined_grid, refined) = strong_refine(matrix, grid, &marks.refine)?;
    let survivors: Vec<CellId> = marks
        .coarsen
        .iter()
        .copied()
        .filter(|c| refined.binary_search(c).is_err())
        .collect();
    let (new_grid, coarsened) = weak_coarsen(matrix, &refined_grid, &survivors)?;
    debug_assert!(
        check_rsm(matrix, &new_grid).is_ok(),
        "mesh update broke the grid invariants: {:?}",
        check_rsm(matrix, &new_grid)
    );
    Ok(MeshUpdate {
        refined_grid,
        grid: new_grid,
        refined,
        coarsened,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::RefinementBounds;

    fn matrix(dim: usize, l_min: u32, l_max: u32, m_r: u32) -> MeshMatrix {
        MeshMatrix::build(RefinementBounds::new(dim, l_min, l_max, m_r).unwrap()).unwrap()
    }

    #[test]
    fn thresholds_validate() {
        assert!(Thresholds::new(0.8, 0.3).is_ok());
        assert!(Thresholds::new(0.4, 0.4).is_ok());
        assert!(Thresholds::new(0.3, 0.8).is_err());
        assert!(Thresholds::new(1.2, 0.1).is_err());
    }

    #[test]
    fn all_zero_monitor_marks_everything_above_l_min_for_coarsening() {
        let m = matrix(2, 1, 3, 1);
        let g = Grid::uniform(&m, 2).unwrap();
        let marks = mark(&m, &g, &MonitorResult::zeros(g.len()), &Thresholds::new(0.5, 0.3).unwrap());
        assert!(marks.refine.is_empty());
        assert_eq!(marks.coarsen.len(), 16);

        let coarse = Grid::uniform(&m, 1).unwrap();
        let marks = mark(&m, &coarse, &MonitorResult::zeros(4), &Thresholds::new(0.5, 0.3).unwrap());
        assert!(marks.coarsen.is_empty());
    }

    #[test]
    fn thresholds_are_strict() {
        let m = matrix(2, 1, 3, 1);
        let g = Grid::uniform(&m, 2).unwrap();
        let t = Thresholds::new(0.5, 0.5).unwrap();
        let at = mark(&m, &g, &MonitorResult::new(vec![0.5; 16]), &t);
        assert_eq!(at, MarkSets::default());
        let eps = 1e-12;
        let above = mark(&m, &g, &MonitorResult::new(vec![0.5 + eps; 16]), &t);
        assert_eq!(above.refine.len(), 16);
        let below = mark(&m, &g, &MonitorResult::new(vec![0.5 - eps; 16]), &t);
        assert_eq!(below.coarsen.len(), 16);
    }

    #[test]
    fn single_interior_refinement_needs_no_closure() {
        let m = matrix(2, 5, 7, 1);
        let g = Grid::uniform(&m, 5).unwrap();
        let c = m.line_of(5, 16 * 32 + 16).unwrap();
        let (refined, set) = strong_refine(&m, &g, &[c]).unwrap();
        assert_eq!(set, [c]);
        assert_eq!(refined.len(), 1024 + 3);
        check_rsm(&m, &refined).unwrap();
    }

    #[test]
    fn worked_1d_refinement() {
        let m = matrix(1, 0, 3, 2);
        let g = Grid::from_lines(&m, &[2, 12, 13, 7]).unwrap();
        let (refined, set) = strong_refine(&m, &g, &[CellId::new(2)]).unwrap();
        assert_eq!(refined.lines(), [4, 5, 12, 13, 7]);
        assert_eq!(set, [CellId::new(2)]);
    }

    #[test]
    fn refinement_propagates_to_coarse_neighbors() {
        let m = matrix(1, 0, 4, 1);
        // [0,1/2] at level 1, then level 2 cells.
        let g = Grid::from_lines(&m, &[2, 6, 7]).unwrap();
        check_rsm(&m, &g).unwrap();
        // Refining line 6 (level 2) pushes line 2 (level 1): 3 vs 1 would jump 2.
        let (refined, set) = strong_refine(&m, &g, &[CellId::new(6)]).unwrap();
        assert_eq!(set, [CellId::new(2), CellId::new(6)]);
        check_rsm(&m, &refined).unwrap();
    }

    #[test]
    fn l_max_marks_are_ignored() {
        let m = matrix(2, 1, 2, 1);
        let g = Grid::uniform(&m, 2).unwrap();
        let (refined, set) = strong_refine(&m, &g, &[g.cells()[0]]).unwrap();
        assert!(set.is_empty());
        assert_eq!(refined, g);
    }

    #[test]
    fn coarsening_whole_uniform_grid() {
        let m = matrix(2, 2, 5, 1);
        let g = Grid::uniform(&m, 4).unwrap();
        let (coarse, set) = weak_coarsen(&m, &g, g.cells()).unwrap();
        assert_eq!(set.len(), 256);
        let mut lines = coarse.lines();
        lines.sort_unstable();
        let mut expected = Grid::uniform(&m, 3).unwrap().lines();
        expected.sort_unstable();
        assert_eq!(lines, expected);
    }

    #[test]
    fn incomplete_sibling_groups_stay() {
        let m = matrix(2, 2, 5, 1);
        let g = Grid::uniform(&m, 4).unwrap();
        let c = g.cells()[0];
        let (same, set) = weak_coarsen(&m, &g, &[c]).unwrap();
        assert!(set.is_empty());
        assert_eq!(same, g);
    }

    #[test]
    fn coarsening_respects_finer_neighbors() {
        let m = matrix(1, 0, 4, 1);
        // Levels: [2:l1][6:l2][14:l3][15:l3]
        let g = Grid::from_lines(&m, &[2, 6, 14, 15]).unwrap();
        check_rsm(&m, &g).unwrap();
        // Coarsening 14/15 to line 7 is fine; coarsening 6 alone is impossible.
        let (c1, set) = weak_coarsen(&m, &g, &[CellId::new(14), CellId::new(15)]).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(c1.lines(), [2, 6, 7]);
        // Marking 6,7 siblings where 7 is refined: 7 not present -> no coarsening.
        let (c2, set) = weak_coarsen(&m, &g, &[CellId::new(6)]).unwrap();
        assert!(set.is_empty());
        assert_eq!(c2, g);
    }

    #[test]
    fn coarsening_blocked_by_regularity() {
        let m = matrix(1, 0, 4, 1);
        // [4:l2][5:l2][12:l3][13:l3][7:l2]
        let g = Grid::from_lines(&m, &[4, 5, 12, 13, 7]).unwrap();
        check_rsm(&m, &g).unwrap();
        // 4,5 -> 2 would put level 1 next to level 3.
        let (same, set) = weak_coarsen(&m, &g, &[CellId::new(4), CellId::new(5)]).unwrap();
        assert!(set.is_empty());
        assert_eq!(same, g);
        // Coarsening the finer pair as well unblocks it.
        let all = [4, 5, 12, 13].map(CellId::new);
        let (g2, set) = weak_coarsen(&m, &g, &all).unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(g2.lines(), [2, 6, 7]);
        check_rsm(&m, &g2).unwrap();
    }

    #[test]
    fn mesh_update_constant_one_refines_only() {
        let m = matrix(2, 2, 4, 1);
        let g = Grid::uniform(&m, 2).unwrap();
        let t = Thresholds::new(0.8, 0.3).unwrap();
        let up = mesh_update(&m, &g, &MonitorResult::new(vec![1.0; 16]), &t).unwrap();
        assert!(up.coarsened.is_empty());
        assert_eq!(up.refined.len(), 16);
        assert_eq!(up.grid.len(), 64);
    }
}

//! Cell averages on a grid and their transfer between nested grids.

use crate::adaptation::MeshUpdate;
use crate::error::{Error, Result};
use crate::matrix::{CellId, MeshMatrix};
use crate::par::*;
use crate::topology::Grid;

/// Finite-volume data: `components` values per grid cell, stored cell-major
/// in the grid's cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    components: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 || values.len() != grid.len() * components {
            return Err(Error::GridMismatch(format!(
                "{} values for {} cells x {components} components",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonPhysicalState {
                cell: grid.cells()[i / components],
                reason: format!("non-finite value {}", values[i]),
            });
        }
        Ok(Self {
            grid,
            components,
            values,
        })
    }

    /// Same state in every cell.
    pub fn constant(grid: Grid, state: &[f64]) -> Result<Self> {
        let values = state.repeat(grid.len());
        Self::new(grid, state.len(), values)
    }

    /// Fills each cell from `init`, which writes one state into the slice.
    pub fn from_fn<F>(grid: Grid, components: usize, init: F) -> Result<Self>
    where
        F: Fn(CellId, &mut [f64]) + Sync,
    {
        let mut values = vec![0.0; grid.len() * components];
        let cells = grid.cells();
        values
            .par_chunks_mut(components)
            .zip(cells.par_iter())
            .for_each(|(slot, &c)| init(c, slot));
        Self::new(grid, components, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// State of the `i`-th grid cell.
    pub fn state(&self, i: usize) -> &[f64] {
        &self.values[i * self.components..(i + 1) * self.components]
    }

    /// State of `cell`, if it belongs to the grid.
    pub fn state_of(&self, cell: CellId) -> Option<&[f64]> {
        self.grid.position(cell).map(|i| self.state(i))
    }

    /// One component across all cells.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.values
            .chunks_exact(self.components)
            .map(|s| s[k])
            .collect()
    }

    /// `sum_C |C| U_C` per component.
    pub fn integrate(&self, matrix: &MeshMatrix) -> Vec<f64> {
        let mut total = vec![0.0; self.components];
        for (i, &c) in self.grid.cells().iter().enumerate() {
            let vol = matrix.geometry(c).volume();
            for (t, v) in total.iter_mut().zip(self.state(i)) {
                *t += vol * v;
            }
        }
        total
    }

    /// Volume-weighted averages onto a grid obtained by coarsening.
    pub fn project_down(&self, matrix: &MeshMatrix, target: &Grid) -> Result<Field> {
        let states: Vec<Vec<f64>> = target
            .cells()
            .par_iter()
            .map(|&t| self.mean_over(matrix, t))
            .collect::<Result<_>>()?;
        Field::new(target.clone(), self.components, states.concat())
    }

    /// Mean of the source data over `cell`, reduced pairwise one level at a
    /// time so that equal daughters reproduce their value exactly.
    fn mean_over(&self, matrix: &MeshMatrix, cell: CellId) -> Result<Vec<f64>> {
        if let Some(i) = self.grid.position(cell) {
            return Ok(self.state(i).to_vec());
        }
        if !matrix.has_daughters(cell) {
            return Err(Error::GridMismatch(format!(
                "cell {cell} is not covered by source cells"
            )));
        }
        let mut parts = matrix
            .daughters(cell)
            .map(|d| self.mean_over(matrix, d))
            .collect::<Result<Vec<_>>>()?;
        let n = parts.len() as f64;
        while parts.len() > 1 {
            parts = parts
                .chunks(2)
                .map(|p| p[0].iter().zip(&p[1]).map(|(a, b)| a + b).collect())
                .collect();
        }
        let mut mean = parts.pop().expect("cells have daughters");
        mean.iter_mut().for_each(|v| *v /= n);
        Ok(mean)
    }

    /// Piecewise-constant injection onto a grid obtained by refinement.
    pub fn project_up(&self, matrix: &MeshMatrix, target: &Grid) -> Result<Field> {
        let states: Vec<&[f64]> = target
            .cells()
            .par_iter()
            .map(|&t| {
                std::iter::once(t)
                    .chain(matrix.ancestors(t))
                    .find_map(|a| self.grid.position(a))
                    .map(|i| self.state(i))
                    .ok_or_else(|| {
                        Error::GridMismatch(format!("target cell {t} has no source ancestor"))
                    })
            })
            .collect::<Result<_>>()?;
        Field::new(target.clone(), self.components, states.concat())
    }

    /// Carries the field through a mesh update: injection onto the refined
    /// grid, then averaging onto the final grid.
    pub fn remap(&self, matrix: &MeshMatrix, update: &MeshUpdate) -> Result<Field> {
        self.project_up(matrix, &update.refined_grid)?
            .project_down(matrix, &update.grid)
    }
}

/// The coarsest cells of `a` and `b` along every subtree: the union of both
/// cell sets without any cell that has an ancestor in the union.
pub fn common_coarsening(matrix: &MeshMatrix, a: &Grid, b: &Grid) -> Result<Grid> {
    if a.bounds() != b.bounds() {
        return Err(Error::GridMismatch("grids have different bounds".into()));
    }
    let in_union = |c: CellId| a.contains(c) || b.contains(c);
    let mut cells: Vec<CellId> = a
        .cells()
        .iter()
        .chain(b.cells())
        .copied()
        .filter(|&c| !matrix.ancestors(c).any(in_union))
        .collect();
    cells.sort_unstable();
    cells.dedup();
    Grid::new(matrix, cells)
}

/// Discrete L1 distance per component: both fields are averaged onto their
/// common coarsening, then `sum_C |C| |U^a_C - U^b_C|`.
pub fn l1_distance(matrix: &MeshMatrix, a: &Field, b: &Field) -> Result<Vec<f64>> {
    if a.components != b.components {
        return Err(Error::GridMismatch(format!(
            "{} vs {} components",
            a.components, b.components
        )));
    }
    let common = common_coarsening(matrix, &a.grid, &b.grid)?;
    let pa = a.project_down(matrix, &common)?;
    let pb = b.project_down(matrix, &common)?;
    let mut dist = vec![0.0; a.components];
    for (i, &c) in common.cells().iter().enumerate() {
        let vol = matrix.geometry(c).volume();
        for (k, d) in dist.iter_mut().enumerate() {
            *d += vol * (pa.state(i)[k] - pb.state(i)[k]).abs();
        }
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::strong_refine;
    use crate::matrix::RefinementBounds;

    fn matrix() -> MeshMatrix {
        MeshMatrix::build(RefinementBounds::new(2, 0, 4, 1).unwrap()).unwrap()
    }

    #[test]
    fn new_checks_shape_and_finiteness() {
        let m = matrix();
        let g = Grid::uniform(&m, 1).unwrap();
        assert!(Field::new(g.clone(), 1, vec![0.0; 3]).is_err());
        assert!(Field::new(g.clone(), 1, vec![0.0, 1.0, f64::NAN, 2.0]).is_err());
        assert!(Field::new(g, 1, vec![0.0; 4]).is_ok());
    }

    #[test]
    fn four_siblings_average_to_mother() {
        let m = matrix();
        let g1 = Grid::uniform(&m, 1).unwrap();
        let f = Field::new(g1, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(f.integrate(&m), [2.5]);
        let g0 = Grid::uniform(&m, 0).unwrap();
        let down = f.project_down(&m, &g0).unwrap();
        assert_eq!(down.values(), [2.5]);
        assert_eq!(f.project_down(&m, f.grid()).unwrap(), f);
        assert_eq!(f.project_up(&m, f.grid()).unwrap(), f);
    }

    #[test]
    fn injection_copies_the_mother_value() {
        let m = matrix();
        let g1 = Grid::uniform(&m, 1).unwrap();
        let f = Field::new(g1.clone(), 1, vec![7.0, 1.0, 1.0, 1.0]).unwrap();
        let (g2, _) = strong_refine(&m, &g1, &[g1.cells()[0]]).unwrap();
        let up = f.project_up(&m, &g2).unwrap();
        assert_eq!(up.values(), [7.0, 7.0, 7.0, 7.0, 1.0, 1.0, 1.0]);
        assert_eq!(up.integrate(&m), f.integrate(&m));
        assert_eq!(up.project_down(&m, &g1).unwrap(), f);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let m = matrix();
        let f = Field::constant(Grid::uniform(&m, 2).unwrap(), &[1.0]).unwrap();
        assert!(f.project_down(&m, &Grid::uniform(&m, 3).unwrap()).is_err());
        assert!(f.project_up(&m, &Grid::uniform(&m, 1).unwrap()).is_err());
    }

    #[test]
    fn l1_of_constants() {
        let m = matrix();
        let g = Grid::uniform(&m, 2).unwrap();
        let (fine, _) = strong_refine(&m, &g, &g.cells()[..5]).unwrap();
        let a = Field::constant(g, &[1.5, 0.0]).unwrap();
        let b = Field::constant(fine, &[0.25, 0.0]).unwrap();
        assert_eq!(l1_distance(&m, &a, &b).unwrap(), [1.25, 0.0]);
        assert_eq!(l1_distance(&m, &a, &a).unwrap(), [0.0, 0.0]);
    }
}

//! Independent oracles shared by the integration tests. Everything here works
//! from raw cell geometry painted onto the finest raster, not from the
//! library's neighbor search or dependency bookkeeping.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use dyadic_amr::adaptation::{strong_refine, weak_coarsen};
use dyadic_amr::matrix::{CellId, MeshMatrix, RefinementBounds};
use dyadic_amr::{Direction, Field, Grid};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn matrix(dim: usize, l_min: u32, l_max: u32, m_r: u32) -> MeshMatrix {
    MeshMatrix::build(RefinementBounds::new(dim, l_min, l_max, m_r).unwrap()).unwrap()
}

/// Half-open pixel box `[x0, x1) x [y0, y1)` of a cell on the level-`l_max`
/// raster. In 1D the y range is `[0, 1)`.
pub fn pixel_box(m: &MeshMatrix, c: CellId) -> [u64; 4] {
    let n = (1u64 << m.bounds().l_max()) as f64;
    let g = m.geometry(c);
    let (x0, x1) = g.extent(0);
    let (y0, y1) = if m.dim() == 2 { g.extent(1) } else { (0.0, 1.0 / n) };
    let px = |v: f64| {
        let p = v * n;
        assert_eq!(p, p.round(), "cell edges lie on the finest raster");
        p as u64
    };
    [px(x0), px(x1), px(y0), px(y1)]
}

/// Owner of every finest-level pixel.
pub struct Raster {
    pub nx: u64,
    pub ny: u64,
    owner: Vec<usize>,
    pub overlaps: usize,
}

impl Raster {
    pub fn paint(m: &MeshMatrix, grid: &Grid) -> Self {
        let nx = 1u64 << m.bounds().l_max();
        let ny = if m.dim() == 2 { nx } else { 1 };
        let mut owner = vec![usize::MAX; (nx * ny) as usize];
        let mut overlaps = 0;
        for (i, &c) in grid.cells().iter().enumerate() {
            let [x0, x1, y0, y1] = pixel_box(m, c);
            for y in y0..y1 {
                for x in x0..x1 {
                    let slot = &mut owner[(y * nx + x) as usize];
                    if *slot != usize::MAX {
                        overlaps += 1;
                    }
                    *slot = i;
                }
            }
        }
        Self {
            nx,
            ny,
            owner,
            overlaps,
        }
    }

    pub fn at(&self, x: u64, y: u64) -> usize {
        self.owner[(y * self.nx + x) as usize]
    }

    pub fn is_tiling(&self) -> bool {
        self.overlaps == 0 && self.owner.iter().all(|&o| o != usize::MAX)
    }
}

pub type NeighborSet = BTreeSet<(usize, Direction)>;

/// Neighbors of every grid cell, by grid position, read off the pixels just
/// outside each face.
pub fn geometric_neighbors(m: &MeshMatrix, grid: &Grid) -> Vec<NeighborSet> {
    let r = Raster::paint(m, grid);
    assert!(r.is_tiling(), "oracle needs a tiling");
    grid.cells()
        .iter()
        .map(|&c| {
            let [x0, x1, y0, y1] = pixel_box(m, c);
            let mut set = NeighborSet::new();
            if x0 > 0 {
                set.extend((y0..y1).map(|y| (r.at(x0 - 1, y), Direction::W)));
            }
            if x1 < r.nx {
                set.extend((y0..y1).map(|y| (r.at(x1, y), Direction::E)));
            }
            if m.dim() == 2 {
                if y0 > 0 {
                    set.extend((x0..x1).map(|x| (r.at(x, y0 - 1), Direction::S)));
                }
                if y1 < r.ny {
                    set.extend((x0..x1).map(|x| (r.at(x, y1), Direction::N)));
                }
            }
            set
        })
        .collect()
}

/// All-pairs interface test: two boxes touch along a face of positive length.
pub fn pairwise_neighbors(m: &MeshMatrix, grid: &Grid) -> Vec<NeighborSet> {
    let boxes: Vec<[u64; 4]> = grid.cells().iter().map(|&c| pixel_box(m, c)).collect();
    let overlap = |a0: u64, a1: u64, b0: u64, b1: u64| a1.min(b1) > a0.max(b0);
    boxes
        .iter()
        .map(|a| {
            let mut set = NeighborSet::new();
            for (j, b) in boxes.iter().enumerate() {
                if overlap(a[2], a[3], b[2], b[3]) {
                    if a[1] == b[0] {
                        set.insert((j, Direction::E));
                    }
                    if a[0] == b[1] {
                        set.insert((j, Direction::W));
                    }
                }
                if m.dim() == 2 && overlap(a[0], a[1], b[0], b[1]) {
                    if a[3] == b[2] {
                        set.insert((j, Direction::N));
                    }
                    if a[2] == b[3] {
                        set.insert((j, Direction::S));
                    }
                }
            }
            set
        })
        .collect()
}

/// Neighbor sets from the library, by grid position.
pub fn library_neighbors(m: &MeshMatrix, grid: &Grid) -> Vec<NeighborSet> {
    grid.cells()
        .iter()
        .map(|&c| {
            dyadic_amr::topology::neighbors_in_grid(m, grid, c)
                .unwrap()
                .into_iter()
                .map(|n| (grid.position(n.cell).unwrap(), n.dir))
                .collect()
        })
        .collect()
}

/// Tiling, level range and level jumps checked geometrically.
pub fn oracle_rsm(m: &MeshMatrix, grid: &Grid) -> Result<(), String> {
    let b = m.bounds();
    let r = Raster::paint(m, grid);
    if !r.is_tiling() {
        return Err(format!("not a tiling ({} overlapping pixels)", r.overlaps));
    }
    let levels: Vec<u32> = grid.cells().iter().map(|&c| m.level(c)).collect();
    if let Some(l) = levels.iter().find(|&&l| l < b.l_min() || l > b.l_max()) {
        return Err(format!("level {l} outside bounds"));
    }
    for (i, set) in geometric_neighbors(m, grid).iter().enumerate() {
        for &(j, _) in set {
            if levels[i].abs_diff(levels[j]) > b.regularity() {
                return Err(format!(
                    "cells {} and {} jump {} levels",
                    grid.cells()[i],
                    grid.cells()[j],
                    levels[i].abs_diff(levels[j])
                ));
            }
        }
    }
    Ok(())
}

/// Random regular mesh built by random refinement sweeps, with occasional
/// random coarsening.
pub fn random_rsm(rng: &mut impl Rng, m: &MeshMatrix, sweeps: usize) -> Grid {
    let b = m.bounds();
    let mut grid = Grid::uniform(m, b.l_min()).unwrap();
    for _ in 0..sweeps {
        let p: f64 = rng.gen_range(0.02..0.3);
        let marks: Vec<CellId> = grid
            .cells()
            .iter()
            .copied()
            .filter(|&c| m.level(c) < b.l_max() && rng.gen_bool(p))
            .collect();
        grid = strong_refine(m, &grid, &marks).unwrap().0;
        if rng.gen_bool(0.3) {
            let marks: Vec<CellId> = grid
                .cells()
                .iter()
                .copied()
                .filter(|&c| m.level(c) > b.l_min() && rng.gen_bool(0.7))
                .collect();
            grid = weak_coarsen(m, &grid, &marks).unwrap().0;
        }
    }
    grid
}

/// Random bounds in the given level window.
pub fn random_bounds(rng: &mut impl Rng, dim: usize, levels: std::ops::RangeInclusive<u32>) -> RefinementBounds {
    let (lo, hi) = (*levels.start(), *levels.end());
    let l_min = rng.gen_range(lo..hi);
    let l_max = rng.gen_range(l_min + 1..=hi);
    let m_r = *[1, 2].choose(rng).unwrap();
    RefinementBounds::new(dim, l_min, l_max, m_r).unwrap()
}

/// Exhaustive closure of the refinement set: keep adding grid neighbors of
/// refined cells that sit `m_r` or more levels below them.
pub fn refine_closure(m: &MeshMatrix, grid: &Grid, marks: &[CellId]) -> BTreeSet<CellId> {
    let nbs = geometric_neighbors(m, grid);
    let m_r = m.bounds().regularity();
    let mut set: BTreeSet<CellId> = marks.iter().copied().collect();
    loop {
        let mut grown = set.clone();
        for &c in &set {
            let i = grid.position(c).unwrap();
            for &(j, _) in &nbs[i] {
                let n = grid.cells()[j];
                if m.level(c) >= m.level(n) + m_r {
                    grown.insert(n);
                }
            }
        }
        if grown == set {
            return set;
        }
        set = grown;
    }
}

/// Greatest fixed point of the coarsening rule: start from every complete,
/// fully marked sibling group and drop groups with a daughter facing a cell
/// `m_r` or more levels finer that is not itself coarsened. Returns the
/// coarsened daughters.
pub fn coarsen_fixed_point(m: &MeshMatrix, grid: &Grid, marks: &[CellId]) -> BTreeSet<CellId> {
    let b = m.bounds();
    let nbs = geometric_neighbors(m, grid);
    let marked: BTreeSet<CellId> = marks.iter().copied().filter(|&c| m.level(c) > b.l_min()).collect();
    let mut groups: BTreeSet<CellId> = marked
        .iter()
        .map(|&c| m.mother(c).unwrap())
        .filter(|&mo| m.daughters(mo).all(|d| marked.contains(&d)))
        .collect();
    loop {
        let coarsened: BTreeSet<CellId> = groups.iter().flat_map(|&g| m.daughters(g)).collect();
        let keep: BTreeSet<CellId> = groups
            .iter()
            .copied()
            .filter(|&g| {
                m.daughters(g).all(|d| {
                    let i = grid.position(d).unwrap();
                    nbs[i].iter().all(|&(j, _)| {
                        let n = grid.cells()[j];
                        m.level(n) < m.level(d) + b.regularity() || coarsened.contains(&n)
                    })
                })
            })
            .collect();
        if keep == groups {
            return coarsened;
        }
        groups = keep;
    }
}

/// `grid` with `refined` cells replaced by their daughters and `coarsened`
/// sibling groups replaced by their mothers, in line order.
pub fn apply_changes(m: &MeshMatrix, grid: &Grid, refined: &BTreeSet<CellId>, coarsened: &BTreeSet<CellId>) -> BTreeSet<CellId> {
    let mut cells = BTreeSet::new();
    for &c in grid.cells() {
        if refined.contains(&c) {
            cells.extend(m.daughters(c));
        } else if coarsened.contains(&c) {
            cells.insert(m.mother(c).unwrap());
        } else {
            cells.insert(c);
        }
    }
    cells
}

pub fn random_field(rng: &mut impl Rng, grid: &Grid, components: usize, range: std::ops::Range<f64>) -> Field {
    let values = (0..grid.len() * components).map(|_| rng.gen_range(range.clone())).collect();
    Field::new(grid.clone(), components, values).unwrap()
}

/// L1 distance by pixel overlay: on the region of each cell of the coarser
/// grid along every subtree, average both fields pixel by pixel, then sum
/// `|C| |a - b|`.
pub fn overlay_l1(m: &MeshMatrix, a: &Field, b: &Field) -> Vec<f64> {
    let ra = Raster::paint(m, a.grid());
    let rb = Raster::paint(m, b.grid());
    let nc = a.components();
    // Key: the coarser owner of each pixel.
    let mut sums: BTreeMap<CellId, (u64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for y in 0..ra.ny {
        for x in 0..ra.nx {
            let (i, j) = (ra.at(x, y), rb.at(x, y));
            let (ca, cb) = (a.grid().cells()[i], b.grid().cells()[j]);
            let key = if m.level(ca) <= m.level(cb) { ca } else { cb };
            let e = sums.entry(key).or_insert_with(|| (0, vec![0.0; nc], vec![0.0; nc]));
            e.0 += 1;
            for k in 0..nc {
                e.1[k] += a.state(i)[k];
                e.2[k] += b.state(j)[k];
            }
        }
    }
    let pixel = 1.0 / (ra.nx * ra.ny) as f64;
    let mut total = vec![0.0; nc];
    for (count, sa, sb) in sums.values() {
        let n = *count as f64;
        for k in 0..nc {
            total[k] += n * pixel * (sa[k] / n - sb[k] / n).abs();
        }
    }
    total
}

/// `sum |C| U_C` with cell areas from the pixel boxes.
pub fn pixel_integral(m: &MeshMatrix, f: &Field) -> Vec<f64> {
    let n = (1u64 << m.bounds().l_max()) as f64;
    let area = if m.dim() == 2 { n * n } else { n };
    let mut total = vec![0.0; f.components()];
    for (i, &c) in f.grid().cells().iter().enumerate() {
        let [x0, x1, y0, y1] = pixel_box(m, c);
        let w = ((x1 - x0) * (y1 - y0)) as f64 / area;
        for (t, v) in total.iter_mut().zip(f.state(i)) {
            *t += w * v;
        }
    }
    total
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

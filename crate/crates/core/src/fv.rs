//! Pieces shared by the finite-volume solvers: interface bookkeeping,
//! subsampled initial data and the step/adapt/remap loop.

use crate::adaptation::{mesh_update, MeshUpdate, Thresholds};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::matrix::{CellId, MeshMatrix};
use crate::monitor::MonitorResult;
use crate::topology::{Direction, Grid, Neighborhood};

/// `|dC_i n dC_j| / |C_i| = 2^{2 L_i - max(L_i, L_j)}` in 2D.
pub fn interface_ratio(level_i: u32, level_j: u32) -> f64 {
    2f64.powi(2 * level_i as i32 - level_i.max(level_j) as i32)
}

/// Outward directions of the faces of `cell` lying on the domain boundary.
pub fn boundary_faces(matrix: &MeshMatrix, cell: CellId) -> impl Iterator<Item = Direction> {
    let width = 1u64 << matrix.level(cell);
    let [k1, k2] = matrix.coords(cell);
    let dim = matrix.dim();
    [
        (Direction::W, k1 == 1),
        (Direction::E, k1 == width),
        (Direction::S, k2 == 1),
        (Direction::N, k2 == width),
    ]
    .into_iter()
    .filter_map(move |(d, on)| (on && d.axis() < dim).then_some(d))
}

/// Flux through one face, indexed by grid position.
pub(crate) struct FaceFlux<const N: usize> {
    pub i: usize,
    /// `None` for a boundary face of cell `i`.
    pub j: Option<usize>,
    pub ratio_i: f64,
    pub ratio_j: f64,
    /// Axis of the face normal.
    pub axis: usize,
    pub flux: [f64; N],
}

/// `-sum ratio H` per cell: every face is evaluated once and charged to
/// both sides with opposite signs. Each axis is summed on its own first, so
/// a uniform state cancels exactly.
pub(crate) fn accumulate<const N: usize>(faces: &[FaceFlux<N>], len: usize) -> Vec<f64> {
    let mut parts = [vec![0.0; len * N], vec![0.0; len * N]];
    for f in faces {
        let rhs = &mut parts[f.axis];
        for k in 0..N {
            rhs[f.i * N + k] -= f.ratio_i * f.flux[k];
        }
        if let Some(j) = f.j {
            for k in 0..N {
                rhs[j * N + k] += f.ratio_j * f.flux[k];
            }
        }
    }
    let [mut x, y] = parts;
    for (a, b) in x.iter_mut().zip(y) {
        *a += b;
    }
    x
}

const SUBSAMPLES: u32 = 16;

/// Mean of `sample` over a 16 x 16 grid of points inside a 2D cell.
pub fn cell_average(matrix: &MeshMatrix, cell: CellId, mut sample: impl FnMut(f64, f64) -> f64) -> f64 {
    let g = matrix.geometry(cell);
    let (x0, _) = g.extent(0);
    let (y0, _) = g.extent(1);
    let step = g.size / SUBSAMPLES as f64;
    let mut sum = 0.0;
    for b in 0..SUBSAMPLES {
        let y = y0 + (b as f64 + 0.5) * step;
        for a in 0..SUBSAMPLES {
            sum += sample(x0 + (a as f64 + 0.5) * step, y);
        }
    }
    sum / (SUBSAMPLES * SUBSAMPLES) as f64
}

/// Output times `0, every, 2 every, ..., t_end`.
pub fn snapshot_times(t_end: f64, every: f64) -> Vec<f64> {
    let mut times = vec![0.0];
    let mut n = 1u32;
    while (n as f64) * every < t_end * (1.0 - 1e-12) {
        times.push(n as f64 * every);
        n += 1;
    }
    if t_end > 0.0 {
        times.push(t_end);
    }
    times
}

/// Sorted, deduplicated `times` together with 0 and `t_end`.
pub fn output_times(t_end: f64, times: &[f64]) -> Vec<f64> {
    let mut all = times.to_vec();
    all.extend([0.0, t_end]);
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

pub(crate) fn check_output_times(t_end: f64, times: &[f64]) -> Result<()> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Config(format!("t_end must be finite and >= 0, got {t_end}")));
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && **t <= t_end)) {
        return Err(Error::Config(format!("output time {t} outside [0, {t_end}]")));
    }
    Ok(())
}

/// Per-step information handed to run observers.
pub struct StepReport<'a> {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    /// Field after the time step, on the grid it was computed on.
    pub stepped: &'a Field,
    /// Field carried onto the adapted grid.
    pub field: &'a Field,
    pub update: Option<&'a MeshUpdate>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// `(t, field)` at every output time.
    pub snapshots: Vec<(f64, Field)>,
    pub steps: usize,
}

impl RunOutput {
    pub fn last(&self) -> &Field {
        &self.snapshots.last().expect("at least the initial snapshot").1
    }
}

/// A one-step method with its own monitor.
pub(crate) trait Scheme {
    fn stable_dt(&self, matrix: &MeshMatrix, field: &Field, nb: &Neighborhood) -> Result<f64>;
    fn advance(&self, matrix: &MeshMatrix, field: &Field, nb: &Neighborhood, dt: f64) -> Result<Field>;
    fn monitor(&self, matrix: &MeshMatrix, field: &Field, nb: &Neighborhood) -> MonitorResult;
}

/// Builds data on `start`, then repeatedly adapts to the scheme's monitor
/// and re-initializes on the new grid.
pub(crate) fn adapt_initial<S: Scheme>(
    matrix: &MeshMatrix,
    scheme: &S,
    thresholds: &Thresholds,
    passes: u32,
    start: Grid,
    init: impl Fn(Grid) -> Result<Field>,
) -> Result<Field> {
    let mut field = init(start)?;
    for _ in 0..passes {
        let nb = Neighborhood::build(matrix, field.grid())?;
        let up = mesh_update(matrix, field.grid(), &scheme.monitor(matrix, &field, &nb), thresholds)?;
        if up.grid == *field.grid() {
            break;
        }
        field = init(up.grid)?;
    }
    Ok(field)
}

/// Steps from `field` through the output `times`, landing on each exactly.
/// With `thresholds` the grid is adapted and the data remapped after every
/// step.
pub(crate) fn march<S: Scheme>(
    matrix: &MeshMatrix,
    scheme: &S,
    mut field: Field,
    times: &[f64],
    thresholds: Option<&Thresholds>,
    observer: &mut dyn FnMut(&StepReport) -> Result<()>,
) -> Result<RunOutput> {
    let mut snapshots = vec![(0.0, field.clone())];
    let mut t = 0.0;
    let mut step = 0;
    let mut nb = Neighborhood::build(matrix, field.grid())?;
    for &target in times.iter().skip(1) {
        while t < target {
            let mut dt = scheme.stable_dt(matrix, &field, &nb)?;
            let hits = t + dt >= target;
            if hits {
                dt = target - t;
            }
            let stepped = scheme.advance(matrix, &field, &nb, dt)?;
            t = if hits { target } else { t + dt };
            step += 1;
            let update = match thresholds {
                Some(th) => {
                    let monitor = scheme.monitor(matrix, &stepped, &nb);
                    Some(mesh_update(matrix, stepped.grid(), &monitor, th)?)
                }
                None => None,
            };
            let next = match &update {
                Some(up) if up.grid != *stepped.grid() || up.refined_grid != *stepped.grid() => {
                    stepped.remap(matrix, up)?
                }
                _ => stepped.clone(),
            };
            observer(&StepReport {
                step,
                time: t,
                dt,
                stepped: &stepped,
                field: &next,
                update: update.as_ref(),
            })?;
            if next.grid() != stepped.grid() {
                nb = Neighborhood::build(matrix, next.grid())?;
            }
            field = next;
        }
        snapshots.push((target, field.clone()));
    }
    Ok(RunOutput {
        snapshots,
        steps: step,
    })
}

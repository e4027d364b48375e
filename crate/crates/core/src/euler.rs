//! First-order finite volumes for the 2D compressible Euler equations with
//! Steger-Warming flux-vector splitting, on an adapting grid.
//!
//! Conserved variables per cell are `(rho, rho u, rho v, E)` with `E` the
//! total energy per unit volume and `p = (gamma - 1) (E - rho |u|^2 / 2)`.

use crate::adaptation::Thresholds;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::fv::{self, accumulate, boundary_faces, interface_ratio, FaceFlux, RunOutput, Scheme, StepReport};
use crate::matrix::{CellId, MeshMatrix, RefinementBounds};
use crate::monitor::{gradient_monitor, MonitorResult};
use crate::par::*;
use crate::topology::{Direction, Grid, Neighborhood};

pub const COMPONENTS: usize = 4;
pub const NAMES: [&str; 4] = ["rho", "mom_x", "mom_y", "E"];

pub type Flux = [f64; COMPONENTS];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerState {
    pub rho: f64,
    pub mom_x: f64,
    pub mom_y: f64,
    pub energy: f64,
}

impl EulerState {
    pub fn new(rho: f64, mom_x: f64, mom_y: f64, energy: f64) -> Self {
        Self {
            rho,
            mom_x,
            mom_y,
            energy,
        }
    }

    pub fn from_primitive(rho: f64, u: f64, v: f64, p: f64, gamma: f64) -> Self {
        Self::new(rho, rho * u, rho * v, p / (gamma - 1.0) + 0.5 * rho * (u * u + v * v))
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2], s[3])
    }

    pub fn to_array(self) -> Flux {
        [self.rho, self.mom_x, self.mom_y, self.energy]
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.mom_x / self.rho, self.mom_y / self.rho)
    }

    pub fn pressure(&self, gamma: f64) -> f64 {
        let (u, v) = self.velocity();
        (gamma - 1.0) * (self.energy - 0.5 * self.rho * (u * u + v * v))
    }

    pub fn sound_speed(&self, gamma: f64) -> f64 {
        (gamma * self.pressure(gamma) / self.rho).sqrt()
    }

    fn check(&self, gamma: f64) -> std::result::Result<f64, String> {
        if !(self.rho > 0.0) {
            return Err(format!("density {}", self.rho));
        }
        let p = self.pressure(gamma);
        if !(p > 0.0) {
            return Err(format!("pressure {p}"));
        }
        Ok(p)
    }

    /// Momentum along `axis` and across it.
    fn split_momentum(&self, axis: usize) -> (f64, f64) {
        if axis == 0 {
            (self.mom_x, self.mom_y)
        } else {
            (self.mom_y, self.mom_x)
        }
    }
}

fn nonphysical(reason: String) -> Error {
    Error::NonPhysicalState {
        cell: CellId::new(u32::MAX),
        reason,
    }
}

/// Places normal/tangential flux components back into x/y order.
fn assemble(axis: usize, mass: f64, normal: f64, tangential: f64, energy: f64) -> Flux {
    if axis == 0 {
        [mass, normal, tangential, energy]
    } else {
        [mass, tangential, normal, energy]
    }
}

/// Exact flux `F(U) . e_axis`.
pub fn euler_flux(state: &EulerState, gamma: f64, axis: usize) -> Result<Flux> {
    let p = state.check(gamma).map_err(nonphysical)?;
    let (mn, mt) = state.split_momentum(axis);
    let un = mn / state.rho;
    Ok(assemble(axis, mn, mn * un + p, mt * un, (state.energy + p) * un))
}

/// Positive or negative Steger-Warming split flux along `axis`.
fn split_flux(state: &EulerState, gamma: f64, axis: usize, positive: bool) -> Result<Flux> {
    let p = state.check(gamma).map_err(nonphysical)?;
    let (mn, mt) = state.split_momentum(axis);
    let rho = state.rho;
    let (un, ut) = (mn / rho, mt / rho);
    let a = (gamma * p / rho).sqrt();
    let h = (state.energy + p) / rho;
    let part = |lambda: f64| {
        if positive {
            0.5 * (lambda + lambda.abs())
        } else {
            0.5 * (lambda - lambda.abs())
        }
    };
    let (l1, l2, l3) = (part(un - a), part(un), part(un + a));
    let s = rho / (2.0 * gamma);
    let g1 = gamma - 1.0;
    let mass = l1 + 2.0 * g1 * l2 + l3;
    Ok(assemble(
        axis,
        s * mass,
        s * ((un - a) * l1 + 2.0 * g1 * un * l2 + (un + a) * l3),
        s * ut * mass,
        s * ((h - un * a) * l1 + g1 * (un * un + ut * ut) * l2 + (h + un * a) * l3),
    ))
}

/// Numerical flux through a face with outward normal `normal`, from the
/// interior state `inner` to the exterior state `outer`.
///
/// Along the coordinate versors this is `F+(inner) + F-(outer)`; against
/// them it is `-H(outer, inner)` so every face flux is antisymmetric.
pub fn splitting_flux(
    inner: &EulerState,
    outer: &EulerState,
    gamma: f64,
    normal: Direction,
) -> Result<Flux> {
    let axis = normal.axis();
    if normal.is_positive() {
        let plus = split_flux(inner, gamma, axis, true)?;
        let minus = split_flux(outer, gamma, axis, false)?;
        Ok(std::array::from_fn(|k| plus[k] + minus[k]))
    } else {
        let h = splitting_flux(outer, inner, gamma, normal.opposite())?;
        Ok(h.map(|v| -v))
    }
}

fn face_fluxes(
    matrix: &MeshMatrix,
    field: &Field,
    neighborhood: &Neighborhood,
    gamma: f64,
) -> Result<Vec<FaceFlux<COMPONENTS>>> {
    let cells = field.grid().cells();
    let per_cell: Vec<Vec<FaceFlux<COMPONENTS>>> = (0..cells.len())
        .into_par_iter()
        .map(|i| {
            let ci = cells[i];
            let li = matrix.level(ci);
            let ui = EulerState::from_slice(field.state(i));
            let tag = |e: Error| match e {
                Error::NonPhysicalState { reason, .. } => Error::NonPhysicalState { cell: ci, reason },
                other => other,
            };
            let mut out = Vec::with_capacity(4);
            for n in neighborhood.of(i).iter().filter(|n| n.dir.is_positive()) {
                let lj = matrix.level(cells[n.index]);
                let uj = EulerState::from_slice(field.state(n.index));
                out.push(FaceFlux {
                    i,
                    j: Some(n.index),
                    ratio_i: interface_ratio(li, lj),
                    ratio_j: interface_ratio(lj, li),
                    axis: n.dir.axis(),
                    flux: splitting_flux(&ui, &uj, gamma, n.dir).map_err(tag)?,
                });
            }
            // Transmissive walls: the ghost state is the cell's own.
            for dir in boundary_faces(matrix, ci) {
                out.push(FaceFlux {
                    i,
                    j: None,
                    ratio_i: interface_ratio(li, li),
                    ratio_j: 0.0,
                    axis: dir.axis(),
                    flux: splitting_flux(&ui, &ui, gamma, dir).map_err(tag)?,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

/// Largest stable step: `cfl * min_C size / max(|u| + c, |v| + c)`.
pub fn stable_dt(matrix: &MeshMatrix, field: &Field, gamma: f64, cfl: f64) -> Result<f64> {
    let cells = field.grid().cells();
    let dts: Vec<f64> = (0..cells.len())
        .into_par_iter()
        .map(|i| {
            let s = EulerState::from_slice(field.state(i));
            s.check(gamma).map_err(|reason| Error::NonPhysicalState { cell: cells[i], reason })?;
            let (u, v) = s.velocity();
            let c = s.sound_speed(gamma);
            Ok(matrix.geometry(cells[i]).size / (u.abs() + c).max(v.abs() + c))
        })
        .collect::<Result<_>>()?;
    Ok(cfl * dts.into_iter().fold(f64::INFINITY, f64::min))
}

/// One explicit update with the given time step.
pub fn advance(
    matrix: &MeshMatrix,
    field: &Field,
    neighborhood: &Neighborhood,
    gamma: f64,
    dt: f64,
) -> Result<Field> {
    let faces = face_fluxes(matrix, field, neighborhood, gamma)?;
    let rhs = accumulate(&faces, field.len());
    let mut next = field.clone();
    for (u, r) in next.values_mut().iter_mut().zip(&rhs) {
        *u += dt * r;
    }
    for (i, &c) in next.grid().cells().iter().enumerate() {
        EulerState::from_slice(next.state(i))
            .check(gamma)
            .map_err(|reason| Error::NonPhysicalState { cell: c, reason })?;
    }
    Ok(next)
}

/// One CFL-limited step. Returns the new field and the step taken.
pub fn euler_step(
    matrix: &MeshMatrix,
    field: &Field,
    neighborhood: &Neighborhood,
    config: &EulerConfig,
) -> Result<(Field, f64)> {
    let dt = stable_dt(matrix, field, config.gamma, config.cfl)?;
    Ok((advance(matrix, field, neighborhood, config.gamma, dt)?, dt))
}

/// Normalized density gradient over grid neighbors.
pub fn density_gradient_monitor(
    matrix: &MeshMatrix,
    field: &Field,
    neighborhood: &Neighborhood,
) -> MonitorResult {
    gradient_monitor(matrix, field.grid(), neighborhood, &field.component(0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EulerConfig {
    pub bounds: RefinementBounds,
    pub gamma: f64,
    pub cfl: f64,
    pub thresholds: Thresholds,
    pub t_end: f64,
    /// Output times; 0 and `t_end` are always included.
    pub snapshot_times: Vec<f64>,
    /// Adapt-and-resample passes on the initial data before time stepping.
    pub initial_adapt_passes: u32,
}

impl EulerConfig {
    pub fn explosion(bounds: RefinementBounds) -> Self {
        Self {
            bounds,
            gamma: 1.4,
            cfl: 0.5,
            thresholds: Thresholds::new(0.4, 0.4).expect("valid thresholds"),
            t_end: 0.08,
            snapshot_times: vec![0.0, 0.04, 0.08],
            initial_adapt_passes: bounds.l_max() - bounds.l_min(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.dim() != 2 {
            return Err(Error::Config("the Euler solver is two-dimensional".into()));
        }
        if !(self.gamma > 1.0) {
            return Err(Error::Config(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        fv::check_output_times(self.t_end, &self.snapshot_times)
    }
}

const DISC_CENTER: f64 = 0.5;
const DISC_RADIUS: f64 = 0.12;

/// Cell-averaged explosion data: `(1, 0, 0, 2.5)` inside the disc of radius
/// 0.12 around the center, `(1/8, 0, 0, 0.25)` outside.
pub fn explosion_initial(matrix: &MeshMatrix, grid: Grid) -> Result<Field> {
    let inside_state = [1.0, 0.0, 0.0, 2.5];
    let outside_state = [0.125, 0.0, 0.0, 0.25];
    Field::from_fn(grid, COMPONENTS, |c, out| {
        let w = fv::cell_average(matrix, c, |x, y| {
            let (dx, dy) = (x - DISC_CENTER, y - DISC_CENTER);
            (dx * dx + dy * dy < DISC_RADIUS * DISC_RADIUS) as u8 as f64
        });
        for k in 0..COMPONENTS {
            out[k] = w * inside_state[k] + (1.0 - w) * outside_state[k];
        }
    })
}

struct Explosion {
    gamma: f64,
    cfl: f64,
}

impl Scheme for Explosion {
    fn stable_dt(&self, matrix: &MeshMatrix, field: &Field, _: &Neighborhood) -> Result<f64> {
        stable_dt(matrix, field, self.gamma, self.cfl)
    }

    fn advance(&self, matrix: &MeshMatrix, field: &Field, nb: &Neighborhood, dt: f64) -> Result<Field> {
        advance(matrix, field, nb, self.gamma, dt)
    }

    fn monitor(&self, matrix: &MeshMatrix, field: &Field, nb: &Neighborhood) -> MonitorResult {
        density_gradient_monitor(matrix, field, nb)
    }
}

/// The explosion experiment: start on `G_{l_min}`, step, adapt to the
/// density monitor, remap, repeat until `t_end`.
pub fn run_explosion(
    matrix: &MeshMatrix,
    config: &EulerConfig,
    observer: &mut dyn FnMut(&StepReport) -> Result<()>,
) -> Result<RunOutput> {
    config.validate()?;
    if matrix.bounds() != &config.bounds {
        return Err(Error::Config("matrix bounds differ from the run configuration".into()));
    }
    let scheme = Explosion {
        gamma: config.gamma,
        cfl: config.cfl,
    };
    let start = Grid::uniform(matrix, config.bounds.l_min())?;
    let field = fv::adapt_initial(
        matrix,
        &scheme,
        &config.thresholds,
        config.initial_adapt_passes,
        start,
        |g| explosion_initial(matrix, g),
    )?;
    let times = fv::output_times(config.t_end, &config.snapshot_times);
    fv::march(matrix, &scheme, field, &times, Some(&config.thresholds), observer)
}

/// Appends the pressure as a fifth column for output.
pub fn with_pressure(field: &Field, gamma: f64) -> Result<Field> {
    let values: Vec<f64> = (0..field.len())
        .flat_map(|i| {
            let s = field.state(i);
            let p = EulerState::from_slice(s).pressure(gamma);
            [s[0], s[1], s[2], s[3], p]
        })
        .collect();
    Field::new(field.grid().clone(), COMPONENTS + 1, values)
}

//! Haptotaxis-diffusion-reaction model of cancer invasion,
//!
//! ```text
//! c_t = D_c Lap c - chi div(c grad v) + mu c (1 - c)
//! v_t = -delta v m
//! m_t = D_m Lap m + alpha c - beta m
//! ```
//!
//! solved with first-order finite volumes and homogeneous Neumann walls.

pub mod ecm;

use crate::adaptation::Thresholds;
use crate::error::{Error, Result};
use crate::field::{l1_distance, Field};
use crate::fv::{self, accumulate, interface_ratio, FaceFlux, RunOutput, Scheme, StepReport};
use crate::matrix::{MeshMatrix, RefinementBounds};
use crate::monitor::{gradient_magnitudes, gradient_monitor, MonitorResult};
use crate::par::*;
use crate::topology::{Direction, Grid, Neighborhood};

pub use ecm::EcmRaster;

pub const COMPONENTS: usize = 3;
pub const NAMES: [&str; 3] = ["c", "v", "m"];

pub type State = [f64; COMPONENTS];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CancerParams {
    pub chi: f64,
    pub d_c: f64,
    pub d_m: f64,
    pub mu: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for CancerParams {
    fn default() -> Self {
        Self {
            chi: 2e-2,
            d_c: 2e-4,
            d_m: 1e-3,
            mu: 0.5,
            delta: 4.0,
            alpha: 0.5,
            beta: 0.3,
        }
    }
}

impl CancerParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.chi, self.d_c, self.d_m, self.mu, self.delta, self.alpha, self.beta];
        if all.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("parameters must be finite and >= 0: {self:?}")));
        }
        if !(self.d_c > 0.0 && self.d_m > 0.0) {
            return Err(Error::Config("diffusion coefficients must be positive".into()));
        }
        Ok(())
    }
}

/// `S(c, v, m) = (mu c (1 - c), -delta v m, alpha c - beta m)`.
pub fn cancer_source(u: &State, p: &CancerParams) -> State {
    let [c, v, m] = *u;
    [p.mu * c * (1.0 - c), -p.delta * v * m, p.alpha * c - p.beta * m]
}

/// Diffusion plus upwinded haptotaxis flux from cell `i` to cell `j`
/// through a face with outward normal `normal`; `distance` separates the
/// cell centers. Opposite normals use `-H(U_j, U_i, -n)`.
pub fn cancer_flux(
    ui: &State,
    uj: &State,
    normal: Direction,
    distance: f64,
    p: &CancerParams,
) -> Result<State> {
    if !(distance > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "cell centers {distance} apart"
        )));
    }
    if !normal.is_positive() {
        return cancer_flux(uj, ui, normal.opposite(), distance, p).map(|h| h.map(|v| -v));
    }
    let grad = |k: usize| (uj[k] - ui[k]) / distance;
    let drift = p.chi * grad(1);
    Ok([
        -p.d_c * grad(0) + drift.max(0.0) * ui[0] - (-drift).max(0.0) * uj[0],
        0.0,
        -p.d_m * grad(2),
    ])
}

fn state(field: &Field, i: usize) -> State {
    let s = field.state(i);
    [s[0], s[1], s[2]]
}

fn face_fluxes(
    matrix: &MeshMatrix,
    field: &Field,
    nb: &Neighborhood,
    p: &CancerParams,
) -> Result<Vec<FaceFlux<COMPONENTS>>> {
    let cells = field.grid().cells();
    let per_cell: Vec<Vec<FaceFlux<COMPONENTS>>> = (0..cells.len())
        .into_par_iter()
        .map(|i| {
            let gi = matrix.geometry(cells[i]);
            let li = matrix.level(cells[i]);
            let ui = state(field, i);
            nb.of(i)
                .iter()
                .filter(|n| n.dir.is_positive())
                .map(|n| {
                    let cj = cells[n.index];
                    let lj = matrix.level(cj);
                    let dist = gi.distance(&matrix.geometry(cj));
                    Ok(FaceFlux {
                        i,
                        j: Some(n.index),
                        ratio_i: interface_ratio(li, lj),
                        ratio_j: interface_ratio(lj, li),
                        axis: n.dir.axis(),
                        flux: cancer_flux(&ui, &state(field, n.index), n.dir, dist, p)?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    // Walls carry no flux.
    Ok(per_cell.into_iter().flatten().collect())
}

/// `cfl * min_C min(h^2 / (4 max(D_c, D_m)), h / (chi |grad v|))`, with
/// `|grad v|` the largest difference quotient to a neighbor.
pub fn stable_dt(
    matrix: &MeshMatrix,
    field: &Field,
    nb: &Neighborhood,
    p: &CancerParams,
    cfl: f64,
) -> f64 {
    let grad_v = gradient_magnitudes(matrix, field.grid(), nb, &field.component(1));
    let d = p.d_c.max(p.d_m);
    let bounds: Vec<f64> = field
        .grid()
        .cells()
        .par_iter()
        .zip(grad_v.par_iter())
        .map(|(&c, &g)| {
            let h = matrix.geometry(c).size;
            let hapto = if p.chi * g > 0.0 { h / (p.chi * g) } else { f64::INFINITY };
            (h * h / (4.0 * d)).min(hapto)
        })
        .collect();
    cfl * bounds.into_iter().fold(f64::INFINITY, f64::min)
}

/// `U + dt (S(U) - sum ratio H)`, failing if any value leaves `[-guard, guard]`.
pub fn advance(
    matrix: &MeshMatrix,
    field: &Field,
    nb: &Neighborhood,
    p: &CancerParams,
    dt: f64,
    guard: f64,
) -> Result<Field> {
    let faces = face_fluxes(matrix, field, nb, p)?;
    let rhs = accumulate(&faces, field.len());
    let mut next = field.clone();
    for (i, u) in next.values_mut().chunks_exact_mut(COMPONENTS).enumerate() {
        let s = cancer_source(&[u[0], u[1], u[2]], p);
        for k in 0..COMPONENTS {
            u[k] += dt * (s[k] + rhs[i * COMPONENTS + k]);
        }
    }
    if let Some(pos) = next.values().iter().position(|v| !(v.abs() <= guard)) {
        return Err(Error::Instability {
            cell: next.grid().cells()[pos / COMPONENTS],
            value: next.values()[pos],
            guard,
        });
    }
    Ok(next)
}

/// One CFL-limited step.
pub fn cancer_step(
    matrix: &MeshMatrix,
    field: &Field,
    nb: &Neighborhood,
    config: &CancerConfig,
) -> Result<(Field, f64)> {
    let dt = stable_dt(matrix, field, nb, &config.params, config.cfl);
    let next = advance(matrix, field, nb, &config.params, dt, config.blowup_guard)?;
    Ok((next, dt))
}

/// Normalized gradient of the cancer cell density.
pub fn cancer_monitor(matrix: &MeshMatrix, field: &Field, nb: &Neighborhood) -> MonitorResult {
    gradient_monitor(matrix, field.grid(), nb, &field.component(0))
}

/// The tumour region `x_2 >= sin(x_1^3 / 125 + (2 x_1 + 26) / 25 + 1 / 20)`.
pub fn in_tumour(x: f64, y: f64) -> bool {
    y >= (x.powi(3) / 125.0 + (2.0 * x + 26.0) / 25.0 + 0.05).sin()
}

/// Initial ECM density outside the tumour.
#[derive(Debug, Clone, PartialEq)]
pub enum Ecm {
    /// `v_0 = 1`.
    Uniform,
    Heterogeneous(EcmRaster),
}

impl Ecm {
    fn density(&self, x: f64, y: f64) -> f64 {
        match self {
            Ecm::Uniform => 1.0,
            Ecm::Heterogeneous(r) => r.sample(x, y),
        }
    }
}

/// Cell averages of `(1, 0, 0.3)` on the tumour and `(0, v_0, 0)` elsewhere.
pub fn initial_condition(ecm: &Ecm, matrix: &MeshMatrix, grid: Grid) -> Result<Field> {
    if matrix.dim() != 2 {
        return Err(Error::Config("the invasion model is two-dimensional".into()));
    }
    Field::from_fn(grid, COMPONENTS, |cell, out| {
        let w = fv::cell_average(matrix, cell, |x, y| in_tumour(x, y) as u8 as f64);
        let v = fv::cell_average(matrix, cell, |x, y| {
            if in_tumour(x, y) {
                0.0
            } else {
                ecm.density(x, y)
            }
        });
        out.copy_from_slice(&[w, v, 0.3 * w]);
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CancerConfig {
    pub bounds: RefinementBounds,
    pub params: CancerParams,
    pub cfl: f64,
    pub thresholds: Thresholds,
    pub t_end: f64,
    /// Output times; 0 and `t_end` are always included.
    pub snapshot_times: Vec<f64>,
    pub blowup_guard: f64,
    pub ecm: Ecm,
    /// Adapt-and-resample passes on the initial data.
    pub initial_adapt_passes: u32,
}

impl CancerConfig {
    fn base(bounds: RefinementBounds, ecm: Ecm, t_end: f64, snapshot_times: Vec<f64>) -> Self {
        Self {
            bounds,
            params: CancerParams::default(),
            cfl: 0.5,
            thresholds: Thresholds::new(0.2, 0.1).expect("valid thresholds"),
            t_end,
            snapshot_times,
            blowup_guard: 1e6,
            ecm,
            initial_adapt_passes: bounds.l_max() - bounds.l_min(),
        }
    }

    /// Constant ECM, outputs at 0, 2.5 and 5.
    pub fn uniform_ecm(bounds: RefinementBounds) -> Self {
        Self::base(bounds, Ecm::Uniform, 5.0, vec![0.0, 2.5, 5.0])
    }

    /// ECM from a raster, outputs at 0, 1 and 4.
    pub fn heterogeneous_ecm(bounds: RefinementBounds, raster: EcmRaster) -> Self {
        Self::base(bounds, Ecm::Heterogeneous(raster), 4.0, vec![0.0, 1.0, 4.0])
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.bounds.dim() != 2 {
            return Err(Error::Config("the invasion model is two-dimensional".into()));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.blowup_guard > 0.0) {
            return Err(Error::Config("blow-up guard must be positive".into()));
        }
        fv::check_output_times(self.t_end, &self.snapshot_times)
    }
}

/// Grid strategy for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    /// Start on `G_{l_min}` and adapt after every step.
    Adaptive,
    /// Fixed uniform grid at one level.
    Uniform(u32),
}

struct Invasion<'a> {
    params: &'a CancerParams,
    cfl: f64,
    guard: f64,
}

impl Scheme for Invasion<'_> {
    fn stable_dt(&self, matrix: &MeshMatrix, field: &Field, nb: &Neighborhood) -> Result<f64> {
        Ok(stable_dt(matrix, field, nb, self.params, self.cfl))
    }

    fn advance(&self, matrix: &MeshMatrix, field: &Field, nb: &Neighborhood, dt: f64) -> Result<Field> {
        advance(matrix, field, nb, self.params, dt, self.guard)
    }

    fn monitor(&self, matrix: &MeshMatrix, field: &Field, nb: &Neighborhood) -> MonitorResult {
        cancer_monitor(matrix, field, nb)
    }
}

pub fn run_invasion(
    matrix: &MeshMatrix,
    config: &CancerConfig,
    resolution: Resolution,
    observer: &mut dyn FnMut(&StepReport) -> Result<()>,
) -> Result<RunOutput> {
    config.validate()?;
    if matrix.bounds() != &config.bounds {
        return Err(Error::Config("matrix bounds differ from the run configuration".into()));
    }
    let scheme = Invasion {
        params: &config.params,
        cfl: config.cfl,
        guard: config.blowup_guard,
    };
    let init = |g| initial_condition(&config.ecm, matrix, g);
    let times = fv::output_times(config.t_end, &config.snapshot_times);
    match resolution {
        Resolution::Adaptive => {
            let start = Grid::uniform(matrix, config.bounds.l_min())?;
            let field = fv::adapt_initial(
                matrix,
                &scheme,
                &config.thresholds,
                config.initial_adapt_passes,
                start,
                init,
            )?;
            fv::march(matrix, &scheme, field, &times, Some(&config.thresholds), observer)
        }
        Resolution::Uniform(level) => {
            let field = init(Grid::uniform(matrix, level)?)?;
            fv::march(matrix, &scheme, field, &times, None, observer)
        }
    }
}

/// One line of the accuracy comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub setting: String,
    /// Grid cells at the comparison time.
    pub cells: usize,
    /// L1 distance of `c` from the finest uniform run.
    pub l1_error: f64,
}

/// Runs uniform grids at every level below `l_max`, the adaptive scheme,
/// and a uniform `l_max` reference up to `t_end`, and compares the cancer
/// cell densities there.
pub fn error_table(matrix: &MeshMatrix, config: &CancerConfig) -> Result<Vec<ErrorRow>> {
    let mut config = config.clone();
    config.snapshot_times.clear();
    let (l_min, l_max) = (config.bounds.l_min(), config.bounds.l_max());
    let mut settings: Vec<Resolution> = (l_min..l_max).map(Resolution::Uniform).collect();
    settings.push(Resolution::Adaptive);
    settings.push(Resolution::Uniform(l_max));
    let finals: Vec<Field> = settings
        .par_iter()
        .map(|&r| Ok(run_invasion(matrix, &config, r, &mut |_| Ok(()))?.last().clone()))
        .collect::<Result<_>>()?;
    let (reference, rest) = finals.split_last().expect("reference run");
    settings
        .iter()
        .zip(rest)
        .map(|(r, f)| {
            let setting = match r {
                Resolution::Uniform(l) => format!("uniform l={l}"),
                Resolution::Adaptive => format!("adaptive l={l_min}..{l_max}"),
            };
            Ok(ErrorRow {
                setting,
                cells: f.len(),
                l1_error: l1_distance(matrix, f, reference)?[0],
            })
        })
        .collect()
}

//! Experiment configuration and drivers that write snapshot series.
//!
//! Configuration files are flat `key = value` lines; blank lines and lines
//! starting with `#` are ignored. Keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `experiment` | `generic-m1` .. `generic-m4`, `euler` or `cancer` |
//! | `cancer_setup` | `uniform`, `heterogeneous` or `error-table` |
//! | `l_min`, `l_max`, `regularity` | refinement bounds of the 2D matrix |
//! | `theta_refine`, `theta_coarsen` | monitor thresholds |
//! | `dt` | time step of the generic experiments |
//! | `cfl` | CFL number of the solvers |
//! | `t_end` | final time |
//! | `snapshot_times` | space-separated output times |
//! | `out_dir` | output directory |
//! | `seed` | seed of the generated ECM raster |
//! | `ecm_raster` | PGM file with the initial ECM density (optional) |
//!
//! Only `experiment` is required; every other key defaults per experiment.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::adaptation::{mark, mesh_update, strong_refine, weak_coarsen, Thresholds};
use crate::cancer::{self, ecm, CancerConfig, EcmRaster, Resolution};
use crate::error::{Error, Result};
use crate::euler::{self, EulerConfig};
use crate::field::Field;
use crate::fv;
use crate::matrix::{MeshMatrix, RefinementBounds};
use crate::monitor::{MonitorResult, Synthetic};
use crate::snapshot::{self, SnapshotIndex};
use crate::topology::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CancerSetup {
    /// Constant initial ECM.
    Uniform,
    /// Initial ECM from a raster.
    Heterogeneous,
    /// Accuracy comparison of uniform and adaptive grids.
    ErrorTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Generic(Synthetic),
    Euler,
    Cancer(CancerSetup),
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Experiment::Generic(m) => write!(f, "generic-{}", format!("{m:?}").to_lowercase()),
            Experiment::Euler => f.write_str("euler"),
            Experiment::Cancer(_) => f.write_str("cancer"),
        }
    }
}

impl fmt::Display for CancerSetup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CancerSetup::Uniform => "uniform",
            CancerSetup::Heterogeneous => "heterogeneous",
            CancerSetup::ErrorTable => "error-table",
        })
    }
}

impl FromStr for CancerSetup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(CancerSetup::Uniform),
            "heterogeneous" => Ok(CancerSetup::Heterogeneous),
            "error-table" => Ok(CancerSetup::ErrorTable),
            other => Err(Error::Config(format!("unknown cancer setup '{other}'"))),
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Experiment::Euler),
            "cancer" => Ok(Experiment::Cancer(CancerSetup::Uniform)),
            other => match other.strip_prefix("generic-") {
                Some(m) => Ok(Experiment::Generic(m.parse()?)),
                None => Err(Error::Config(format!("unknown experiment '{other}'"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub l_min: u32,
    pub l_max: u32,
    pub regularity: u32,
    pub theta_refine: f64,
    pub theta_coarsen: f64,
    pub dt: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub ecm_raster: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Default settings of each experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            l_min: 3,
            l_max: 7,
            regularity: 1,
            theta_refine: 0.8,
            theta_coarsen: 0.8,
            dt: 0.005,
            cfl: 0.5,
            t_end: 1.0,
            snapshot_times: vec![0.25, 0.5, 0.75, 1.0],
            out_dir: PathBuf::from("out"),
            seed: ecm::DEFAULT_SEED,
            ecm_raster: None,
        };
        match experiment {
            Experiment::Generic(Synthetic::M1) => Self {
                l_min: 5,
                t_end: 0.8,
                snapshot_times: vec![0.4, 0.8],
                ..base
            },
            Experiment::Generic(Synthetic::M2) => base,
            Experiment::Generic(Synthetic::M3) => Self {
                theta_coarsen: 0.3,
                ..base
            },
            Experiment::Generic(Synthetic::M4) => Self {
                theta_refine: 0.5,
                theta_coarsen: 0.5,
                ..base
            },
            Experiment::Euler => Self {
                l_min: 7,
                l_max: 9,
                theta_refine: 0.4,
                theta_coarsen: 0.4,
                t_end: 0.08,
                snapshot_times: vec![0.0, 0.04, 0.08],
                ..base
            },
            Experiment::Cancer(setup) => {
                let (t_end, snapshot_times) = match setup {
                    CancerSetup::Uniform => (5.0, vec![0.0, 2.5, 5.0]),
                    CancerSetup::Heterogeneous => (4.0, vec![0.0, 1.0, 4.0]),
                    CancerSetup::ErrorTable => (2.5, vec![]),
                };
                Self {
                    l_min: 5,
                    theta_refine: 0.2,
                    theta_coarsen: 0.1,
                    t_end,
                    snapshot_times,
                    ..base
                }
            }
        }
    }

    pub fn bounds(&self) -> Result<RefinementBounds> {
        RefinementBounds::new(2, self.l_min, self.l_max, self.regularity)
    }

    pub fn thresholds(&self) -> Result<Thresholds> {
        Thresholds::new(self.theta_refine, self.theta_coarsen)
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds()?;
        self.thresholds()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        fv::check_output_times(self.t_end, &self.snapshot_times)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
        }
        match key {
            "experiment" => {
                let e: Experiment = value.parse()?;
                let same = match (e, self.experiment) {
                    (Experiment::Cancer(_), Experiment::Cancer(_)) => true,
                    (a, b) => a == b,
                };
                if !same {
                    return Err(Error::Config("experiment can only be chosen first".into()));
                }
            }
            "cancer_setup" => match &mut self.experiment {
                Experiment::Cancer(s) => *s = value.parse()?,
                _ => return Err(Error::Config("cancer_setup needs experiment = cancer".into())),
            },
            "l_min" => self.l_min = num(key, value)?,
            "l_max" => self.l_max = num(key, value)?,
            "regularity" => self.regularity = num(key, value)?,
            "theta_refine" => self.theta_refine = num(key, value)?,
            "theta_coarsen" => self.theta_coarsen = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "cfl" => self.cfl = num(key, value)?,
            "t_end" => self.t_end = num(key, value)?,
            "snapshot_times" => {
                self.snapshot_times = value
                    .split_whitespace()
                    .map(|v| num(key, v))
                    .collect::<Result<_>>()?
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = num(key, value)?,
            "ecm_raster" => self.ecm_raster = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parses a configuration file's text. Defaults come from the
    /// experiment (and cancer setup), then the other keys apply in order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if pairs.iter().any(|(seen, _)| *seen == k) {
                return Err(Error::Config(format!("line {}: duplicate key '{k}'", n + 1)));
            }
            pairs.push((k, v));
        }
        let find = |key: &str| pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let mut experiment: Experiment = find("experiment")
            .ok_or_else(|| Error::Config("missing key 'experiment'".into()))?
            .parse()?;
        if let (Experiment::Cancer(s), Some(v)) = (&mut experiment, find("cancer_setup")) {
            *s = v.parse()?;
        }
        let mut config = Self::defaults(experiment);
        for (k, v) in pairs {
            config.set(k, v)?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Text accepted by [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "experiment = {}", self.experiment).unwrap();
        if let Experiment::Cancer(setup) = self.experiment {
            writeln!(s, "cancer_setup = {setup}").unwrap();
        }
        writeln!(s, "l_min = {}", self.l_min).unwrap();
        writeln!(s, "l_max = {}", self.l_max).unwrap();
        writeln!(s, "regularity = {}", self.regularity).unwrap();
        writeln!(s, "theta_refine = {}", self.theta_refine).unwrap();
        writeln!(s, "theta_coarsen = {}", self.theta_coarsen).unwrap();
        writeln!(s, "dt = {}", self.dt).unwrap();
        writeln!(s, "cfl = {}", self.cfl).unwrap();
        writeln!(s, "t_end = {}", self.t_end).unwrap();
        let times: Vec<String> = self.snapshot_times.iter().map(f64::to_string).collect();
        writeln!(s, "snapshot_times = {}", times.join(" ")).unwrap();
        writeln!(s, "out_dir = {}", self.out_dir.display()).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        if let Some(p) = &self.ecm_raster {
            writeln!(s, "ecm_raster = {}", p.display()).unwrap();
        }
        s
    }

    /// The raster file if given, otherwise the generated default for `seed`.
    pub fn ecm(&self) -> Result<EcmRaster> {
        match &self.ecm_raster {
            Some(p) => EcmRaster::load(p),
            None if self.seed == ecm::DEFAULT_SEED => Ok(EcmRaster::default_raster()),
            None => Ok(EcmRaster::smooth_bumps(ecm::DEFAULT_SIZE, ecm::DEFAULT_BUMPS, self.seed)),
        }
    }
}

/// One stored grid of a generic run.
#[derive(Debug, Clone)]
pub struct GenericFrame {
    pub label: String,
    pub time: f64,
    pub grid: Grid,
    /// Monitor sampled on `grid` at `time`.
    pub monitor: MonitorResult,
}

#[derive(Debug, Clone)]
pub struct GenericRun {
    pub frames: Vec<GenericFrame>,
    /// Cell count after every adaptation.
    pub cell_counts: Vec<usize>,
}

/// Weak-coarsening passes after the refine-only sweep of `M1`.
pub const M1_COARSEN_PASSES: usize = 2;

/// Drives a grid with a synthetic monitor at `t_n = n dt`, `n = 0..=N`,
/// `N = round(t_end / dt)`.
///
/// `M1` only refines during the sweep and then runs two standalone
/// weak-coarsening passes at `t_end`; the other monitors refine and coarsen
/// every step. `observer` sees every new grid.
pub fn run_generic(
    matrix: &MeshMatrix,
    config: &ExperimentConfig,
    observer: &mut dyn FnMut(f64, &Grid) -> Result<()>,
) -> Result<GenericRun> {
    config.validate()?;
    let Experiment::Generic(monitor) = config.experiment else {
        return Err(Error::Config(format!("{} is not a generic experiment", config.experiment)));
    };
    let bounds = config.bounds()?;
    if matrix.bounds() != &bounds {
        return Err(Error::Config("matrix bounds differ from the run configuration".into()));
    }
    let thresholds = config.thresholds()?;
    let refine_only = monitor == Synthetic::M1;
    let steps = (config.t_end / config.dt).round() as usize;
    let mut grid = Grid::uniform(matrix, bounds.l_min())?;
    let mut frames = Vec::new();
    let mut cell_counts = Vec::with_capacity(steps + 1);
    let mut pending = config.snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    let mut pending = pending.into_iter().peekable();
    for n in 0..=steps {
        let t = n as f64 * config.dt;
        let m = monitor.sample(matrix, &grid, t);
        grid = if refine_only {
            strong_refine(matrix, &grid, &mark(matrix, &grid, &m, &thresholds).refine)?.0
        } else {
            mesh_update(matrix, &grid, &m, &thresholds)?.grid
        };
        observer(t, &grid)?;
        cell_counts.push(grid.len());
        while pending.peek().is_some_and(|&s| s <= t + 0.5 * config.dt) {
            pending.next();
            frames.push(GenericFrame {
                label: format!("t={t}"),
                time: t,
                monitor: monitor.sample(matrix, &grid, t),
                grid: grid.clone(),
            });
        }
    }
    if refine_only {
        let t = steps as f64 * config.dt;
        for pass in 1..=M1_COARSEN_PASSES {
            let m = monitor.sample(matrix, &grid, t);
            grid = weak_coarsen(matrix, &grid, &mark(matrix, &grid, &m, &thresholds).coarsen)?.0;
            observer(t, &grid)?;
            cell_counts.push(grid.len());
            frames.push(GenericFrame {
                label: format!("t={t}+coarsen{pass}"),
                time: t,
                monitor: monitor.sample(matrix, &grid, t),
                grid: grid.clone(),
            });
        }
    }
    Ok(GenericRun {
        frames,
        cell_counts,
    })
}

/// What a run wrote.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub steps: usize,
    /// Human-readable result lines.
    pub report: Vec<String>,
}

fn snapshot_path(dir: &Path, prefix: &str, n: usize) -> PathBuf {
    dir.join(format!("{prefix}_{n:03}.csv"))
}

fn write_fields(
    matrix: &MeshMatrix,
    dir: &Path,
    prefix: &str,
    snapshots: &[(f64, Field)],
    names: &[&str],
    convert: impl Fn(&Field) -> Result<Field>,
    summary: &mut RunSummary,
) -> Result<()> {
    let mut index = SnapshotIndex::new();
    for (n, (t, f)) in snapshots.iter().enumerate() {
        let path = snapshot_path(dir, prefix, n);
        snapshot::write_field(matrix, &convert(f)?, names, &path)?;
        index.push(&path, t, f.len());
        summary.report.push(format!("t = {t}: {} cells -> {}", f.len(), path.display()));
        summary.files.push(path);
    }
    summary.files.push(index.write(dir)?);
    Ok(())
}

/// Runs the configured experiment and writes its snapshots, an
/// `index.csv` and the effective `config.txt` into `out_dir`.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let bounds = config.bounds()?;
    let dir = config.out_dir.as_path();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let config_path = dir.join("config.txt");
    std::fs::write(&config_path, config.to_text()).map_err(|e| Error::io(&config_path, e))?;
    let matrix = MeshMatrix::build(bounds)?;
    let mut summary = RunSummary {
        files: vec![config_path],
        ..Default::default()
    };
    match config.experiment {
        Experiment::Generic(_) => {
            let out = run_generic(&matrix, config, &mut |_, _| Ok(()))?;
            let mut index = SnapshotIndex::new();
            for (n, f) in out.frames.iter().enumerate() {
                let path = snapshot_path(dir, "grid", n);
                snapshot::write_monitor(&matrix, &f.grid, &f.monitor, &path)?;
                index.push(&path, &f.label, f.grid.len());
                summary.report.push(format!("{}: {} cells -> {}", f.label, f.grid.len(), path.display()));
                summary.files.push(path);
            }
            summary.files.push(index.write(dir)?);
            summary.steps = out.cell_counts.len();
        }
        Experiment::Euler => {
            let ec = EulerConfig {
                cfl: config.cfl,
                thresholds: config.thresholds()?,
                t_end: config.t_end,
                snapshot_times: config.snapshot_times.clone(),
                ..EulerConfig::explosion(bounds)
            };
            let out = euler::run_explosion(&matrix, &ec, &mut |_| Ok(()))?;
            summary.steps = out.steps;
            let names = ["rho", "mom_x", "mom_y", "E", "p"];
            write_fields(&matrix, dir, "euler", &out.snapshots, &names, |f| euler::with_pressure(f, ec.gamma), &mut summary)?;
        }
        Experiment::Cancer(setup) => {
            let base = match setup {
                CancerSetup::Heterogeneous => CancerConfig::heterogeneous_ecm(bounds, config.ecm()?),
                _ => CancerConfig::uniform_ecm(bounds),
            };
            let cc = CancerConfig {
                cfl: config.cfl,
                thresholds: config.thresholds()?,
                t_end: config.t_end,
                snapshot_times: config.snapshot_times.clone(),
                ..base
            };
            if setup == CancerSetup::ErrorTable {
                let rows = cancer::error_table(&matrix, &cc)?;
                let mut text = String::from("setting,cells,l1_error\n");
                for r in &rows {
                    writeln!(text, "{},{},{:e}", r.setting, r.cells, r.l1_error).unwrap();
                    summary.report.push(format!("{:<16} {:>6} cells  L1 {:.4e}", r.setting, r.cells, r.l1_error));
                }
                let path = dir.join("error_table.csv");
                std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                summary.files.push(path);
            } else {
                let out = cancer::run_invasion(&matrix, &cc, Resolution::Adaptive, &mut |_| Ok(()))?;
                summary.steps = out.steps;
                write_fields(&matrix, dir, "cancer", &out.snapshots, &cancer::NAMES, |f| Ok(f.clone()), &mut summary)?;
            }
        }
    }
    Ok(summary)
}

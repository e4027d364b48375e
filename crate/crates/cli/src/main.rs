#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dyadic_amr::experiments::{self, CancerSetup, Experiment, ExperimentConfig};
use dyadic_amr::fv;
use dyadic_amr::matrix::{entry_count_and_memory, Layout, MeshMatrix, RefinementBounds};
use dyadic_amr::monitor::Synthetic;
use dyadic_amr::Error;

/// Dyadic adaptive meshes: generic monitor runs, Euler explosion, cancer
/// invasion, and mesh-matrix statistics.
#[derive(Parser)]
#[command(name = "dyadic-amr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adapt a grid to a synthetic moving monitor.
    Generic {
        #[arg(long, value_enum, default_value = "m1")]
        monitor: MonitorArg,
        /// Time step between adaptations.
        #[arg(long)]
        dt: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// 2D Euler explosion.
    Euler {
        #[arg(long)]
        cfl: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Cancer invasion of the extracellular matrix.
    Cancer {
        /// Setup to run [default: uniform, or the config file's].
        #[arg(long, value_enum)]
        experiment: Option<SetupArg>,
        /// PGM raster with the initial ECM density (heterogeneous setup).
        #[arg(long)]
        ecm_raster: Option<PathBuf>,
        /// Seed of the generated ECM raster when no file is given.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        cfl: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Print mesh-matrix statistics and memory accounting.
    Inspect {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        lmin: u32,
        #[arg(long, default_value_t = 5)]
        lmax: u32,
        #[arg(long, default_value_t = 1)]
        mr: u32,
        /// Write the matrix in binary form to this file.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Key-value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lmin: Option<u32>,
    #[arg(long)]
    lmax: Option<u32>,
    /// Mesh regularity: largest level jump between neighbors.
    #[arg(long)]
    mr: Option<u32>,
    #[arg(long)]
    theta_refine: Option<f64>,
    #[arg(long)]
    theta_coarsen: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Write snapshots every this much simulated time instead of the defaults.
    #[arg(long)]
    snapshot_every: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MonitorArg {
    M1,
    M2,
    M3,
    M4,
}

#[derive(Clone, Copy, ValueEnum)]
enum SetupArg {
    Uniform,
    Heterogeneous,
    ErrorTable,
}

impl Common {
    fn resolve(&self, experiment: Experiment) -> dyadic_amr::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let c = ExperimentConfig::load(path)?;
                let same = match (c.experiment, experiment) {
                    (Experiment::Cancer(_), Experiment::Cancer(_)) => true,
                    (a, b) => a == b,
                };
                if !same {
                    return Err(Error::Config(format!(
                        "{} configures '{}', not '{experiment}'",
                        path.display(),
                        c.experiment
                    )));
                }
                c
            }
            None => ExperimentConfig::defaults(experiment),
        };
        if let Some(v) = self.lmin {
            c.l_min = v;
        }
        if let Some(v) = self.lmax {
            c.l_max = v;
        }
        if let Some(v) = self.mr {
            c.regularity = v;
        }
        if let Some(v) = self.theta_refine {
            c.theta_refine = v;
        }
        if let Some(v) = self.theta_coarsen {
            c.theta_coarsen = v;
        }
        if let Some(v) = self.t_end {
            c.t_end = v;
            c.snapshot_times.retain(|&t| t <= v);
        }
        if let Some(every) = self.snapshot_every {
            if !(every > 0.0) {
                return Err(Error::Config(format!("--snapshot-every must be positive, got {every}")));
            }
            c.snapshot_times = fv::snapshot_times(c.t_end, every);
        }
        if let Some(v) = &self.out_dir {
            c.out_dir = v.clone();
        }
        Ok(c)
    }
}

fn inspect(dim: usize, lmin: u32, lmax: u32, mr: u32, dump: Option<PathBuf>) -> dyadic_amr::Result<()> {
    let bounds = RefinementBounds::new(dim, lmin, lmax, mr)?;
    println!("dimension        {dim}");
    println!("levels           {lmin}..={lmax}");
    println!("regularity       {mr}");
    println!("columns          {}", bounds.columns());
    for l in lmin..=lmax {
        println!("  level {l:>2}: {} cells", bounds.cells_at(l));
    }
    println!("lines            {}", bounds.total_lines());
    for (name, layout) in [
        ("full", Layout::Full),
        ("without edge columns", Layout::NoEdgeColumns),
        ("without k, l columns", Layout::NoKlColumns),
    ] {
        let m = entry_count_and_memory(&bounds, layout);
        println!(
            "{name:<22} {:>12} entries {:>14} bytes (~{} KB, ~{} MB)",
            m.entries,
            m.bytes,
            m.approx_kb(),
            m.approx_mb()
        );
    }
    if let Some(path) = dump {
        let matrix = MeshMatrix::build(bounds)?;
        matrix.dump_to_file(&path)?;
        println!("matrix written to {}", path.display());
    }
    Ok(())
}

fn execute(cli: Cli) -> dyadic_amr::Result<()> {
    let config = match cli.command {
        Command::Inspect {
            dim,
            lmin,
            lmax,
            mr,
            dump,
        } => return inspect(dim, lmin, lmax, mr, dump),
        Command::Generic {
            monitor,
            dt,
            common,
        } => {
            let m = match monitor {
                MonitorArg::M1 => Synthetic::M1,
                MonitorArg::M2 => Synthetic::M2,
                MonitorArg::M3 => Synthetic::M3,
                MonitorArg::M4 => Synthetic::M4,
            };
            let mut c = common.resolve(Experiment::Generic(m))?;
            if let Some(dt) = dt {
                c.dt = dt;
            }
            c
        }
        Command::Euler { cfl, common } => {
            let mut c = common.resolve(Experiment::Euler)?;
            if let Some(cfl) = cfl {
                c.cfl = cfl;
            }
            c
        }
        Command::Cancer {
            experiment,
            ecm_raster,
            seed,
            cfl,
            common,
        } => {
            let setup = experiment.map(|e| match e {
                SetupArg::Uniform => CancerSetup::Uniform,
                SetupArg::Heterogeneous => CancerSetup::Heterogeneous,
                SetupArg::ErrorTable => CancerSetup::ErrorTable,
            });
            let mut c = common.resolve(Experiment::Cancer(setup.unwrap_or(CancerSetup::Uniform)))?;
            if let Some(s) = setup {
                c.experiment = Experiment::Cancer(s);
            }
            if ecm_raster.is_some() {
                c.ecm_raster = ecm_raster;
            }
            if let Some(s) = seed {
                c.seed = s;
            }
            if let Some(cfl) = cfl {
                c.cfl = cfl;
            }
            c
        }
    };
    let summary = experiments::run(&config)?;
    for line in &summary.report {
        println!("{line}");
    }
    println!("{} steps, output in {}", summary.steps, config.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

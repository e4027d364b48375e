//! Monitor functions driving refinement and coarsening.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::Error;
use crate::matrix::MeshMatrix;
use crate::par::*;
use crate::topology::{Grid, Neighborhood};

/// Per-cell monitor values aligned with a grid's cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorResult {
    values: Vec<f64>,
}

impl MonitorResult {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The synthetic time-dependent monitors used to exercise the adaptation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Synthetic {
    /// Gaussian moving along the diagonal from (0.1, 0.1).
    M1,
    /// Gaussian on a quarter circle of radius 0.9 from (0.9, 0) to (0, 0.9).
    M2,
    /// M2 plus a second Gaussian on the same circle starting at angle pi;
    /// the two meet at (0, 0.9) at t = 1.
    M3,
    /// Indicator of a growing annulus around the origin.
    M4,
}

impl Synthetic {
    pub fn value(self, x: [f64; 2], t: f64) -> f64 {
        match self {
            Synthetic::M1 => gaussian(x, [0.1 + t, 0.1 + t]),
            Synthetic::M2 => {
                let a = 0.5 * PI * t;
                gaussian(x, [0.9 * a.cos(), 0.9 * a.sin()])
            }
            Synthetic::M3 => {
                let a = PI * (1.0 - 0.5 * t);
                gaussian(x, [0.9 * a.cos(), 0.9 * a.sin()]) + Synthetic::M2.value(x, t)
            }
            Synthetic::M4 => {
                let r = x[0].hypot(x[1]);
                if 0.07 + 0.5 * t < r && r < 0.1 + 0.5 * t {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Evaluates the monitor at every cell center of a 2D grid.
    pub fn sample(self, matrix: &MeshMatrix, grid: &Grid, t: f64) -> MonitorResult {
        let values = grid
            .cells()
            .par_iter()
            .map(|&c| {
                let g = matrix.geometry(c);
                self.value([g.x(), g.y()], t)
            })
            .collect();
        MonitorResult::new(values)
    }
}

impl FromStr for Synthetic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(Synthetic::M1),
            "m2" => Ok(Synthetic::M2),
            "m3" => Ok(Synthetic::M3),
            "m4" => Ok(Synthetic::M4),
            other => Err(Error::Config(format!("unknown monitor '{other}'"))),
        }
    }
}

fn gaussian(x: [f64; 2], center: [f64; 2]) -> f64 {
    let dx = x[0] - center[0];
    let dy = x[1] - center[1];
    (-100.0 * (dx * dx + dy * dy)).exp()
}

/// Normalized discrete gradient of a per-cell scalar:
/// `g_i = max_j |q_j - q_i| / |M_i - M_j|` over grid neighbors, divided by
/// `max_i g_i`. A constant field gives all zeros.
pub fn gradient_monitor(
    matrix: &MeshMatrix,
    grid: &Grid,
    neighborhood: &Neighborhood,
    quantity: &[f64],
) -> MonitorResult {
    let mut g = gradient_magnitudes(matrix, grid, neighborhood, quantity);
    let max = g.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        g.par_iter_mut().for_each(|v| *v /= max);
    }
    MonitorResult::new(g)
}

/// Unnormalized `g_i` of [`gradient_monitor`].
pub fn gradient_magnitudes(
    matrix: &MeshMatrix,
    grid: &Grid,
    neighborhood: &Neighborhood,
    quantity: &[f64],
) -> Vec<f64> {
    let cells = grid.cells();
    (0..cells.len())
        .into_par_iter()
        .map(|i| {
            let gi = matrix.geometry(cells[i]);
            neighborhood
                .of(i)
                .iter()
                .map(|n| {
                    let gj = matrix.geometry(cells[n.index]);
                    (quantity[n.index] - quantity[i]).abs() / gi.distance(&gj)
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

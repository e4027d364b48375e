//! Bookkeeping for dyadic rectangular adaptive meshes.
//!
//! All cells of all uniform dyadic grids between a minimum and a maximum
//! refinement level are precomputed into a [`MeshMatrix`]; a [`Grid`] is then
//! just a list of matrix lines. On top of that sit monitor-driven adaptation
//! ([`adaptation`]), finite-volume fields and their transfer between grids
//! ([`field`]), and two explicit solvers: 2D Euler ([`euler`]) and a
//! haptotaxis cancer-invasion model ([`cancer`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptation;
pub mod cancer;
pub mod error;
pub mod euler;
pub mod experiments;
pub mod field;
pub mod fv;
pub mod matrix;
pub mod monitor;
pub mod par;
pub mod snapshot;
pub mod topology;

pub use error::{Error, Result};
pub use field::Field;
pub use matrix::{CellGeometry, CellId, Layout, MeshMatrix, RefinementBounds};
pub use topology::{Direction, Grid, Neighbor, Neighborhood};

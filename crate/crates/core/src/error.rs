use std::path::PathBuf;

use crate::matrix::CellId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid refinement bounds: {0}")]
    InvalidBounds(String),

    #[error("mesh matrix too large: {0}")]
    CapacityOverflow(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("cell {0} is on the minimum level and has no mother")]
    NoMother(CellId),

    #[error("inconsistent grid: {0}")]
    InconsistentGrid(String),

    #[error("grids are not related by refinement/coarsening: {0}")]
    GridMismatch(String),

    #[error("non-physical state in cell {cell}: {reason}")]
    NonPhysicalState { cell: CellId, reason: String },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("solution blew up in cell {cell}: value {value} exceeds guard {guard}")]
    Instability { cell: CellId, value: f64, guard: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid ECM raster: {0}")]
    Raster(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Errors raised by the numerics rather than by the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonPhysicalState { .. }
                | Error::Instability { .. }
                | Error::InconsistentGrid(_)
                | Error::GridMismatch(_)
                | Error::DegenerateGeometry(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

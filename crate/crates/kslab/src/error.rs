//! Error type shared by every module of the crate.

use crate::grid::Grid2D;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, KsError>;

/// Everything that can go wrong across the field, solver, estimate and
/// profile layers. Variants carry enough context to act on: the Picard
/// variant names the measured expansion ratio and a workable relaxation
/// time, resolution failures name the offending atom.
#[derive(Debug, thiserror::Error)]
pub enum KsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {expected} vs {found}")]
    GridMismatch { expected: Grid2D, found: Grid2D },

    #[error(
        "atom {index} has width {width} below the resolvable minimum {min_width} \
         (2 grid spacings)"
    )]
    UnresolvedAtom {
        index: usize,
        width: f64,
        min_width: f64,
    },

    #[error("atom {index} at ({x}, {y}) lies outside the box [-{half}, {half})^2")]
    AtomOutsideBox {
        index: usize,
        x: f64,
        y: f64,
        half: f64,
    },

    #[error("non-finite value encountered in {0}")]
    NotFinite(String),

    #[error(
        "Picard iteration is not a contraction: successive differences grew by \
         factor {ratio:.3} for three consecutive steps; retry with tau >= {suggested_tau:.3e}"
    )]
    NonContraction { ratio: f64, suggested_tau: f64 },

    #[error(
        "time step underflow at t = {t:.6e}: repeated rejections pushed dt to {dt:.3e}, \
         below the configured minimum"
    )]
    StepUnderflow { t: f64, dt: f64 },

    #[error("profile integration failed at xi = {xi:.6e}: {reason}")]
    OdeFailure { xi: f64, reason: String },

    #[error("radial range too short: need xi_max >= {needed:.3}, profile stops at {available:.3}")]
    RangeTooShort { needed: f64, available: f64 },

    #[error("expected strictly increasing values: {0}")]
    NotMonotone(String),

    #[error("{path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

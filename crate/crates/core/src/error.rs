use num_complex::Complex64;
use thiserror::Error;

use crate::lattice::Domain;

#[derive(Debug, Error)]
pub enum LapError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite sample {value} at {coord:?}")]
    NonFiniteSample { coord: Vec<f64>, value: Complex64 },

    #[error("expected a {expected:?} field, got {found:?}")]
    WrongDomain { expected: Domain, found: Domain },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite symbol value at frequency {0:?}")]
    NonFiniteSymbol(Vec<f64>),

    #[error("z = {z} is within {distance:e} of the spectrum of P_m")]
    OnSpectrum { z: Complex64, distance: f64 },

    #[error(
        "cutoff shell for lambda = {lambda} spans {resolved:.2} lattice frequencies radially \
         (need 8); use half_width >= {required_half_width:.3} with points_per_axis >= {required_points}"
    )]
    UnresolvedShell {
        lambda: f64,
        resolved: f64,
        required_half_width: f64,
        required_points: usize,
    },

    #[error("lambda = {lambda} outside [{lo}, {hi}]")]
    LambdaOutOfRange { lambda: f64, lo: f64, hi: f64 },

    #[error("insufficient angular resolution: estimated error {estimate:e} > {tol:e}")]
    AngularResolution { estimate: f64, tol: f64 },

    #[error("insufficient resolution in {what}: estimated error {estimate:e} > {tol:e}")]
    Resolution { what: String, estimate: f64, tol: f64 },

    #[error("graph chart undefined: |xi'| = {norm} >= r = {radius}")]
    OutsideChart { norm: f64, radius: f64 },

    #[error("witness does not split the field: defect {0:e}")]
    WitnessMismatch(f64),

    #[error("box cannot host the requested sets: need measure {needed}, box has {available}")]
    BoxTooSmall { needed: f64, available: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, LapError>;

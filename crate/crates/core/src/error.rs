//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by the resolvent machinery.
#[derive(Debug, Error)]
pub enum Error {
    /// The particle system violates `n ≥ 2`, `m_i > 0`, `g ≠ 0` or a length constraint.
    #[error("invalid system specification: {0}")]
    InvalidSpec(String),
    /// A field or point does not have the dimension the operation expects.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    /// Grid parameters are unusable (non power-of-two points, non-positive box, ...).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    /// The scaled bump `V_ε` does not fit into half the periodic box.
    #[error("scaled potential support {support} does not fit into half the box ({half_box})")]
    PotentialOverflowsBox { support: f64, half_box: f64 },
    /// The grid has too few points across the scaled bump support.
    #[error("bump under-resolved: {points:.2} grid points across the scaled support, need at least {required}")]
    UnresolvedBump { points: f64, required: usize },
    /// A dilation would push the support of a field outside the box.
    #[error("dilated support radius {radius} escapes the half box {half_box}")]
    SupportEscapesBox { radius: f64, half_box: f64 },
    /// An iterative method failed to reach its tolerance.
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    /// The spectral parameter sits (numerically) on the spectrum.
    #[error("shift {re}{im:+}i is too close to the spectrum")]
    ShiftTooCloseToSpectrum { re: f64, im: f64 },
    /// Green's functions in dimension ≥ 2 (≥ 3 for closed forms) are singular at the origin.
    #[error("Green's function in dimension {dim} is singular at the origin")]
    SingularAtOrigin { dim: usize },
    /// A Green's function dimension outside the supported set.
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    /// The spectral parameter is not below the sufficient threshold `z₀`.
    #[error("z = {z} is not below the threshold z0 = {z0}")]
    AboveThreshold { z: f64, z0: f64 },
    /// A Neumann series was requested with a contraction ratio ≥ 1.
    #[error("Neumann series diverging (measured ratio {ratio})")]
    SeriesDiverging { ratio: f64 },
    /// An off-diagonal block was requested on the diagonal.
    #[error("off-diagonal block requested with sigma == nu")]
    SameBlockRequested,
    /// An explicit kernel was requested for an unsupported pair geometry.
    #[error("unsupported block geometry: {0}")]
    UnsupportedGeometry(String),
    /// Adaptive quadrature failed to reach its target.
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    /// Malformed configuration file or value.
    #[error("configuration error: {0}")]
    Config(String),
    /// Malformed binary field container.
    #[error("format error: {0}")]
    Format(String),
    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

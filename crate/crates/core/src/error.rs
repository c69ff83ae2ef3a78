use thiserror::Error;

/// Errors reported by the core library.
///
/// Grid locations are reported 1-based, `(r, s, t)` with `r` along x₁.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid axis {axis} has {len} samples; at least 3 are required")]
    GridTooSmall { axis: char, len: usize },
    #[error("non-finite value at (r={r}, s={s}, t={t})")]
    NonFinite { r: usize, s: usize, t: usize },
    #[error("data length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("frame sizes differ: {a_width}x{a_height} vs {b_width}x{b_height}")]
    SizeMismatch {
        a_width: usize,
        a_height: usize,
        b_width: usize,
        b_height: usize,
    },
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("argument must be non-negative, got {0}")]
    NegativeArgument(f64),
    #[error("iteration diverged (non-finite iterate) at sweep {iteration}")]
    Divergence { iteration: usize },
    #[error("closed form is singular at x = {x}, t = {t}")]
    Singularity { x: f64, t: f64 },
    #[error("coefficient integrand is not integrable ({0})")]
    NonIntegrable(&'static str),
    #[error("normal equations are not positive definite (pivot {pivot})")]
    SingularSystem { pivot: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

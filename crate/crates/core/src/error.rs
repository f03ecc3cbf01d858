//! Error type shared by all modules.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A term exponent left the f64 range; the caller should switch to
    /// log-space evaluation.
    #[error("overflow: {0}")]
    Overflow(String),

    /// f vanished where a nonzero value was required.
    #[error("function value is zero at {0}")]
    ZeroValue(Complex64),

    /// f' vanished on a sampled point of a box where it must not.
    #[error("derivative is zero at {0}")]
    DerivativeZero(Complex64),

    /// M(R, f) <= R, so the maximum-modulus iteration does not expand.
    #[error("maximum modulus does not expand at R = {0}")]
    NotExpanding(f64),

    /// mu_eps(r) <= r somewhere on the sampled range.
    #[error("mu_eps(r) <= r at r = {0}")]
    MuNotExpanding(f64),

    /// No admissible cut index for some vertex of the truncated polygon.
    #[error("nu = {nu} too small: no admissible cut for vertex {vertex}")]
    NuTooSmall { nu: f64, vertex: usize },

    /// Parameter search could not satisfy a named condition.
    #[error("parameter search failed: {0}")]
    ParamSearchFailed(String),

    /// A box handed to the image-frame computation is not inside a sector.
    #[error("box {0:?} is not contained in a sector component")]
    BoxNotInSector((i64, i64)),

    /// The sampling window for a verifier is empty.
    #[error("empty sampling window: {0}")]
    WindowEmpty(String),

    /// Accumulated-argument winding did not stabilise under refinement.
    #[error("winding number did not stabilise (last estimates {0} and {1})")]
    WindingUnstable(i64, i64),

    /// A search exhausted its ceiling without success.
    #[error("not found: {0}")]
    NotFound(String),

    /// An explicit precondition of an operation was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

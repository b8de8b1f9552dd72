//! Crate-wide error type.

use crate::scattering::ExponentVariant;
use crate::model::TimeVar;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mode k = 0 carries no coupling coefficient")]
    ZeroMode,

    #[error("velocity factor undefined at (k, eta) = (0, 0)")]
    ZeroFrequency,

    #[error("time variable mismatch: expected {expected:?}, got {found:?}")]
    TimeVarMismatch { expected: TimeVar, found: TimeVar },

    #[error("step size underflow at tau = {tau:.6e} (h = {h:.3e}); tolerances too tight for this interval")]
    StepSizeUnderflow { tau: f64, h: f64 },

    #[error("non-finite state detected at tau = {0:.6e}")]
    NonFiniteState(f64),

    #[error("path enumeration would produce {count} paths, above the cap {cap}")]
    PathCountExceeded { count: u128, cap: u64 },

    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    #[error("Duhamel majorant divergent (ratio {ratio:.4} >= 1); interval too long for the path-sum oracle")]
    MajorantDivergent { ratio: f64 },

    #[error("gamma function pole at x = {0}")]
    GammaPole(f64),

    #[error("2F1 evaluation outside implemented domain: {0}")]
    Hypergeometric(String),

    #[error("exponents undefined for {variant:?}: c = {c} at or above threshold {threshold}")]
    ExponentThreshold {
        c: f64,
        threshold: f64,
        variant: ExponentVariant,
    },

    #[error("singular basis matrix: {0}")]
    SingularBasis(String),

    #[error("degenerate fit input: {0}")]
    DegenerateFit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

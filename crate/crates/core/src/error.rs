use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the model-space machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("alpha not in Omega_+: {0} ({1})")]
    Domain(Complex64, &'static str),
    #[error("evaluation at {0} hits a pole")]
    Pole(Complex64),
    #[error("pole on or next to the boundary near {0}")]
    PoleOnBoundary(Complex64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular Moebius map (ad - bc = 0)")]
    SingularMobius,
    #[error("constant factor is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("Potapov direction vector is zero")]
    ZeroVector,
    #[error("rank deficiency: {0}")]
    RankDeficiency(String),
    #[error("function is not in the model space (residual {0:.3e})")]
    NotInSpace(f64),
    #[error("limit at infinity diverges (leading coefficient {0:.3e})")]
    LimitDiverged(f64),
    #[error("strict-contraction branch but every singular value of Theta(alpha) equals 1")]
    AllUnitSingularValues,
    #[error("weight E_+ is singular at boundary node {0}")]
    SingularWeight(Complex64),
    #[error("E_+ is not invertible at {0}: {1}")]
    SingularEPlus(Complex64, String),
    #[error("not an inner function: {0}")]
    NotInner(String),
    #[error("polynomial degree {0} exceeds cap {1}")]
    DegreeCap(usize, usize),
    #[error("quadrature did not converge below N = {0}")]
    NoConvergence(usize),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

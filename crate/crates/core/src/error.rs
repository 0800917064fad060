use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no observed endpoint selected")]
    EmptyObservation,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("signals live on different time grids")]
    GridMismatch,

    #[error("time grid too coarse: {steps} steps, at least {required} required")]
    GridTooCoarse { steps: usize, required: usize },

    #[error("modulation vanishes at t = 0 (|sigma(0)| = {0:e})")]
    VanishingModulation(f64),

    #[error("sampled memory kernel has no declared value at t = 0")]
    MissingKernelOrigin,

    #[error("mode {0} has a zero branch value")]
    ZeroBranch(i64),

    #[error("implicit step is singular for mu = {0}")]
    SingularStep(f64),

    #[error("singular Gram matrix: min eigenvalue {min:e}, max eigenvalue {max:e}")]
    SingularGram { min: f64, max: f64 },

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("all coefficients are zero")]
    DegenerateCoefficients,

    #[error("number of trials must be at least 1")]
    NoTrials,

    #[error("noise level must be nonnegative, got {0}")]
    NegativeNoise(f64),

    #[error("truncation mismatch: kernels carry {kernels} modes, model carries {model}")]
    TruncationMismatch { kernels: usize, model: usize },
}

use std::io;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time {t} µs outside envelope domain [0, {duration}] µs")]
    OutsideDomain { t: f64, duration: f64 },

    #[error("expected {expected} coefficients, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error(
        "coefficients violate the endpoint constraints: residuals ({odd:.3e}, {even:.3e}) exceed {tolerance:.1e}"
    )]
    ConstraintViolation { odd: f64, even: f64, tolerance: f64 },

    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error(
        "norm drift {drift:.3e} exceeds ceiling {ceiling:.1e} at {steps} steps per pair; \
         increase steps_per_pair to at least {suggested_steps}"
    )]
    NormDrift {
        drift: f64,
        ceiling: f64,
        steps: usize,
        suggested_steps: usize,
    },

    #[error("propagation failed at detuning {delta} rad/µs: {source}")]
    Propagation {
        delta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("no plateau: F(0) = {f0} is below threshold {threshold}")]
    NoPlateau { f0: f64, threshold: f64 },

    #[error("sample rate {rate} /µs does not exceed twice the highest tone {max_freq} MHz")]
    Aliasing { rate: f64, max_freq: f64 },

    #[error("malformed waveform data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

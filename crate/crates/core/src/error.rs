use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A matrix or trace does not conform to the expected shape.
    #[error("matrix `{matrix}` has shape {found:?}, expected {expected:?}")]
    Dimension { matrix: String, expected: (usize, usize), found: (usize, usize) },

    #[error("{0}: non-finite entry")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("evaluation point {z_re}{z_im:+}i lies within pole tolerance of eigenvalue {pole_re}{pole_im:+}i")]
    PoleProximity { z_re: f64, z_im: f64, pole_re: f64, pole_im: f64 },

    #[error("matrix has full column rank at the requested point; no null space")]
    NoNullSpace,

    #[error("channel {channel} out of range (m = {m})")]
    InvalidChannel { channel: usize, m: usize },

    #[error("invalid attack support {support:?}: {reason}")]
    InvalidSupport { support: Vec<usize>, reason: String },

    #[error("{0}")]
    Contract(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("determinant interpolation failed ({0}); retry with a different node radius or seed")]
    Interpolation(String),

    #[error("impulse response truncation length {given} too short, need at least {required}")]
    TruncationTooShort { given: usize, required: usize },

    #[error("subsystem on support {support:?} is not left invertible")]
    NotLeftInvertible { support: Vec<usize> },

    #[error("state became non-finite at sample {k}")]
    Overflow { k: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl Error {
    /// Whether the error stems from a numerical breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Interpolation(_) | Error::Numeric(_) | Error::Overflow { .. })
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unknown atom `{0}`")]
    UnknownAtom(String),

    #[error("atom `{0}` is already present")]
    DuplicateAtom(String),

    #[error("matrix is not unitary (max |U^dag U - I| = {deviation:.3e})")]
    NonUnitary { deviation: f64 },

    #[error("{0}")]
    Usage(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("input not normalized (norm^2 = {norm_sqr:.15})")]
    NotNormalized { norm_sqr: f64 },

    #[error("truncation: {what} = {mass:.3e} exceeds tolerance {tol:.3e}")]
    Truncation {
        what: &'static str,
        mass: f64,
        tol: f64,
    },

    #[error("impossible post-selection: {atom} in `{level}` has probability {probability:.3e}")]
    ImpossiblePostselection {
        atom: String,
        level: String,
        probability: f64,
    },

    #[error("protocol aborted: probe atom not detected in e (probability {probability:.3e})")]
    ProtocolAbort { probability: f64 },

    #[error("degenerate state norm {0:.3e}")]
    DegenerateNorm(f64),

    #[error("subsystem `{0}` is entangled with the rest of the state (residual {1:.3e})")]
    NotSeparable(String, f64),

    #[error("dense operator dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("{line}:{col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },

    #[error("line {line}: {source}")]
    Runtime { line: usize, source: Box<Error> },
}

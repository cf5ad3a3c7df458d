use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The inverse transform produced an imaginary residue above tolerance,
    /// which means the input modes were not conjugate symmetric.
    #[error("inverse DFT is not real: imaginary residue {residue:e} exceeds {bound:e}")]
    NonRealResult { residue: f64, bound: f64 },

    #[error("kernel table failed its symmetry check: {0}")]
    KernelSymmetry(String),

    #[error("leapfrog unstable: energy drifted from {initial} to {current} at step {step}")]
    UnstableStep {
        step: usize,
        initial: f64,
        current: f64,
    },

    #[error("every branch was annihilated by the ladder operator")]
    AnnihilatedState,

    #[error("ladder operator dropped {dropped} branch(es) in strict mode")]
    DroppedBranch { dropped: usize },

    #[error("invalid matter state: {0}")]
    InvalidMatter(String),

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("final state does not factorize: {0}")]
    NotSeparable(String),

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

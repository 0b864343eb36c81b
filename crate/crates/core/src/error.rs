use thiserror::Error;

/// Errors raised by the simulator, the limit solvers and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range 1..={len}")]
    Range { index: u64, len: u64 },

    #[error("moment order {0} exceeds the supported maximum of 5")]
    MomentOrder(u32),

    #[error("cannot sample: {0}")]
    Sampling(String),

    #[error("infeasible draw: {0}")]
    InfeasibleDraw(String),

    #[error("state corruption: {0}")]
    StateCorruption(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("singular generating function: {0}")]
    Singularity(String),

    #[error("solver diagnostic: {0}")]
    SolverDiagnostic(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("replica (n={n}, rep={rep}) failed: {source}")]
    Replica {
        n: usize,
        rep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by invalid user input rather than by a failure at run time.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Config(_) | Error::MomentOrder(_) => true,
            Error::Replica { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

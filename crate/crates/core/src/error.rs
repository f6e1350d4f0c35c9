use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("configuration has {got} spins, model has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },

    #[error("models live on different hardware graphs")]
    GraphMismatch,

    #[error("spin value {0} is not +1 or -1")]
    InvalidSpin(i8),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("invalid encoding: {0}")]
    InvalidEncoding(String),

    #[error("instance with {vertices} vertices exceeds the brute-force limit of {limit}")]
    TooLarge { vertices: usize, limit: usize },

    #[error("elimination order has frontier width {width}, limit is {limit}")]
    FrontierTooWide { width: usize, limit: usize },

    #[error("invalid elimination order: {0}")]
    InvalidOrder(String),

    #[error("all exact solvers refused the instance: {0}")]
    NoSolver(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("audit re-solve disagreed on {mismatches} of {checked} trials")]
    AuditFailed { checked: usize, mismatches: usize },

    #[error("no failing seed in {scanned} seeds starting at {first}")]
    SearchExhausted { first: u64, scanned: u64 },

    #[error("WCNF parse error at line {line}: {msg}")]
    Wcnf { line: usize, msg: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Refusals are capability limits of a solver rather than bad input.
    pub fn is_refusal(&self) -> bool {
        match self {
            Error::TooLarge { .. } | Error::FrontierTooWide { .. } | Error::NoSolver(_) => true,
            Error::Trial { source, .. } => source.is_refusal(),
            _ => false,
        }
    }
}

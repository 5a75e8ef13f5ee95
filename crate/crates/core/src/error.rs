use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index-2 subgroups need an even modulus, got {0}")]
    OddModulus(String),

    #[error("element is not valid for this group: {0}")]
    InvalidElement(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("qubits belong to different backends ({0} vs {1})")]
    MixedBackends(u64, u64),

    #[error("qubit label set is not the expected one: {0}")]
    WrongLabelSet(String),

    #[error("classical (corrupted) qubit passed where a coherent one is required")]
    ClassicalQubit,

    #[error("need at least {needed} copies, got {got}")]
    InsufficientCopies { needed: usize, got: usize },

    #[error("sieve exhausted: {0}")]
    SieveExhausted(String),

    #[error("no hidden reflection found after {attempts} verified attempts")]
    NoHiddenReflection { attempts: usize },

    #[error("every element of the group has order dividing 2; this is Simon's problem")]
    SimonCase,

    #[error("dimension {dim} exceeds the dense simulation limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("guess budget of {0} exhausted without a verified shift")]
    GuessBudgetExhausted(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} qubits, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("qubit index {qubit} out of range for {n} qubits")]
    QubitOutOfRange { qubit: usize, n: usize },

    #[error("cannot parse Pauli string {0:?}")]
    PauliParse(String),

    #[error("operator phase is not ±1")]
    NonHermitian,

    #[error("identity is not a valid reset target")]
    IdentityReset,

    #[error("parameter {name} = {value} outside [{min}, {max}]")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("unsupported qubit count {0} (supported: {1})")]
    UnsupportedQubitCount(usize, &'static str),

    #[error("linear program infeasible (residual {residual:.3e} > tolerance {tolerance:.3e})")]
    Infeasible { residual: f64, tolerance: f64 },

    #[error("basis channel 1^(I,P) with P != I is not trace-preserving")]
    DisallowedBasisChannel,

    #[error("decomposition has no nonzero coefficients")]
    EmptyDecomposition,

    #[error("stabilizer generators are not independent and mutually commuting")]
    InvalidGenerators,

    #[error("parse error at line {line}, column {col}: {msg}")]
    CircuitParse { line: usize, col: usize, msg: String },

    #[error("unknown channel {0:?}")]
    UnknownChannel(String),

    #[error("invalid simulation plan: {0}")]
    InvalidPlan(String),

    #[error("invalid channel term: {0}")]
    InvalidTerm(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

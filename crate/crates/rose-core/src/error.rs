use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by model evaluation, local solvers and the aggregation
/// protocols. Cloneable so per-machine outcomes can be cached and replayed.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("linear predictor {0} exceeds the exp overflow guard (700)")]
    LinearPredictorOverflow(f64),

    #[error("response {value} at row {row} is not binary")]
    NonBinaryResponse { row: usize, value: f64 },

    #[error("newton iteration stopped after {iterations} steps with gradient norm {grad_norm:.3e}")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("singular hessian (condition estimate {cond:.3e})")]
    SingularHessian { cond: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("report from machine {machine_id} is missing field `{field}`")]
    MissingReportField {
        machine_id: usize,
        field: &'static str,
    },

    #[error("machine {machine_id}: {source}")]
    AtMachine {
        machine_id: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error at {path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    /// Tag an error with the machine it occurred on.
    pub fn at_machine(self, machine_id: usize) -> Self {
        match self {
            Error::AtMachine { .. } => self,
            other => Error::AtMachine {
                machine_id,
                source: Box::new(other),
            },
        }
    }
}

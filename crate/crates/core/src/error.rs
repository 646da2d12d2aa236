use thiserror::Error;

use crate::dataset::TreatmentDiagnostic;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} has length {found}, expected {expected}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("design matrix has no columns or no rows")]
    EmptyDesign,

    #[error("duplicate column label `{0}`")]
    DuplicateLabel(String),

    #[error("weights must be finite and nonnegative (row {row} has {value})")]
    InvalidWeight { row: usize, value: f64 },

    #[error("all weights are zero")]
    ZeroWeights,

    #[error("probit response must be 0/1, found {value} at row {row}")]
    NonBinaryResponse { row: usize, value: f64 },

    #[error("probit response is constant ({0}); the likelihood has no finite maximizer")]
    ConstantResponse(f64),

    #[error("probability {0} is outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("empty csv file")]
    EmptyFile,

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row} has {found} fields, header has {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("schema mismatch: missing columns {missing:?}, unexpected columns {extra:?}")]
    SchemaMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("column name must be nonempty")]
    EmptyColumnName,

    #[error("treatment column `{column}` failed validation: {diagnostic}")]
    Treatment {
        column: String,
        diagnostic: TreatmentDiagnostic,
    },

    #[error("invalid residualization plan: {0}")]
    InvalidPlan(String),

    #[error("inadmissible term `{0}`: a treatment may not multiply two different contemporaneous residualized confounders")]
    Inadmissible(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("{0} model failed to converge")]
    NonConvergence(String),

    #[error("bootstrap failed: {failed} of {reps} replicates could not be estimated")]
    TooManyFailures { failed: usize, reps: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum DltfError {
    #[error("column {column} has norm {norm:e}, too small to normalize")]
    ZeroColumn { column: usize, norm: f64 },

    #[error("column {column} has norm {norm}, expected 1")]
    NotUnitNorm { column: usize, norm: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid sparsity k = {k} for length {len}")]
    InvalidK { k: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("column {column} has {nnz} nonzeros, budget is {k}")]
    SparsityViolated { column: usize, nnz: usize, k: usize },

    #[error("weight t[{index}] = {value} is not strictly positive")]
    NonpositiveWeight { index: usize, value: f64 },

    #[error("input is not nondecreasing at index {index}")]
    UnsortedInput { index: usize },

    #[error("input entry {index} is negative ({value})")]
    NegativeInput { index: usize, value: f64 },

    #[error("mutual coherence needs at least two atoms, got {0}")]
    TooFewAtoms(usize),

    #[error("code vector has no nonzero entries")]
    AllZeroCode,

    #[error("subset enumeration needs {required} evaluations, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("delta = {delta} outside the open interval (0, {upper})")]
    DeltaOutOfRange { delta: f64, upper: f64 },

    #[error("bound denominator {denominator} is not positive; k must stay below {k_ceiling}")]
    DenominatorNonpositive { denominator: f64, k_ceiling: f64 },

    #[error("power iteration produced an invalid estimate ({0})")]
    PowerIterationDiverged(f64),

    #[error("line search failed after {0} backtracks")]
    LineSearchFailed(usize),

    #[error("least-squares subproblem is singular at atom {0}")]
    SingularSubproblem(usize),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl DltfError {
    /// True for failures of a numerical routine, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            DltfError::PowerIterationDiverged(_)
                | DltfError::LineSearchFailed(_)
                | DltfError::SingularSubproblem(_)
                | DltfError::BudgetExceeded { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, DltfError>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: column `{column}` must be 0 or 1, got `{value}`")]
    NonBinary {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: pi1 out of range ({value})")]
    Pi1OutOfRange { row: usize, value: f64 },

    #[error("row {row}: expected {expected} covariates, found {found}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}: cannot parse `{value}` in column `{column}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    #[error("positivity violated: estimated e0(x) = {value:.3e} is below the floor {floor:.0e}")]
    Positivity { value: f64, floor: f64 },

    #[error("instrument has no level with at least {min_rows} rows")]
    NoInstrumentSupport { min_rows: usize },

    #[error("proximal cell count below threshold: bin {bin} has {count} selected rows (< {min_rows})")]
    SparseProximalCell {
        bin: usize,
        count: usize,
        min_rows: usize,
    },

    #[error("bounding functions crossed on {crossings} of {evaluated} points (more than tolerated)")]
    TooManyCrossings { crossings: usize, evaluated: usize },

    #[error("cannot identify mu1: no rows with d = 1")]
    NoSelectedRows,

    #[error("model fitting failed: {0}")]
    ModelFailure(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} replicates failed (first failure: {first})")]
    ReplicateFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::Unsupported(_) => ErrorKind::Config,
            Error::MissingColumn(_)
            | Error::NonBinary { .. }
            | Error::Pi1OutOfRange { .. }
            | Error::DimensionMismatch { .. }
            | Error::Parse { .. }
            | Error::EmptyDataset
            | Error::NoSelectedRows
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorKind::Data,
            Error::Fold { source, .. } => source.kind(),
            _ => ErrorKind::Numeric,
        }
    }

    /// The underlying error, past any fold context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Fold { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Error {
        Error::Fold {
            fold,
            source: Box::new(self),
        }
    }
}

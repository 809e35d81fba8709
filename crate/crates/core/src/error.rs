use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: non-numeric value `{value}` in column `{column}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: duplicate cell (unit `{unit}`, year {year})")]
    DuplicateCell { row: usize, unit: String, year: i32 },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("collinear design: {0}")]
    Collinear(String),

    #[error("staggered adoption is not supported (treated units start in periods {0:?})")]
    StaggeredAdoption(Vec<usize>),

    #[error("counterfactual missing for treated cell (unit {unit}, period {period})")]
    MissingCounterfactual { unit: usize, period: usize },

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("soft-impute did not converge within {iterations} iterations (last relative change {last_change:e})")]
    NotConverged {
        iterations: usize,
        last_change: f64,
        objective_trace: Vec<f64>,
    },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("replicate {rep} failed {attempts} times, last error: {source}")]
    BootstrapAborted {
        rep: usize,
        attempts: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("geojson: {0}")]
    GeoJson(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CumiError>;

#[derive(Debug, Error)]
pub enum CumiError {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed cell or record in an input file. `row` and `col` are 1-based
    /// positions in the file as a user would see it.
    #[error("{path}: row {row}, column {col}: {msg}")]
    Parse {
        path: PathBuf,
        row: usize,
        col: usize,
        msg: String,
    },

    /// A view file whose column count disagrees with the declared width.
    #[error(
        "{path}: row {row}: view '{view}' declares {declared} columns but the row has {found}"
    )]
    ViewWidth {
        path: PathBuf,
        view: String,
        row: usize,
        declared: usize,
        found: usize,
    },

    #[error("{path}: {found} data rows, expected {expected} to match the other files")]
    RowCount {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}: row {row}, column 1: label {value} is outside 0..{n_classes}")]
    LabelRange {
        path: PathBuf,
        row: usize,
        value: usize,
        n_classes: usize,
    },

    #[error("{path}: {msg}")]
    Invalid { path: PathBuf, msg: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CumiError {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        CumiError::Dimension {
            op,
            detail: detail.into(),
        }
    }

    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, CumiError::Numeric(_))
    }

    /// True for errors caused by a bad input file or manifest.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            CumiError::Io { .. }
                | CumiError::Parse { .. }
                | CumiError::ViewWidth { .. }
                | CumiError::RowCount { .. }
                | CumiError::LabelRange { .. }
                | CumiError::Invalid { .. }
                | CumiError::Json(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CumiError::Io {
            path: path.into(),
            source,
        }
    }
}

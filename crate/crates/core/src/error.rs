use std::path::PathBuf;

/// Errors raised across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular fit: {0}")]
    SingularFit(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid contour: {0}")]
    InvalidContour(String),

    #[error("infeasible weave: {0}")]
    InfeasibleWeave(String),

    #[error("model contains no yarns")]
    EmptyModel,

    #[error("voxel budget exceeded: {requested} voxels requested, budget is {budget}")]
    BudgetExceeded { requested: u64, budget: u64 },

    #[error("inverted cell at station {station:.3}: {detail}")]
    SelfIntersection { station: f64, detail: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {file}: {message}")]
    Parse { file: String, message: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl std::fmt::Display, message: impl std::fmt::Display) -> Self {
        Error::Parse {
            file: file.to_string(),
            message: message.to_string(),
        }
    }
}

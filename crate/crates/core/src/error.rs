use std::path::PathBuf;

/// Errors raised by the library. Each variant maps onto one failure class
/// (usage, data or numeric) so callers can pick an exit status.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no foreground patches available")]
    NoForeground,

    #[error("degenerate std: normalization needs a positive standard deviation")]
    DegenerateStd,

    #[error("unimodal degenerate histogram: need at least two non-empty bins")]
    UnimodalHistogram,

    #[error("empty mask")]
    EmptyMask,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown image id `{0}`")]
    UnknownImage(String),

    #[error("no bags")]
    NoBags,

    #[error("truncated or malformed archive: {0}")]
    Truncated(String),

    #[error("non-finite loss on bag `{0}`")]
    NonFiniteLoss(String),

    #[error("class `{0}` absent from training set")]
    MissingClass(String),

    #[error("isolate `{isolate}` has {found} preparations, expected 2")]
    PreparationCount { isolate: String, found: usize },

    #[error("method mismatch: model trained for {model}, asked for {requested}")]
    MethodMismatch { model: String, requested: String },

    #[error("degenerate pairs: all paired differences are zero")]
    DegeneratePairs,

    #[error("not enough samples: {0}")]
    TooFewSamples(String),

    #[error("no discriminative bins")]
    NoDiscriminativeBins,

    #[error("overcrowded spec: expected foreground coverage {0:.3} exceeds 0.5")]
    Overcrowded(f64),

    #[error("nothing to explain: no correctly predicted images")]
    NothingToExplain,

    #[error("image error in {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("io error in {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::MethodMismatch { .. } | Error::Overcrowded(_) => {
                ErrorKind::Usage
            }
            Error::DegenerateStd
            | Error::NonFiniteLoss(_)
            | Error::DegeneratePairs
            | Error::UnimodalHistogram => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point set is empty")]
    EmptyCloud,

    #[error("k = {k} is out of range for {n} points")]
    KOutOfRange { k: usize, n: usize },

    #[error("full barycenter enumeration is limited to n <= 14 and k <= 4 (got n = {n}, k = {k})")]
    EnumerationTooLarge { n: usize, k: usize },

    #[error("grid of {0} nodes exceeds the limit of 1024^3")]
    GridTooLarge(u64),

    #[error("unknown polyball model `{0}` (expected dodeca or ico0..ico5)")]
    UnknownPolyBall(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Monte-Carlo sampling accepted no points; the sampling box misses the offset region")]
    NoAcceptedSamples,

    #[error("every covariance tensor vanished; increase R or r")]
    DegenerateField,

    #[error("no valid estimate to score")]
    NoValidEstimates,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}: binary PLY is not supported, convert to `format ascii 1.0`")]
    BinaryPly(PathBuf),

    #[error("{0}: unrecognized point cloud format")]
    UnknownFormat(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

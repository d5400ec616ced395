use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frequency {freq} Hz exceeds Nyquist ({nyquist} Hz)")]
    AboveNyquist { freq: f64, nyquist: f64 },

    #[error("filter design is unstable (max pole radius {max_radius})")]
    UnstableFilter { max_radius: f64 },

    #[error("buffer too short: need more than {needed} samples, got {got}")]
    BufferTooShort { needed: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("unsupported audio encoding in {path}: {detail}")]
    UnsupportedEncoding { path: PathBuf, detail: String },

    #[error("WAV error on {path}: {detail}")]
    Wav { path: PathBuf, detail: String },

    #[error("sample rate mismatch: expected {expected} Hz, {what} has {found} Hz")]
    RateMismatch {
        expected: u32,
        found: u32,
        what: String,
    },

    #[error("record mismatch: {0}")]
    Mismatch(String),

    #[error("missing Task 1 baseline for participant {participant} at {f_s_hz} Hz")]
    MissingBaseline { participant: String, f_s_hz: f64 },

    #[error("missing task {task_id} for participant {participant} at {f_s_hz} Hz")]
    MissingTask {
        participant: String,
        task_id: u8,
        f_s_hz: f64,
    },

    #[error("alignment failed: {0}")]
    Alignment(String),

    #[error("schema violation in {source_name} at {location}: {message}")]
    Schema {
        source_name: String,
        location: String,
        message: String,
    },

    #[error("covariance is rank deficient: {0}")]
    RankDeficient(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn schema(
        source_name: impl Into<String>,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Schema {
            source_name: source_name.into(),
            location: location.into(),
            message: message.into(),
        }
    }
}

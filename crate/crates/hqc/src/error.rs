use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] hqc_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed JSON document; `line`/`column` are 1-based.
    #[error("{context}: {message} at line {line} column {column}")]
    Json { context: String, message: String, line: usize, column: usize },

    #[error("invalid {what}: {message}")]
    Config { what: &'static str, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("remote job failed: {0}")]
    RemoteJob(String),

    #[error("server error: {0}")]
    Server(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(context: impl Into<String>, e: &serde_json::Error) -> Self {
        Error::Json { context: context.into(), message: strip_position(e), line: e.line(), column: e.column() }
    }
}

/// serde_json appends " at line L column C"; the variant carries those separately.
fn strip_position(e: &serde_json::Error) -> String {
    let text = e.to_string();
    match text.rfind(" at line ") {
        Some(i) => text[..i].to_string(),
        None => text,
    }
}

impl From<Error> for hqc_core::Error {
    fn from(e: Error) -> Self {
        match e {
            Error::Core(inner) => inner,
            other => hqc_core::Error::Backend(other.to_string()),
        }
    }
}

/// Reads a whole file, attaching the path to IO errors.
pub fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

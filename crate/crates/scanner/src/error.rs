use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("malformed target file: {0}")]
    TargetSyntax(#[from] toml::de::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{list} line {line}: {message}")]
    Signature {
        list: &'static str,
        line: usize,
        message: String,
    },
    #[error("target unreachable at {url}: {message}")]
    Unreachable { url: String, message: String },
    #[error("probe group '{0}' mutates target state and destructive probing is not allowed")]
    DestructiveNotAllowed(&'static str),
    #[error("cannot build HTTP client: {0}")]
    Client(String),
}

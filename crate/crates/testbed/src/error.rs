use thiserror::Error;

#[derive(Debug, Error)]
pub enum TestbedError {
    #[error("unknown preset '{0}' (expected one of hardened, vulnerable, chatgpt, deepseek, claude, gemini, grok)")]
    UnknownPreset(String),
    #[error("invalid toggle combination: {0}")]
    InvalidCombination(String),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed testbed config: {0}")]
    Config(#[from] toml::de::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

use std::io;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("{0}")]
    Decode(String),
    #[error("{0}")]
    DescriptorMismatch(String),
    #[error("{0}")]
    Manifest(String),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Cache(String),
    #[error("{0}")]
    Onnx(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] aescomp_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable name printed in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "IoError",
            Error::Decode(_) => "DecodeError",
            Error::DescriptorMismatch(_) => "DescriptorMismatch",
            Error::Manifest(_) => "ManifestError",
            Error::Format(_) => "FormatError",
            Error::Cache(_) => "CacheError",
            Error::Onnx(_) => "OnnxError",
            Error::Config(_) => "ConfigError",
            Error::Core(e) => e.kind(),
        }
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { context: path.display().to_string(), source }
    }
}

use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    Numerics(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("composition error: {0}")]
    Composition(String),

    #[error("training labels contain a single class")]
    DegenerateLabels,

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("split error: {0}")]
    Split(String),

    /// Failure inside a backbone's inference runtime.
    #[error("backbone error: {0}")]
    Backbone(String),
}

impl Error {
    /// Stable kind name used in machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "ShapeError",
            Error::Numerics(_) => "NumericsError",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Composition(_) => "CompositionError",
            Error::DegenerateLabels => "DegenerateLabels",
            Error::ModelMismatch(_) => "ModelMismatch",
            Error::Manifest(_) => "ManifestError",
            Error::Split(_) => "SplitError",
            Error::Backbone(_) => "BackboneError",
        }
    }

    pub(crate) fn shape(expected: usize, actual: usize) -> Self {
        Error::Shape { expected, actual }
    }
}

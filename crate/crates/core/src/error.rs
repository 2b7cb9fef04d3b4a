use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid model constants: {0}")]
    InvalidModel(String),
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("initialization failed: {0}")]
    Init(String),
    #[error("trimap foreground is empty (no joint rasterized inside the image)")]
    EmptyForeground,
    #[error("trimap needs both foreground and background seeds")]
    MissingSeeds,
    #[error("feature unavailable: {0}")]
    FeatureUnavailable(&'static str),
    #[error("non-finite Jacobian at iteration {iteration}")]
    NonFiniteJacobian { iteration: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}

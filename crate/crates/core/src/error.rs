use std::path::PathBuf;

/// Errors produced by the refinement, augmentation and evaluation routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid box [{x}, {y}, {w}, {h}]: width and height must be at least 1")]
    InvalidBox { x: u32, y: u32, w: u32, h: u32 },
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("swap point {swap_x} outside (0, {width})")]
    SwapPointOutOfRange { swap_x: u32, width: u32 },
    #[error("no character center inside the prototype window")]
    NoCenterInWindow,
    #[error("queues have no horizontal overlap")]
    NoHorizontalOverlap,
    #[error("scale expansion leaves the canvas at step {step}")]
    ExtensionOutOfBounds { step: u32 },
    #[error("shifted target box leaves the image")]
    ShiftOutOfBounds,
    #[error("sample pool is empty")]
    EmptyPool,
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("detection class {0} is not handled here")]
    WrongClass(crate::detection::PrototypeClass),
    #[error("type I detection has no mask")]
    MissingMask,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("image id mismatch: {0}")]
    IdMismatch(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant(_) => 2,
            _ => 1,
        }
    }
}

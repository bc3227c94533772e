use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("color #{:02x}{:02x}{:02x} is not in the {task} palette{}", color[0], color[1], color[2], at.map(|(x, y)| format!(" (pixel {x},{y})")).unwrap_or_default())]
    UnknownColor {
        task: String,
        color: [u8; 3],
        at: Option<(u32, u32)>,
    },

    #[error("corrupt or unsupported raster {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("cannot upscale {from_w}x{from_h} to {to_w}x{to_h}")]
    UpscaleRequested {
        from_w: u32,
        from_h: u32,
        to_w: u32,
        to_h: u32,
    },

    #[error("degenerate warp grid: {0}")]
    DegenerateGrid(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}{}", context.as_ref().map(|c| format!(" ({c})")).unwrap_or_default())]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
        context: Option<String>,
    },

    #[error("images use different label schemas ({0} vs {1})")]
    SchemaMismatch(String, String),

    #[error("tiling {config}: {reason}")]
    InsufficientCoverage { config: String, reason: String },

    #[error("expected {expected} tiles, got {actual}")]
    TileCountMismatch { expected: usize, actual: usize },

    #[error("no resolution with multiples of 64 fits {max_pixels} pixels at aspect {aspect}±{tolerance}")]
    NoFeasibleResolution {
        max_pixels: u64,
        aspect: f64,
        tolerance: f64,
    },

    #[error("unknown tiling configuration {0:?}")]
    UnknownConfig(String),

    #[error("class {0} is not a region class")]
    NotARegionClass(String),

    #[error("class {0} is not a separator class")]
    NotASeparatorClass(String),

    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("need at least {needed} pages, got {got}")]
    TooFewPages { needed: usize, got: usize },

    #[error("predictor {predictor} failed: {reason}")]
    PredictorFailure { predictor: String, reason: String },

    #[error("malformed prediction for tile {tile}: {reason}")]
    MalformedPrediction { tile: String, reason: String },

    #[error("malformed record at {path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

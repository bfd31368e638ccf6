//! Error type shared across the engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_h}x{expected_w}, got {got_h}x{got_w}")]
    DimensionMismatch {
        expected_h: usize,
        expected_w: usize,
        got_h: usize,
        got_w: usize,
    },

    #[error("stroke parameter `{name}` = {value} outside [0,1]")]
    InvalidStroke { name: &'static str, value: f64 },

    #[error("canvas dims {h}x{w} below the 8x8 minimum")]
    InvalidDims { h: usize, w: usize },

    #[error("degenerate bounding box: {0}")]
    InvalidBBox(String),

    #[error("no foreground: mask has no value at or above the threshold")]
    NoForeground,

    #[error("GBP map is identically zero")]
    ZeroGbpMap,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("scene error: {0}")]
    Scene(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("coordinate {value} (line {line}, point {point}) is outside [0, {max}]")]
    CoordinateOutOfRange {
        line: usize,
        point: usize,
        value: i64,
        max: u32,
    },

    #[error("unknown token {surface:?} at byte {offset}")]
    UnknownToken { surface: String, offset: usize },

    #[error("parse error at token {index}: expected one of [{}], found {found}", expected.join(", "))]
    Parse {
        index: usize,
        expected: Vec<String>,
        found: String,
    },

    #[error("invalid rotation angle {0} (expected 90, 180 or 270)")]
    InvalidAngle(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("latitude {0} is outside the Web Mercator bounds")]
    LatitudeOutOfBounds(f64),

    #[error("pixel ({x}, {y}) is outside the extent of zoom {zoom}")]
    OutOfExtent { x: f64, y: f64, zoom: u8 },

    #[error("missing argument for prompt mode {mode}: {what}")]
    MissingArgument { mode: &'static str, what: &'static str },

    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

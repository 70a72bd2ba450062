//! Vector road-map generation toolkit: line model, token codec, patch
//! augmentation, patch-by-patch stitching, metrics and geo-referencing.

pub mod augment;
pub mod clip;
pub mod codec;
pub mod error;
pub mod geolink;
pub mod io;
pub mod metrics;
pub mod model;
pub mod render;
pub mod sampling;
pub mod stitch;
pub mod synthetic;

pub use error::{Error, Result};

//! Inference-time orchestration on a deterministic toy denoiser: seamless
//! texture synthesis, tiled super-resolution, camera-conditioned video
//! extension, loop generation and dataset curation.

pub mod camera;
pub mod codec;
pub mod container;
pub mod curation;
pub mod denoise;
pub mod error;
pub mod extend;
pub mod raster;
pub mod seamless;
pub mod tiled;
pub mod volume;

pub use error::{Error, Result};
pub use raster::Rgba8Image;
pub use volume::{BinaryMask, LatentVolume, Shape};

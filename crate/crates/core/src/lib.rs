//! Image-adaptive LUT cascade.
//!
//! A small CNN summarizes a downsampled copy of the input into a context
//! vector; two generator heads turn that vector into three per-channel 1D
//! LUTs and one 3D LUT, which are then applied to the full-resolution image
//! in sequence. The crate covers the float and 8-bit fixed-point execution
//! paths, post-training generator quantization, the `.sepw` weight container,
//! LUT text formats, and the statistics used to study the cascade
//! (cell utilization, histogram uniformity, χ², PSNR/SSIM/ΔE).

pub mod analysis;
pub mod backbone;
pub mod bundle;
pub mod error;
pub mod generators;
pub mod image;
pub mod interp;
pub mod lut;
pub mod lutio;
pub mod pipeline;
pub mod quant;

pub use backbone::ContextVector;
pub use bundle::{BundleConfig, WeightBundle};
pub use error::{Error, Result};
pub use image::{ImageBuffer, Sample};
pub use interp::Interpolator;
pub use lut::{Lut1D, Lut3D};
pub use pipeline::Enhancer;

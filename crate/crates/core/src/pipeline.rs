//! End-to-end enhancement: context network, LUT generation, cascade.

use crate::backbone::{Backbone, ContextVector};
use crate::bundle::{BundleConfig, WeightBundle};
use crate::error::Result;
use crate::generators::Generators;
use crate::image::ImageBuffer;
use crate::interp::{Interpolator, apply_cascade_with, apply_lut1d};
use crate::lut::{Lut1D, Lut3D};
use crate::quant::{apply_cascade_fixed, quantize_lut1d, quantize_lut3d};

/// LUTs predicted for one image.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub context: ContextVector,
    pub lut1d: Lut1D,
    pub lut3d: Lut3D,
}

/// A bundle unpacked for repeated inference.
pub struct Enhancer {
    config: BundleConfig,
    backbone: Backbone,
    generators: Generators,
}

impl Enhancer {
    pub fn new(bundle: &WeightBundle) -> Result<Self> {
        Ok(Self {
            config: *bundle.config(),
            backbone: Backbone::new(bundle)?,
            generators: Generators::new(bundle)?,
        })
    }

    pub fn config(&self) -> &BundleConfig {
        &self.config
    }

    pub fn predict(&self, image: &ImageBuffer<f32>) -> Result<Prediction> {
        let context = self.backbone.forward(image)?;
        Ok(Prediction {
            lut1d: self.generators.lut1d(&context)?,
            lut3d: self.generators.lut3d(&context)?,
            context,
        })
    }

    pub fn enhance(
        &self,
        image: &ImageBuffer<f32>,
        interp: Interpolator,
    ) -> Result<ImageBuffer<f32>> {
        let p = self.predict(image)?;
        Ok(apply_cascade_with(&p.lut1d, &p.lut3d, image, interp))
    }

    /// Float prediction followed by the integer cascade on 8-bit data.
    pub fn enhance_fixed(&self, image: &ImageBuffer<u8>) -> Result<ImageBuffer<u8>> {
        let p = self.predict(&image.to_f32())?;
        Ok(apply_cascade_fixed(
            &quantize_lut1d(&p.lut1d),
            &quantize_lut3d(&p.lut3d),
            image,
        ))
    }
}

impl Prediction {
    /// The image after the 1D stage only.
    pub fn intermediate(&self, image: &ImageBuffer<f32>) -> ImageBuffer<f32> {
        apply_lut1d(&self.lut1d, image)
    }
}

//! Forward inference of the context network.
//!
//! The input is resized to 256x256, passed through five 3x3 stride-2 conv
//! blocks (LeakyReLU, then instance norm after the first four), average
//! pooled from 8x8 to 2x2 and flattened channel-major into a vector of
//! `32 * m` values.

use rayon::prelude::*;

use crate::bundle::{
    BundleConfig, CONV_BLOCKS, NORM_BLOCKS, WeightBundle, conv_bias, conv_weight, norm_beta,
    norm_gamma,
};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;

pub const INPUT_SIZE: usize = 256;
pub const POOL_WINDOW: usize = 4;

/// Global image embedding fed to the LUT generators.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector(Vec<f32>);

impl ContextVector {
    pub fn new(values: Vec<f32>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, alpha: f32) -> Self {
        Self(self.0.iter().map(|v| v * alpha).collect())
    }
}

/// Channel-major activations `(c, y, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn from_image(image: &ImageBuffer<f32>) -> Self {
        Self {
            channels: 3,
            height: image.height(),
            width: image.width(),
            data: image.data().to_vec(),
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    fn check_finite(&self, layer: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(layer.to_string()))
        }
    }
}

/// Bilinear resampling with half-pixel centers: destination pixel `d` reads
/// source coordinate `(d + 0.5) * src / dst - 0.5`, clamped to the image.
pub fn resize_bilinear(
    image: &ImageBuffer<f32>,
    out_h: usize,
    out_w: usize,
) -> Result<ImageBuffer<f32>> {
    if image.is_empty() {
        return Err(Error::EmptyImage);
    }
    let (h, w) = image.dims();
    if (h, w) == (out_h, out_w) {
        return Ok(image.clone());
    }
    let taps = |src: usize, dst: usize| -> Vec<(usize, usize, f32)> {
        let scale = src as f64 / dst as f64;
        (0..dst)
            .map(|d| {
                let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(src - 1);
                (i0, i1, (s - i0 as f64) as f32)
            })
            .collect()
    };
    let ys = taps(h, out_h);
    let xs = taps(w, out_w);
    let mut out = Vec::with_capacity(3 * out_h * out_w);
    for plane in image.planes() {
        for &(y0, y1, fy) in &ys {
            let (r0, r1) = (&plane[y0 * w..(y0 + 1) * w], &plane[y1 * w..(y1 + 1) * w]);
            for &(x0, x1, fx) in &xs {
                let top = (1.0 - fx) * r0[x0] + fx * r0[x1];
                let bot = (1.0 - fx) * r1[x0] + fx * r1[x1];
                out.push(((1.0 - fy) * top + fy * bot).clamp(0.0, 1.0));
            }
        }
    }
    ImageBuffer::new(out_h, out_w, out)
}

pub fn resize_bilinear_256(image: &ImageBuffer<f32>) -> Result<ImageBuffer<f32>> {
    resize_bilinear(image, INPUT_SIZE, INPUT_SIZE)
}

pub fn conv_output_len(n: usize) -> usize {
    (n + 2 - 3) / 2 + 1
}

/// 3x3 cross-correlation, stride 2, zero padding 1. `weight` is
/// `(cout, cin, 3, 3)` row-major.
pub fn conv3x3_s2(input: &FeatureMap, weight: &[f32], bias: &[f32]) -> Result<FeatureMap> {
    let cin = input.channels;
    let cout = bias.len();
    if weight.len() != cout * cin * 9 {
        return Err(Error::LengthMismatch {
            expected: cout * cin * 9,
            found: weight.len(),
        });
    }
    let (h, w) = (input.height, input.width);
    let (oh, ow) = (conv_output_len(h), conv_output_len(w));
    let mut data = vec![0.0f32; cout * oh * ow];
    data.par_chunks_mut(oh * ow)
        .enumerate()
        .for_each(|(co, out)| {
            out.fill(bias[co]);
            for ci in 0..cin {
                let src = input.channel(ci);
                let k = &weight[(co * cin + ci) * 9..(co * cin + ci + 1) * 9];
                for ky in 0..3 {
                    for kx in 0..3 {
                        let wv = k[ky * 3 + kx];
                        for oy in 0..oh {
                            let Some(iy) = (2 * oy + ky).checked_sub(1).filter(|&y| y < h) else {
                                continue;
                            };
                            let row = &src[iy * w..(iy + 1) * w];
                            let dst = &mut out[oy * ow..(oy + 1) * ow];
                            for (ox, d) in dst.iter_mut().enumerate() {
                                if let Some(ix) = (2 * ox + kx).checked_sub(1).filter(|&x| x < w) {
                                    *d += wv * row[ix];
                                }
                            }
                        }
                    }
                }
            }
        });
    FeatureMap::new(cout, oh, ow, data)
}

pub fn leaky_relu(fm: &mut FeatureMap, slope: f32) {
    for v in &mut fm.data {
        if *v < 0.0 {
            *v *= slope;
        }
    }
}

/// Per-channel standardization over spatial positions with population
/// variance, then `gamma * x + beta`. A channel whose values are all equal
/// outputs `beta`.
pub fn instance_norm(fm: &mut FeatureMap, gamma: &[f32], beta: &[f32], eps: f32) {
    let n = fm.height * fm.width;
    fm.data.par_chunks_mut(n).enumerate().for_each(|(c, ch)| {
        let first = ch[0];
        if ch.iter().all(|&v| v == first) {
            ch.fill(beta[c]);
            return;
        }
        let mean = ch.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        let var = ch.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        let inv = 1.0 / (var + eps as f64).sqrt();
        let (g, b) = (gamma[c] as f64, beta[c] as f64);
        for v in ch.iter_mut() {
            *v = ((*v as f64 - mean) * inv * g + b) as f32;
        }
    });
}

/// Non-overlapping `window x window` average pooling.
pub fn avg_pool(fm: &FeatureMap, window: usize) -> FeatureMap {
    let (oh, ow) = (fm.height / window, fm.width / window);
    let mut data = Vec::with_capacity(fm.channels * oh * ow);
    let norm = 1.0 / (window * window) as f32;
    for c in 0..fm.channels {
        let src = fm.channel(c);
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0f32;
                for y in oy * window..(oy + 1) * window {
                    for x in ox * window..(ox + 1) * window {
                        acc += src[y * fm.width + x];
                    }
                }
                data.push(acc * norm);
            }
        }
    }
    FeatureMap {
        channels: fm.channels,
        height: oh,
        width: ow,
        data,
    }
}

struct ConvBlock {
    weight: Vec<f32>,
    bias: Vec<f32>,
    norm: Option<(Vec<f32>, Vec<f32>)>,
}

/// Backbone weights unpacked from a bundle.
pub struct Backbone {
    config: BundleConfig,
    blocks: Vec<ConvBlock>,
}

impl Backbone {
    pub fn new(bundle: &WeightBundle) -> Result<Self> {
        let blocks = (0..CONV_BLOCKS)
            .map(|b| {
                let norm = if b < NORM_BLOCKS {
                    Some((
                        bundle.values(&norm_gamma(b))?.into_owned(),
                        bundle.values(&norm_beta(b))?.into_owned(),
                    ))
                } else {
                    None
                };
                Ok(ConvBlock {
                    weight: bundle.values(&conv_weight(b))?.into_owned(),
                    bias: bundle.values(&conv_bias(b))?.into_owned(),
                    norm,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            config: *bundle.config(),
            blocks,
        })
    }

    pub fn forward(&self, image: &ImageBuffer<f32>) -> Result<ContextVector> {
        self.forward_traced(image, |_, _| {})
    }

    /// Runs the network, reporting each layer's name and output shape.
    pub fn forward_traced(
        &self,
        image: &ImageBuffer<f32>,
        mut trace: impl FnMut(&str, [usize; 3]),
    ) -> Result<ContextVector> {
        let m = self.config.m;
        let resized = resize_bilinear_256(image)?;
        let mut x = FeatureMap::from_image(&resized);
        trace("resize", x.shape());
        let mut spatial = INPUT_SIZE;
        for (b, block) in self.blocks.iter().enumerate() {
            x = conv3x3_s2(&x, &block.weight, &block.bias)?;
            leaky_relu(&mut x, self.config.leaky_slope);
            spatial = conv_output_len(spatial);
            let expected = [crate::bundle::WIDTH_MULTIPLIERS[b] * m, spatial, spatial];
            assert_eq!(x.shape(), expected, "conv{} output shape", b + 1);
            let layer = format!("conv{}", b + 1);
            x.check_finite(&layer)?;
            trace(&layer, x.shape());
            if let Some((gamma, beta)) = &block.norm {
                instance_norm(&mut x, gamma, beta, self.config.in_eps);
                let layer = format!("in{}", b + 1);
                x.check_finite(&layer)?;
                trace(&layer, x.shape());
            }
        }
        // Dropout is the identity at inference.
        let pooled = avg_pool(&x, POOL_WINDOW);
        assert_eq!(pooled.shape(), [8 * m, 2, 2]);
        trace("pool", pooled.shape());
        debug_assert_eq!(pooled.data.len(), self.config.context_len());
        Ok(ContextVector(pooled.data))
    }
}

pub fn forward(image: &ImageBuffer<f32>, bundle: &WeightBundle) -> Result<ContextVector> {
    Backbone::new(bundle)?.forward(image)
}

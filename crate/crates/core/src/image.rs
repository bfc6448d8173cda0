//! Planar three-channel rasters.
//!
//! Pixels are stored channel-major as `(c, y, x)`: the red plane, then the
//! green plane, then the blue plane. Interleaved data is converted at the
//! edges via [`ImageBuffer::from_interleaved`] / [`ImageBuffer::to_interleaved`].

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

/// A sample type an [`ImageBuffer`] can hold.
pub trait Sample: Copy + Default + PartialEq + Send + Sync + std::fmt::Debug + 'static {
    /// Largest representable value; 1.0 for normalized floats.
    const MAX: f32;

    fn to_unit(self) -> f32;

    /// Clamps to `[0, 1]`, scales by [`Sample::MAX`] and rounds half away
    /// from zero.
    fn from_unit(v: f32) -> Self;

    fn is_valid(self) -> bool {
        true
    }
}

impl Sample for f32 {
    const MAX: f32 = 1.0;

    #[inline]
    fn to_unit(self) -> f32 {
        self
    }

    #[inline]
    fn from_unit(v: f32) -> Self {
        v.clamp(0.0, 1.0)
    }

    fn is_valid(self) -> bool {
        (0.0..=1.0).contains(&self)
    }
}

impl Sample for u8 {
    const MAX: f32 = 255.0;

    #[inline]
    fn to_unit(self) -> f32 {
        self as f32 / 255.0
    }

    #[inline]
    fn from_unit(v: f32) -> Self {
        (v.clamp(0.0, 1.0) * 255.0).round() as u8
    }
}

impl Sample for u16 {
    const MAX: f32 = 65535.0;

    #[inline]
    fn to_unit(self) -> f32 {
        self as f32 / 65535.0
    }

    #[inline]
    fn from_unit(v: f32) -> Self {
        (v.clamp(0.0, 1.0) * 65535.0).round() as u16
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer<T: Sample> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Sample> ImageBuffer<T> {
    /// Wraps planar `(c, y, x)` data. Float samples must lie in `[0, 1]`.
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        let expected = CHANNELS * height * width;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: data.len(),
            });
        }
        if let Some((index, &v)) = data.iter().enumerate().find(|(_, v)| !v.is_valid()) {
            return Err(Error::ValueOutOfRange {
                index,
                value: v.to_unit(),
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Builds an image from data already known to satisfy the range
    /// invariant, e.g. kernel output that has been clamped.
    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), CHANNELS * height * width);
        Self {
            height,
            width,
            data,
        }
    }

    pub fn filled(height: usize, width: usize, rgb: [T; 3]) -> Result<Self> {
        let plane = height * width;
        let mut data = Vec::with_capacity(CHANNELS * plane);
        for v in rgb {
            data.extend(std::iter::repeat_n(v, plane));
        }
        Self::new(height, width, data)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> [T; 3],
    ) -> Result<Self> {
        let plane = height * width;
        let mut data = vec![T::default(); CHANNELS * plane];
        for y in 0..height {
            for x in 0..width {
                let px = f(y, x);
                let i = y * width + x;
                data[i] = px[0];
                data[plane + i] = px[1];
                data[2 * plane + i] = px[2];
            }
        }
        Self::new(height, width, data)
    }

    /// Converts from interleaved `RGBRGB...` order.
    pub fn from_interleaved(height: usize, width: usize, rgb: &[T]) -> Result<Self> {
        let plane = height * width;
        if rgb.len() != CHANNELS * plane {
            return Err(Error::LengthMismatch {
                expected: CHANNELS * plane,
                found: rgb.len(),
            });
        }
        let mut data = vec![T::default(); CHANNELS * plane];
        for (i, px) in rgb.chunks_exact(3).enumerate() {
            data[i] = px[0];
            data[plane + i] = px[1];
            data[2 * plane + i] = px[2];
        }
        Self::new(height, width, data)
    }

    pub fn to_interleaved(&self) -> Vec<T> {
        let plane = self.pixel_count();
        let mut out = Vec::with_capacity(CHANNELS * plane);
        for i in 0..plane {
            out.push(self.data[i]);
            out.push(self.data[plane + i]);
            out.push(self.data[2 * plane + i]);
        }
        out
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.pixel_count() == 0
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.pixel_count();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn planes(&self) -> [&[T]; 3] {
        let n = self.pixel_count();
        let (r, rest) = self.data.split_at(n);
        let (g, b) = rest.split_at(n);
        [r, g, b]
    }

    pub fn pixel(&self, y: usize, x: usize) -> [T; 3] {
        let n = self.pixel_count();
        let i = y * self.width + x;
        [self.data[i], self.data[n + i], self.data[2 * n + i]]
    }

    /// Copies the `height x width` window whose top-left corner is `(y0, x0)`.
    pub fn crop(&self, y0: usize, x0: usize, height: usize, width: usize) -> Result<Self> {
        if y0 + height > self.height || x0 + width > self.width {
            return Err(Error::DimensionMismatch {
                a: (self.height, self.width),
                b: (y0 + height, x0 + width),
            });
        }
        let mut data = Vec::with_capacity(CHANNELS * height * width);
        for plane in self.planes() {
            for y in y0..y0 + height {
                let row = y * self.width;
                data.extend_from_slice(&plane[row + x0..row + x0 + width]);
            }
        }
        Ok(Self::from_raw(height, width, data))
    }

    pub fn map<U: Sample>(&self, f: impl Fn(T) -> U) -> ImageBuffer<U> {
        ImageBuffer::from_raw(
            self.height,
            self.width,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn to_f32(&self) -> ImageBuffer<f32> {
        self.map(|v| v.to_unit())
    }

    pub fn to_u8(&self) -> ImageBuffer<u8> {
        self.map(|v| u8::from_unit(v.to_unit()))
    }

    pub fn to_u16(&self) -> ImageBuffer<u16> {
        self.map(|v| u16::from_unit(v.to_unit()))
    }
}

impl ImageBuffer<f32> {
    /// Float image without the range check, for intermediate values that
    /// may leave `[0, 1]` (e.g. feature maps built from an image).
    pub fn from_unchecked(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        let expected = CHANNELS * height * width;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: data.len(),
            });
        }
        Ok(Self::from_raw(height, width, data))
    }
}

/// Pixels per parallel work item. Kernels are pointwise, so output never
/// depends on how the grid is split.
const PIXEL_CHUNK: usize = 4096;

/// Applies a per-pixel RGB function across the image on the current rayon
/// pool.
pub(crate) fn map_pixels<T: Sample, U: Sample>(
    image: &ImageBuffer<T>,
    f: impl Fn([T; 3]) -> [U; 3] + Sync,
) -> ImageBuffer<U> {
    let n = image.pixel_count();
    let [r, g, b] = image.planes();
    let mut out = vec![U::default(); CHANNELS * n];
    let (or, rest) = out.split_at_mut(n);
    let (og, ob) = rest.split_at_mut(n);
    or.par_chunks_mut(PIXEL_CHUNK)
        .zip(og.par_chunks_mut(PIXEL_CHUNK))
        .zip(ob.par_chunks_mut(PIXEL_CHUNK))
        .enumerate()
        .for_each(|(k, ((cr, cg), cb))| {
            let base = k * PIXEL_CHUNK;
            for j in 0..cr.len() {
                let i = base + j;
                let [x, y, z] = f([r[i], g[i], b[i]]);
                cr[j] = x;
                cg[j] = y;
                cb[j] = z;
            }
        });
    ImageBuffer::from_raw(image.height(), image.width(), out)
}

pub(crate) fn check_same_dims<A: Sample, B: Sample>(
    a: &ImageBuffer<A>,
    b: &ImageBuffer<B>,
) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            a: a.dims(),
            b: b.dims(),
        });
    }
    Ok(())
}

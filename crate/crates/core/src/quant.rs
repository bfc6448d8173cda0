//! 8-bit generator quantization and the integer-only LUT cascade.
//!
//! Generator tensors use per-tensor affine quantization calibrated on the
//! tensor's min/max (range widened to include 0 so the zero point is a valid
//! byte). The fixed-point cascade locates inputs in Q16: for an 8-bit value
//! `v` and a lattice of `S` points, `s = v * (S - 1) * 65536 / 255`
//! (truncating), the cell is `s >> 16` clamped to `S - 2`, and the fraction
//! is whatever remains, so `v = 255` reaches the last entry with fraction
//! `65536`. Interpolated sums round by adding `1 << 15` before each `>> 16`.

use crate::bundle::{Group, Tensor, TensorData, WeightBundle, group_of};
use crate::error::Result;
use crate::image::{ImageBuffer, Sample, map_pixels};
use crate::lut::{Lut1D, Lut3D};

const ONE: u32 = 1 << 16;
const HALF: u64 = 1 << 15;

/// Bytes with an affine map back to floats: `scale * (q - zero_point)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    data: Vec<u8>,
    scale: f32,
    zero_point: u8,
}

impl QuantizedTensor {
    pub fn from_parts(data: Vec<u8>, scale: f32, zero_point: u8) -> Self {
        Self {
            data,
            scale,
            zero_point,
        }
    }

    /// Min/max calibration. A tensor whose entries are all equal to `c` is
    /// stored exactly as `scale = |c|`, `q - zero_point = sign(c)`; all-zero
    /// tensors get scale 0.
    pub fn quantize(values: &[f32]) -> Self {
        let (lo, hi) = values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if values.is_empty() || lo == hi {
            let c = if values.is_empty() { 0.0 } else { lo };
            let (scale, zero_point, q) = if c > 0.0 {
                (c, 0, 1)
            } else if c < 0.0 {
                (-c, 1, 0)
            } else {
                (0.0, 0, 0)
            };
            return Self {
                data: vec![q; values.len()],
                scale,
                zero_point,
            };
        }
        let lo = lo.min(0.0);
        let hi = hi.max(0.0);
        let scale = (hi - lo) / 255.0;
        let zero_point = (-lo / scale).round().clamp(0.0, 255.0) as u8;
        let mut t = Self {
            data: Vec::with_capacity(values.len()),
            scale,
            zero_point,
        };
        t.data = values.iter().map(|&v| t.quantize_value(v)).collect();
        t
    }

    #[inline]
    pub fn quantize_value(&self, v: f32) -> u8 {
        if self.scale == 0.0 {
            return self.zero_point;
        }
        ((v / self.scale).round() + self.zero_point as f32).clamp(0.0, 255.0) as u8
    }

    #[inline]
    pub fn dequantize_value(&self, q: u8) -> f32 {
        self.scale * (q as f32 - self.zero_point as f32)
    }

    pub fn dequantize(&self) -> Vec<f32> {
        self.data
            .iter()
            .map(|&q| self.dequantize_value(q))
            .collect()
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn scale(&self) -> f32 {
        self.scale
    }

    pub fn zero_point(&self) -> u8 {
        self.zero_point
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Quantizes the 1D and 3D generator tensors to 8 bits. Backbone tensors
/// and tensors that are already quantized are kept as they are.
pub fn quantize_bundle(bundle: &WeightBundle) -> Result<WeightBundle> {
    let mut out = bundle.clone();
    for (name, t) in bundle.tensors() {
        if group_of(name) == Group::Backbone {
            continue;
        }
        if let TensorData::F32(v) = t.data() {
            let q = QuantizedTensor::quantize(v);
            out.set(name, Tensor::new(t.shape().to_vec(), TensorData::U8(q))?)?;
        }
    }
    Ok(out)
}

/// `(original, equivalent, relative reduction)` parameter accounting.
pub fn footprint(original: &WeightBundle, quantized: &WeightBundle) -> (f64, f64, f64) {
    let a = original.equivalent_parameter_count();
    let b = quantized.equivalent_parameter_count();
    (a, b, (a - b) / a)
}

pub fn quantize_lut1d(lut: &Lut1D) -> Lut1D<u8> {
    let values = lut.values().iter().map(|&v| u8::from_unit(v)).collect();
    Lut1D::new(lut.size(), values).expect("same shape")
}

pub fn quantize_lut3d(lut: &Lut3D) -> Lut3D<u8> {
    let values = lut.values().iter().map(|&v| u8::from_unit(v)).collect();
    Lut3D::new(lut.size(), values).expect("same shape")
}

/// Q16 position of an 8-bit value on a lattice of `size` points.
#[inline]
pub fn locate_q16(v: u8, size: usize) -> (usize, u32) {
    let s = (v as u64 * (size as u64 - 1) * ONE as u64) / 255;
    let cell = ((s >> 16) as usize).min(size - 2);
    (cell, (s - ((cell as u64) << 16)) as u32)
}

#[inline]
fn lerp_q16(a: u8, b: u8, frac: u32) -> u8 {
    let acc = a as u32 * (ONE - frac) + b as u32 * frac;
    ((acc + HALF as u32) >> 16) as u8
}

/// Per-channel 256-entry table equal to the Q16 curve interpolation of every
/// 8-bit input.
fn curve_table(curve: &[u8]) -> [u8; 256] {
    let mut t = [0u8; 256];
    for (v, out) in t.iter_mut().enumerate() {
        let (i, f) = locate_q16(v as u8, curve.len());
        *out = lerp_q16(curve[i], curve[i + 1], f);
    }
    t
}

/// Interpolates one 8-bit curve at `v` with Q16 arithmetic.
pub fn sample_curve_fixed(curve: &[u8], v: u8) -> u8 {
    let (i, f) = locate_q16(v, curve.len());
    lerp_q16(curve[i], curve[i + 1], f)
}

/// Precomputed state for the integer 3D lookup.
struct FixedLattice {
    nodes: Vec<[u8; 3]>,
    corners: [usize; 8],
    /// Node offset contributed by each axis for every 8-bit input, plus the
    /// Q16 fraction.
    axis: [[(usize, u32); 256]; 3],
}

impl FixedLattice {
    fn new(lut: &Lut3D<u8>) -> Self {
        let s = lut.size();
        let strides = [s * s, s, 1];
        let mut axis = [[(0usize, 0u32); 256]; 3];
        for (a, table) in axis.iter_mut().enumerate() {
            for (v, slot) in table.iter_mut().enumerate() {
                let (cell, frac) = locate_q16(v as u8, s);
                *slot = (cell * strides[a], frac);
            }
        }
        let mut corners = [0; 8];
        for (k, c) in corners.iter_mut().enumerate() {
            *c = ((k >> 2) & 1) * strides[0] + ((k >> 1) & 1) * strides[1] + (k & 1);
        }
        Self {
            nodes: lut.interleaved(),
            corners,
            axis,
        }
    }

    /// Trilinear blend: along blue, then green, then red, keeping Q16
    /// precision between stages.
    #[inline]
    fn sample(&self, rgb: [u8; 3]) -> [u8; 3] {
        let (or, fr) = self.axis[0][rgb[0] as usize];
        let (og, fg) = self.axis[1][rgb[1] as usize];
        let (ob, fb) = self.axis[2][rgb[2] as usize];
        let base = or + og + ob;
        let n: [[u8; 3]; 8] = std::array::from_fn(|k| self.nodes[base + self.corners[k]]);
        let (fr, fg, fb) = (fr as u64, fg as u64, fb as u64);
        let one = ONE as u64;
        std::array::from_fn(|c| {
            // Q16 after the blue stage.
            let b = |k: usize| n[k][c] as u64 * (one - fb) + n[k + 1][c] as u64 * fb;
            let g = |k: usize| (b(k) * (one - fg) + b(k + 2) * fg + HALF) >> 16;
            let r = (g(0) * (one - fr) + g(4) * fr + HALF) >> 16;
            ((r + HALF) >> 16) as u8
        })
    }
}

pub fn apply_lut1d_fixed(lut: &Lut1D<u8>, image: &ImageBuffer<u8>) -> ImageBuffer<u8> {
    let t = [
        curve_table(lut.channel(0)),
        curve_table(lut.channel(1)),
        curve_table(lut.channel(2)),
    ];
    map_pixels(image, |p| {
        [
            t[0][p[0] as usize],
            t[1][p[1] as usize],
            t[2][p[2] as usize],
        ]
    })
}

pub fn apply_lut3d_fixed(lut: &Lut3D<u8>, image: &ImageBuffer<u8>) -> ImageBuffer<u8> {
    let lattice = FixedLattice::new(lut);
    map_pixels(image, |p| lattice.sample(p))
}

/// Integer-only 1D-then-3D cascade. Bit-identical to running
/// [`apply_lut1d_fixed`] then [`apply_lut3d_fixed`].
pub fn apply_cascade_fixed(
    lut1d: &Lut1D<u8>,
    lut3d: &Lut3D<u8>,
    image: &ImageBuffer<u8>,
) -> ImageBuffer<u8> {
    let t = [
        curve_table(lut1d.channel(0)),
        curve_table(lut1d.channel(1)),
        curve_table(lut1d.channel(2)),
    ];
    let lattice = FixedLattice::new(lut3d);
    map_pixels(image, |p| {
        lattice.sample([
            t[0][p[0] as usize],
            t[1][p[1] as usize],
            t[2][p[2] as usize],
        ])
    })
}

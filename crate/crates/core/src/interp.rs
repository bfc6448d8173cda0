//! Applying LUTs to float images.
//!
//! Inputs are clamped to `[0, 1]` before scaling to lattice coordinates. The
//! cell index is clamped to `size - 2`, so `v = 1.0` lands in the last cell
//! with fraction 1 and reads the last entry exactly. Outputs are clamped to
//! `[0, 1]`.

use crate::image::{ImageBuffer, map_pixels};
use crate::lut::{Lut1D, Lut3D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolator {
    #[default]
    Trilinear,
    Tetrahedral,
}

impl std::str::FromStr for Interpolator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trilinear" => Ok(Self::Trilinear),
            "tetrahedral" => Ok(Self::Tetrahedral),
            other => Err(format!("unknown interpolator `{other}`")),
        }
    }
}

/// Cell index and fraction of `v` on a lattice of `size` points.
#[inline]
pub fn locate(v: f32, size: usize) -> (usize, f32) {
    let s = v.clamp(0.0, 1.0) * (size - 1) as f32;
    let i = (s as usize).min(size - 2);
    (i, s - i as f32)
}

/// Linear interpolation of one curve at `v`, clamped to `[0, 1]`.
#[inline]
pub fn sample_curve(curve: &[f32], v: f32) -> f32 {
    let (i, f) = locate(v, curve.len());
    ((1.0 - f) * curve[i] + f * curve[i + 1]).clamp(0.0, 1.0)
}

pub fn apply_lut1d(lut: &Lut1D, image: &ImageBuffer<f32>) -> ImageBuffer<f32> {
    let curves = [lut.channel(0), lut.channel(1), lut.channel(2)];
    map_pixels(image, |p| {
        [
            sample_curve(curves[0], p[0]),
            sample_curve(curves[1], p[1]),
            sample_curve(curves[2], p[2]),
        ]
    })
}

/// Trilinear weights of the eight cell corners, ordered by the bit pattern
/// `(dr << 2) | (dg << 1) | db`.
#[inline]
pub fn corner_weights(fr: f32, fg: f32, fb: f32) -> [f32; 8] {
    let (r0, g0, b0) = (1.0 - fr, 1.0 - fg, 1.0 - fb);
    [
        r0 * g0 * b0,
        r0 * g0 * fb,
        r0 * fg * b0,
        r0 * fg * fb,
        fr * g0 * b0,
        fr * g0 * fb,
        fr * fg * b0,
        fr * fg * fb,
    ]
}

/// The four vertices (as corner bit patterns) and barycentric weights of the
/// tetrahedron containing `(fr, fg, fb)`. Ties resolve with priority
/// `r >= g >= b`.
#[inline]
pub fn tetrahedron(fr: f32, fg: f32, fb: f32) -> ([usize; 4], [f32; 4]) {
    const R: usize = 4;
    const G: usize = 2;
    const B: usize = 1;
    if fr >= fg {
        if fg >= fb {
            ([0, R, R | G, 7], [1.0 - fr, fr - fg, fg - fb, fb])
        } else if fr >= fb {
            ([0, R, R | B, 7], [1.0 - fr, fr - fb, fb - fg, fg])
        } else {
            ([0, B, R | B, 7], [1.0 - fb, fb - fr, fr - fg, fg])
        }
    } else if fg >= fb {
        if fr >= fb {
            ([0, G, R | G, 7], [1.0 - fg, fg - fr, fr - fb, fb])
        } else {
            ([0, G, G | B, 7], [1.0 - fg, fg - fb, fb - fr, fr])
        }
    } else {
        ([0, B, G | B, 7], [1.0 - fb, fb - fg, fg - fr, fr])
    }
}

/// A 3D LUT regrouped for per-pixel sampling.
#[derive(Debug, Clone)]
pub struct Lattice {
    size: usize,
    nodes: Vec<[f32; 3]>,
    /// Node offsets of the eight corners relative to the base corner.
    corners: [usize; 8],
}

impl Lattice {
    pub fn new(lut: &Lut3D) -> Self {
        let s = lut.size();
        let mut corners = [0; 8];
        for (k, c) in corners.iter_mut().enumerate() {
            *c = ((k >> 2) & 1) * s * s + ((k >> 1) & 1) * s + (k & 1);
        }
        Self {
            size: s,
            nodes: lut.interleaved(),
            corners,
        }
    }

    #[inline]
    fn cell(&self, rgb: [f32; 3]) -> (usize, [f32; 3]) {
        let s = self.size;
        let (ir, fr) = locate(rgb[0], s);
        let (ig, fg) = locate(rgb[1], s);
        let (ib, fb) = locate(rgb[2], s);
        ((ir * s + ig) * s + ib, [fr, fg, fb])
    }

    #[inline]
    pub fn trilinear(&self, rgb: [f32; 3]) -> [f32; 3] {
        let (base, [fr, fg, fb]) = self.cell(rgb);
        let w = corner_weights(fr, fg, fb);
        let mut acc = [0.0f32; 3];
        for (k, &wk) in w.iter().enumerate() {
            let n = &self.nodes[base + self.corners[k]];
            acc[0] += wk * n[0];
            acc[1] += wk * n[1];
            acc[2] += wk * n[2];
        }
        acc.map(|v| v.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn tetrahedral(&self, rgb: [f32; 3]) -> [f32; 3] {
        let (base, [fr, fg, fb]) = self.cell(rgb);
        let (verts, w) = tetrahedron(fr, fg, fb);
        let mut acc = [0.0f32; 3];
        for (&v, &wk) in verts.iter().zip(&w) {
            let n = &self.nodes[base + self.corners[v]];
            acc[0] += wk * n[0];
            acc[1] += wk * n[1];
            acc[2] += wk * n[2];
        }
        acc.map(|v| v.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn sample(&self, rgb: [f32; 3], interp: Interpolator) -> [f32; 3] {
        match interp {
            Interpolator::Trilinear => self.trilinear(rgb),
            Interpolator::Tetrahedral => self.tetrahedral(rgb),
        }
    }
}

pub fn apply_lut3d(
    lut: &Lut3D,
    image: &ImageBuffer<f32>,
    interp: Interpolator,
) -> ImageBuffer<f32> {
    let lattice = Lattice::new(lut);
    match interp {
        Interpolator::Trilinear => map_pixels(image, |p| lattice.trilinear(p)),
        Interpolator::Tetrahedral => map_pixels(image, |p| lattice.tetrahedral(p)),
    }
}

pub fn apply_lut3d_trilinear(lut: &Lut3D, image: &ImageBuffer<f32>) -> ImageBuffer<f32> {
    apply_lut3d(lut, image, Interpolator::Trilinear)
}

pub fn apply_lut3d_tetrahedral(lut: &Lut3D, image: &ImageBuffer<f32>) -> ImageBuffer<f32> {
    apply_lut3d(lut, image, Interpolator::Tetrahedral)
}

/// 1D stage then 3D stage, fused per pixel. Produces the same bits as
/// running [`apply_lut1d`] followed by [`apply_lut3d`].
pub fn apply_cascade_with(
    lut1d: &Lut1D,
    lut3d: &Lut3D,
    image: &ImageBuffer<f32>,
    interp: Interpolator,
) -> ImageBuffer<f32> {
    let curves = [lut1d.channel(0), lut1d.channel(1), lut1d.channel(2)];
    let lattice = Lattice::new(lut3d);
    let stage1 = |p: [f32; 3]| {
        [
            sample_curve(curves[0], p[0]),
            sample_curve(curves[1], p[1]),
            sample_curve(curves[2], p[2]),
        ]
    };
    match interp {
        Interpolator::Trilinear => map_pixels(image, |p| lattice.trilinear(stage1(p))),
        Interpolator::Tetrahedral => map_pixels(image, |p| lattice.tetrahedral(stage1(p))),
    }
}

pub fn apply_cascade(lut1d: &Lut1D, lut3d: &Lut3D, image: &ImageBuffer<f32>) -> ImageBuffer<f32> {
    apply_cascade_with(lut1d, lut3d, image, Interpolator::Trilinear)
}

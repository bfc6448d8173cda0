//! Shared fixtures and brute-force reference implementations.
//!
//! The oracles here work in f64 straight from the definitions and share no
//! code with the kernels they check.

#![allow(dead_code)]

use lutcascade::bundle::{BundleConfig, WeightBundle};
use lutcascade::{ImageBuffer, Lut1D, Lut3D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut impl Rng, height: usize, width: usize) -> ImageBuffer<f32> {
    let data = (0..3 * height * width)
        .map(|_| rng.random::<f32>())
        .collect();
    ImageBuffer::new(height, width, data).unwrap()
}

pub fn random_image_u8(rng: &mut impl Rng, height: usize, width: usize) -> ImageBuffer<u8> {
    let data = (0..3 * height * width)
        .map(|_| rng.random::<u8>())
        .collect();
    ImageBuffer::new(height, width, data).unwrap()
}

pub fn random_lut1d(rng: &mut impl Rng, size: usize) -> Lut1D {
    Lut1D::new(size, (0..3 * size).map(|_| rng.random::<f32>()).collect()).unwrap()
}

pub fn random_lut3d(rng: &mut impl Rng, size: usize) -> Lut3D {
    Lut3D::new(
        size,
        (0..3 * size * size * size)
            .map(|_| rng.random::<f32>())
            .collect(),
    )
    .unwrap()
}

/// Non-decreasing curves built from sorted random increments.
pub fn monotone_lut1d(rng: &mut impl Rng, size: usize) -> Lut1D {
    let mut values = Vec::with_capacity(3 * size);
    for _ in 0..3 {
        let mut steps: Vec<f32> = (0..size).map(|_| rng.random::<f32>()).collect();
        steps[0] = 0.0;
        let total: f32 = steps.iter().sum();
        let mut acc = 0.0;
        for s in steps {
            acc += s;
            values.push((acc / total).min(1.0));
        }
    }
    Lut1D::new(size, values).unwrap()
}

/// Identity plus a low-frequency color twist, staying inside [0, 1].
pub fn smooth_lut3d(rng: &mut impl Rng, size: usize) -> Lut3D {
    let phase: [f32; 3] = [rng.random(), rng.random(), rng.random()];
    let amp: f32 = rng.random_range(0.03..0.08);
    let d = (size - 1) as f32;
    let n = size * size * size;
    let mut values = vec![0.0; 3 * n];
    for r in 0..size {
        for g in 0..size {
            for b in 0..size {
                let p = [r as f32 / d, g as f32 / d, b as f32 / d];
                let i = (r * size + g) * size + b;
                for c in 0..3 {
                    let mix = p[(c + 1) % 3] - p[(c + 2) % 3];
                    let twist = amp * (std::f32::consts::PI * (p[c] + mix + phase[c])).sin();
                    values[c * n + i] = (p[c] + twist * p[c] * (1.0 - p[c]) * 4.0).clamp(0.0, 1.0);
                }
            }
        }
    }
    Lut3D::new(size, values).unwrap()
}

/// Smooth monotone gamma-like curves.
pub fn smooth_lut1d(rng: &mut impl Rng, size: usize) -> Lut1D {
    let mut values = Vec::with_capacity(3 * size);
    for _ in 0..3 {
        let gamma: f32 = rng.random_range(0.6..1.6);
        for i in 0..size {
            values.push((i as f32 / (size - 1) as f32).powf(gamma));
        }
    }
    Lut1D::new(size, values).unwrap()
}

fn position(v: f64, size: usize) -> (usize, f64) {
    let s = v.clamp(0.0, 1.0) * (size - 1) as f64;
    let i = (s.floor() as usize).min(size - 2);
    (i, s - i as f64)
}

/// Piecewise-linear curve evaluated directly.
pub fn oracle_curve(curve: &[f32], v: f64) -> f64 {
    let (i, f) = position(v, curve.len());
    let y = curve[i] as f64 + f * (curve[i + 1] as f64 - curve[i] as f64);
    y.clamp(0.0, 1.0)
}

fn node(lut: &Lut3D, c: usize, r: usize, g: usize, b: usize) -> f64 {
    lut.values()[((c * lut.size() + r) * lut.size() + g) * lut.size() + b] as f64
}

/// Sum over the eight cell corners of the product of per-axis weights.
pub fn oracle_trilinear(lut: &Lut3D, rgb: [f64; 3]) -> [f64; 3] {
    let s = lut.size();
    let loc = rgb.map(|v| position(v, s));
    let mut out = [0.0; 3];
    for dr in 0..2 {
        for dg in 0..2 {
            for db in 0..2 {
                let w = [dr, dg, db]
                    .iter()
                    .zip(&loc)
                    .map(|(&d, &(_, f))| if d == 1 { f } else { 1.0 - f })
                    .product::<f64>();
                for (c, o) in out.iter_mut().enumerate() {
                    *o += w * node(lut, c, loc[0].0 + dr, loc[1].0 + dg, loc[2].0 + db);
                }
            }
        }
    }
    out.map(|v| v.clamp(0.0, 1.0))
}

/// Walks from the cell origin to the far corner, stepping along axes in
/// order of decreasing fraction; vertex weights are the gaps between
/// consecutive sorted fractions.
pub fn oracle_tetrahedral(lut: &Lut3D, rgb: [f64; 3]) -> [f64; 3] {
    let s = lut.size();
    let loc = rgb.map(|v| position(v, s));
    let mut axes = [0usize, 1, 2];
    axes.sort_by(|&a, &b| loc[b].1.partial_cmp(&loc[a].1).unwrap().then(a.cmp(&b)));
    let fr = axes.map(|a| loc[a].1);
    let weights = [1.0 - fr[0], fr[0] - fr[1], fr[1] - fr[2], fr[2]];
    let mut corner = [loc[0].0, loc[1].0, loc[2].0];
    let mut out = [0.0; 3];
    for (step, w) in weights.iter().enumerate() {
        if step > 0 {
            corner[axes[step - 1]] += 1;
        }
        for (c, o) in out.iter_mut().enumerate() {
            *o += w * node(lut, c, corner[0], corner[1], corner[2]);
        }
    }
    out.map(|v| v.clamp(0.0, 1.0))
}

/// Half-pixel-center bilinear sample of one plane.
pub fn oracle_bilinear(
    plane: &[f32],
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
    y: usize,
    x: usize,
) -> f64 {
    let coord = |d: usize, src: usize, dst: usize| {
        ((d as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64)
    };
    let (sy, sx) = (coord(y, h, oh), coord(x, w, ow));
    let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
    let p = |yy: usize, xx: usize| plane[yy * w + xx] as f64;
    (1.0 - fy) * ((1.0 - fx) * p(y0, x0) + fx * p(y0, x1))
        + fy * ((1.0 - fx) * p(y1, x0) + fx * p(y1, x1))
}

pub fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f32::max)
}

pub fn with_threads<R: Send>(n: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .unwrap()
        .install(f)
}

/// Uniform random tensors in `[-scale, scale]`, InstanceNorm gammas in
/// `[0.5, 1.5]`.
pub fn random_bundle(config: BundleConfig, seed: u64, scale: f32) -> WeightBundle {
    let mut b = WeightBundle::zeros(config).unwrap();
    let mut r = rng(seed);
    let names: Vec<(String, usize)> = b.tensors().map(|(n, t)| (n.to_string(), t.len())).collect();
    for (name, n) in names {
        let v = if name.ends_with(".gamma") {
            (0..n).map(|_| r.random_range(0.5..1.5)).collect()
        } else {
            (0..n).map(|_| r.random_range(-scale..scale)).collect()
        };
        b.set_f32(&name, v).unwrap();
    }
    b
}

/// A random backbone with generators perturbing the identity bundle, so the
/// predicted LUTs stay in a realistic range.
pub fn near_identity_bundle(config: BundleConfig, seed: u64) -> WeightBundle {
    use lutcascade::bundle::{GEN1D_W, GEN3D_B1, GEN3D_B2, GEN3D_W1, GEN3D_W2};
    use lutcascade::generators::make_identity_bundle;
    let random = random_bundle(config, seed, 0.3);
    let mut b =
        make_identity_bundle(config.m, config.lut1d_size, config.lut3d_size, config.rank).unwrap();
    let mut r = rng(seed ^ 0x5eed);
    for (name, t) in random.tensors() {
        if name.starts_with("backbone.") {
            b.set(name, t.clone()).unwrap();
        }
    }
    let e = config.context_len();
    let n1 = 3 * config.lut1d_size;
    let n3 = 3 * config.lut3d_size.pow(3);
    let k = config.rank;
    b.set_f32(
        GEN1D_W,
        (0..n1 * e).map(|_| r.random_range(-0.05..0.05)).collect(),
    )
    .unwrap();
    b.set_f32(
        GEN3D_W1,
        (0..k * e).map(|_| r.random_range(-0.2..0.2)).collect(),
    )
    .unwrap();
    b.set_f32(
        GEN3D_B1,
        (0..k).map(|_| r.random_range(-0.5..0.5)).collect(),
    )
    .unwrap();
    b.set_f32(
        GEN3D_W2,
        (0..n3 * k).map(|_| r.random_range(-0.03..0.03)).collect(),
    )
    .unwrap();
    let mut b2 = b.values(GEN3D_B2).unwrap().into_owned();
    for v in &mut b2 {
        *v += r.random_range(-0.02..0.02);
    }
    b.set_f32(GEN3D_B2, b2).unwrap();
    b
}

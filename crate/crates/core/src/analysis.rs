//! Measurement toolkit: 3D LUT cell utilization, histogram statistics,
//! histogram equalization, and PSNR / SSIM / CIELAB ΔE quality metrics.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::image::{ImageBuffer, Sample, check_same_dims};
use crate::lut::Lut1D;

pub const HIST_BINS: usize = 256;

/// Fraction of the `(size - 1)³` interpolation cells that receive at least
/// one pixel. A pixel falls in the cell of its clamped lattice coordinates,
/// with the top boundary belonging to the last cell.
pub fn cell_utilization(image: &ImageBuffer<f32>, size: usize) -> Result<f64> {
    if size < 2 {
        return Err(Error::InvalidSize {
            what: "3D LUT size",
            size,
            min: 2,
        });
    }
    let cells = size - 1;
    let total = cells * cells * cells;
    let mut seen = vec![false; total];
    let cell = |v: f32| ((v.clamp(0.0, 1.0) * cells as f32) as usize).min(cells - 1);
    let [r, g, b] = image.planes();
    let mut occupied = 0usize;
    for i in 0..image.pixel_count() {
        let idx = (cell(r[i]) * cells + cell(g[i])) * cells + cell(b[i]);
        if !seen[idx] {
            seen[idx] = true;
            occupied += 1;
        }
    }
    Ok(occupied as f64 / total as f64)
}

fn normalize(counts: [u64; HIST_BINS]) -> Result<Vec<f64>> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::EmptyImage);
    }
    Ok(counts.iter().map(|&c| c as f64 / n as f64).collect())
}

/// Normalized 256-bin histogram of one channel. Float samples are first
/// rounded to 8 bits.
pub fn histogram<T: Sample>(channel: &[T]) -> Result<Vec<f64>> {
    let mut counts = [0u64; HIST_BINS];
    for &v in channel {
        counts[u8::from_unit(v.to_unit()) as usize] += 1;
    }
    normalize(counts)
}

pub fn channel_histograms<T: Sample>(image: &ImageBuffer<T>) -> Result<[Vec<f64>; 3]> {
    let [r, g, b] = image.planes();
    Ok([histogram(r)?, histogram(g)?, histogram(b)?])
}

/// Population variance of the bin masses; 0 for a perfectly flat histogram.
pub fn histogram_variance(hist: &[f64]) -> f64 {
    let n = hist.len() as f64;
    let mean = hist.iter().sum::<f64>() / n;
    hist.iter().map(|&p| (p - mean).powi(2)).sum::<f64>() / n
}

pub fn histogram_variances<T: Sample>(image: &ImageBuffer<T>) -> Result<[f64; 3]> {
    let h = channel_histograms(image)?;
    Ok([
        histogram_variance(&h[0]),
        histogram_variance(&h[1]),
        histogram_variance(&h[2]),
    ])
}

/// `Σ (x - y)² / (x + y)`, skipping bins with zero combined mass.
pub fn chi_square_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .filter(|&(&x, &y)| x + y > 0.0)
        .map(|(&x, &y)| (x - y).powi(2) / (x + y))
        .sum())
}

/// Per-channel χ² between two images' histograms.
pub fn chi_square_channels<A: Sample, B: Sample>(
    a: &ImageBuffer<A>,
    b: &ImageBuffer<B>,
) -> Result<[f64; 3]> {
    let (ha, hb) = (channel_histograms(a)?, channel_histograms(b)?);
    Ok([
        chi_square_distance(&ha[0], &hb[0])?,
        chi_square_distance(&ha[1], &hb[1])?,
        chi_square_distance(&ha[2], &hb[2])?,
    ])
}

fn equalize_channel(channel: &[u8]) -> Vec<u8> {
    let mut counts = [0u64; HIST_BINS];
    for &v in channel {
        counts[v as usize] += 1;
    }
    let n = channel.len() as u64;
    let mut cdf = [0u64; HIST_BINS];
    let mut acc = 0;
    for (c, &k) in cdf.iter_mut().zip(&counts) {
        acc += k;
        *c = acc;
    }
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    let mut map = [0u8; HIST_BINS];
    if n > cdf_min {
        let denom = (n - cdf_min) as f64;
        for (m, &c) in map.iter_mut().zip(&cdf) {
            *m = ((c.saturating_sub(cdf_min)) as f64 / denom * 255.0).round() as u8;
        }
    }
    channel.iter().map(|&v| map[v as usize]).collect()
}

/// Classic per-channel histogram equalization,
/// `v -> round((cdf(v) - cdf_min) / (N - cdf_min) * 255)`. A constant channel
/// (`N == cdf_min`) maps to 0.
pub fn histogram_equalize(image: &ImageBuffer<u8>) -> ImageBuffer<u8> {
    let mut data = Vec::with_capacity(image.data().len());
    for plane in image.planes() {
        data.extend(equalize_channel(plane));
    }
    ImageBuffer::new(image.height(), image.width(), data).expect("same shape")
}

/// A 1D LUT whose curves are the image's own per-channel empirical CDFs
/// sampled at the lattice points, which spreads the channel values toward a
/// uniform distribution.
pub fn flattening_lut1d(image: &ImageBuffer<f32>, size: usize) -> Result<Lut1D> {
    if image.is_empty() {
        return Err(Error::EmptyImage);
    }
    let n = image.pixel_count() as f64;
    let mut values = Vec::with_capacity(3 * size);
    for plane in image.planes() {
        let mut sorted: Vec<f32> = plane.to_vec();
        sorted.sort_by(f32::total_cmp);
        for i in 0..size {
            let x = i as f32 / (size - 1) as f32;
            let below = sorted.partition_point(|&v| v <= x);
            values.push((below as f64 / n) as f32);
        }
    }
    Lut1D::new(size, values)
}

fn mse<A: Sample, B: Sample>(a: &ImageBuffer<A>, b: &ImageBuffer<B>) -> f64 {
    let n = a.data().len() as f64;
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x.to_unit() as f64 - y.to_unit() as f64;
            d * d
        })
        .sum::<f64>()
        / n
}

/// `10 log10(MAX² / MSE)` over all channels; `+inf` for identical images.
/// Computed on the unit scale, which is the same as using the bit depth's
/// MAX on raw values.
pub fn psnr<T: Sample>(a: &ImageBuffer<T>, b: &ImageBuffer<T>) -> Result<f64> {
    check_same_dims(a, b)?;
    if a.is_empty() {
        return Err(Error::EmptyImage);
    }
    if a.data() == b.data() {
        return Ok(f64::INFINITY);
    }
    let m = mse(a, b);
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / m).log10())
}

/// Normalized 1D Gaussian taps.
fn gaussian_kernel(len: usize, sigma: f64) -> Vec<f64> {
    let c = (len / 2) as f64;
    let k: Vec<f64> = (0..len)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable filtering, valid region only.
fn filter_valid(src: &[f64], h: usize, w: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let ow = w + 1 - n;
    let oh = h + 1 - n;
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * tmp[(y + i) * ow + x])
                .sum();
        }
    }
    (out, oh, ow)
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn ssim_channel(x: &[f64], y: &[f64], h: usize, w: usize, k: &[f64]) -> f64 {
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let (mx, _, _) = filter_valid(x, h, w, k);
    let (my, _, _) = filter_valid(y, h, w, k);
    let (sxx, _, _) = filter_valid(&xx, h, w, k);
    let (syy, _, _) = filter_valid(&yy, h, w, k);
    let (sxy, _, _) = filter_valid(&xy, h, w, k);
    let n = mx.len() as f64;
    (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum::<f64>()
        / n
}

/// Mean SSIM with an 11x11 Gaussian window (σ = 1.5), K1 = 0.01,
/// K2 = 0.03, over the valid region, averaged over channels.
pub fn ssim<T: Sample>(a: &ImageBuffer<T>, b: &ImageBuffer<T>) -> Result<f64> {
    check_same_dims(a, b)?;
    let (h, w) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            what: "SSIM",
            height: h,
            width: w,
            min: SSIM_WINDOW,
        });
    }
    let k = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA);
    let (pa, pb) = (a.planes(), b.planes());
    let mut total = 0.0;
    for c in 0..3 {
        let x: Vec<f64> = pa[c].iter().map(|v| v.to_unit() as f64).collect();
        let y: Vec<f64> = pb[c].iter().map(|v| v.to_unit() as f64).collect();
        total += ssim_channel(&x, &y, h, w, &k);
    }
    Ok(total / 3.0)
}

const D65_WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// sRGB (unit range) → linear → XYZ (D65) → CIELAB.
pub fn srgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    let f = |t: f64| {
        const D: f64 = 6.0 / 29.0;
        if t > D * D * D {
            t.cbrt()
        } else {
            t / (3.0 * D * D) + 4.0 / 29.0
        }
    };
    let (fx, fy, fz) = (
        f(x / D65_WHITE[0]),
        f(y / D65_WHITE[1]),
        f(z / D65_WHITE[2]),
    );
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Mean CIE76 color difference between two sRGB images.
pub fn delta_e_ab<T: Sample>(a: &ImageBuffer<T>, b: &ImageBuffer<T>) -> Result<f64> {
    check_same_dims(a, b)?;
    if a.is_empty() {
        return Err(Error::EmptyImage);
    }
    let (pa, pb) = (a.planes(), b.planes());
    let px = |p: &[&[T]; 3], i: usize| [0, 1, 2].map(|c| p[c][i].to_unit() as f64);
    let n = a.pixel_count();
    let sum: f64 = (0..n)
        .map(|i| {
            let la = srgb_to_lab(px(&pa, i));
            let lb = srgb_to_lab(px(&pb, i));
            ((la[0] - lb[0]).powi(2) + (la[1] - lb[1]).powi(2) + (la[2] - lb[2]).powi(2)).sqrt()
        })
        .sum();
    Ok(sum / n as f64)
}

/// Serializes non-finite values as the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn serialize_metric<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        None => s.serialize_none(),
        Some(x) if x.is_finite() => s.serialize_f64(*x),
        Some(x) if x.is_nan() => s.serialize_str("nan"),
        Some(x) if *x > 0.0 => s.serialize_str("inf"),
        Some(_) => s.serialize_str("-inf"),
    }
}

/// Combined report. Fields that need a reference image are `None` without
/// one.
#[derive(Debug, Clone, Serialize, Default)]
pub struct AnalysisReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_utilization: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hist_variance: Option<[f64; 3]>,
    /// Mean over channels of the per-channel χ² distance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_square: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_square_channels: Option<[f64; 3]>,
    #[serde(
        serialize_with = "serialize_metric",
        skip_serializing_if = "Option::is_none"
    )]
    pub psnr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_e: Option<f64>,
}

impl AnalysisReport {
    /// Distribution statistics of `image`, plus χ² against `reference`.
    pub fn distribution<T: Sample>(
        image: &ImageBuffer<T>,
        reference: Option<&ImageBuffer<T>>,
        lut3d_size: usize,
    ) -> Result<Self> {
        let mut r = Self {
            cell_utilization: Some(cell_utilization(&image.to_f32(), lut3d_size)?),
            hist_variance: Some(histogram_variances(image)?),
            ..Self::default()
        };
        if let Some(reference) = reference {
            let ch = chi_square_channels(image, reference)?;
            r.chi_square = Some(ch.iter().sum::<f64>() / 3.0);
            r.chi_square_channels = Some(ch);
        }
        Ok(r)
    }

    /// PSNR, SSIM and ΔE of `pred` against `gt`.
    pub fn quality<T: Sample>(pred: &ImageBuffer<T>, gt: &ImageBuffer<T>) -> Result<Self> {
        Ok(Self {
            psnr: Some(psnr(pred, gt)?),
            ssim: Some(ssim(pred, gt)?),
            delta_e: Some(delta_e_ab(pred, gt)?),
            ..Self::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_histogram_variance_closed_form() {
        let ch = vec![77u8; 100];
        let h = histogram(&ch).unwrap();
        let expected =
            (1.0 - 1.0 / 256.0f64).powi(2) / 256.0 + 255.0 * (1.0 / 256.0f64).powi(2) / 256.0;
        assert!((histogram_variance(&h) - expected).abs() < 1e-15);
    }

    #[test]
    fn flat_histogram_has_zero_variance() {
        let ch: Vec<u8> = (0..=255).cycle().take(256 * 4).collect();
        assert_eq!(histogram_variance(&histogram(&ch).unwrap()), 0.0);
    }

    #[test]
    fn chi_square_identities() {
        let mut a = vec![0.0; 256];
        let mut b = vec![0.0; 256];
        a[3] = 1.0;
        b[200] = 1.0;
        assert_eq!(chi_square_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(chi_square_distance(&a, &b).unwrap(), 2.0);
        assert!(chi_square_distance(&a, &b[..10]).is_err());
    }

    #[test]
    fn equalize_two_levels() {
        let mut ch = vec![0u8; 25];
        ch.extend(vec![255u8; 75]);
        let img = ImageBuffer::new(10, 10, [ch.clone(), ch.clone(), ch].concat()).unwrap();
        let out = histogram_equalize(&img);
        assert_eq!(out, img);
    }

    #[test]
    fn equalize_constant_maps_to_zero() {
        let img = ImageBuffer::<u8>::filled(4, 4, [9, 200, 0]).unwrap();
        assert!(histogram_equalize(&img).data().iter().all(|&v| v == 0));
    }

    #[test]
    fn equalize_uniform_is_unchanged() {
        let ch: Vec<u8> = (0..=255).collect();
        let img = ImageBuffer::new(16, 16, [ch.clone(), ch.clone(), ch].concat()).unwrap();
        let out = histogram_equalize(&img);
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!(a.abs_diff(*b) <= 1);
        }
    }

    #[test]
    fn single_color_utilization() {
        let img = ImageBuffer::filled(5, 5, [0.2f32, 0.7, 0.9]).unwrap();
        assert_eq!(cell_utilization(&img, 33).unwrap(), 1.0 / 32768.0);
        assert!(cell_utilization(&img, 1).is_err());
    }

    #[test]
    fn lab_of_black_and_white() {
        let black = srgb_to_lab([0.0; 3]);
        let white = srgb_to_lab([1.0; 3]);
        assert!(black[0].abs() < 1e-9);
        assert!((white[0] - 100.0).abs() < 1e-3);
        assert!(white[1].abs() < 1e-2 && white[2].abs() < 1e-2);
    }

    #[test]
    fn metric_serialization() {
        let r = AnalysisReport {
            psnr: Some(f64::INFINITY),
            ..Default::default()
        };
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"psnr":"inf"}"#);
    }
}

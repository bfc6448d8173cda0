//! Wall-time benchmark over seeded synthetic images.

use std::hint::black_box;
use std::time::Instant;

use clap::ValueEnum;
use lutcascade::quant::{apply_cascade_fixed, quantize_lut1d, quantize_lut3d};
use lutcascade::{Enhancer, ImageBuffer, Interpolator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    #[value(name = "480p")]
    #[serde(rename = "480p")]
    P480,
    #[value(name = "720p")]
    #[serde(rename = "720p")]
    P720,
    #[value(name = "4k")]
    #[serde(rename = "4k")]
    K4,
    #[value(name = "8k")]
    #[serde(rename = "8k")]
    K8,
}

impl Resolution {
    /// `(height, width)`.
    pub fn dims(self) -> (usize, usize) {
        match self {
            Resolution::P480 => (480, 640),
            Resolution::P720 => (720, 1280),
            Resolution::K4 => (2160, 3840),
            Resolution::K8 => (4320, 7680),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Float,
    Fixed,
    /// Both paths, plus their speed ratio.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Backbone, generators and cascade.
    Full,
    /// The 1D+3D cascade alone, with LUTs predicted once up front.
    #[value(name = "luts_only")]
    LutsOnly,
}

/// Wall-time summary in milliseconds.
#[derive(Debug, Clone, Serialize)]
pub struct Stats {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub samples_ms: Vec<f64>,
}

impl Stats {
    pub fn from_samples(samples_ms: Vec<f64>) -> Self {
        let mut sorted = samples_ms.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        // Nearest-rank percentile.
        let rank = |p: f64| sorted[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Self {
            mean_ms: sorted.iter().sum::<f64>() / n as f64,
            median_ms: median,
            p95_ms: rank(0.95),
            min_ms: sorted[0],
            max_ms: sorted[n - 1],
            samples_ms,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Run {
    pub mode: Mode,
    #[serde(flatten)]
    pub stats: Stats,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub measures: &'static str,
    pub resolution: Resolution,
    pub height: usize,
    pub width: usize,
    pub stage: Stage,
    pub interpolator: String,
    pub threads: usize,
    pub seed: u64,
    pub warmup: usize,
    pub iterations: usize,
    pub runs: Vec<Run>,
    /// Float median over fixed median, when both ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_speedup: Option<f64>,
}

pub struct BenchPlan {
    pub resolution: Resolution,
    pub iterations: usize,
    pub warmup: usize,
    pub mode: Mode,
    pub stage: Stage,
    pub interpolator: Interpolator,
    pub seed: u64,
}

fn sample<R>(warmup: usize, iterations: usize, mut f: impl FnMut() -> R) -> Stats {
    for _ in 0..warmup {
        black_box(f());
    }
    let samples = (0..iterations)
        .map(|_| {
            let t = Instant::now();
            black_box(f());
            t.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    Stats::from_samples(samples)
}

pub fn seeded_image(height: usize, width: usize, seed: u64) -> ImageBuffer<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..3 * height * width).map(|_| rng.random()).collect();
    ImageBuffer::new(height, width, data).expect("valid dimensions")
}

pub fn run(plan: &BenchPlan, enhancer: &Enhancer) -> CliResult<BenchReport> {
    let (h, w) = plan.resolution.dims();
    let img8 = seeded_image(h, w, plan.seed);
    let imgf = img8.to_f32();
    let modes: &[Mode] = match plan.mode {
        Mode::Both => &[Mode::Float, Mode::Fixed],
        Mode::Float => &[Mode::Float],
        Mode::Fixed => &[Mode::Fixed],
    };

    let mut runs = Vec::new();
    for &mode in modes {
        let stats = match (plan.stage, mode) {
            (Stage::Full, Mode::Float) => {
                enhancer.enhance(&imgf, plan.interpolator)?;
                sample(plan.warmup, plan.iterations, || {
                    enhancer.enhance(&imgf, plan.interpolator)
                })
            }
            (Stage::Full, _) => {
                enhancer.enhance_fixed(&img8)?;
                sample(plan.warmup, plan.iterations, || {
                    enhancer.enhance_fixed(&img8)
                })
            }
            (Stage::LutsOnly, Mode::Float) => {
                let p = enhancer.predict(&imgf)?;
                sample(plan.warmup, plan.iterations, || {
                    lutcascade::interp::apply_cascade_with(
                        &p.lut1d,
                        &p.lut3d,
                        &imgf,
                        plan.interpolator,
                    )
                })
            }
            (Stage::LutsOnly, _) => {
                let p = enhancer.predict(&imgf)?;
                let (q1, q3) = (quantize_lut1d(&p.lut1d), quantize_lut3d(&p.lut3d));
                sample(plan.warmup, plan.iterations, || {
                    apply_cascade_fixed(&q1, &q3, &img8)
                })
            }
        };
        runs.push(Run { mode, stats });
    }
    let fixed_speedup = match runs.as_slice() {
        [f, q] => Some(f.stats.median_ms / q.stats.median_ms),
        _ => None,
    };
    Ok(BenchReport {
        measures: "compute only: excludes PNG decode/encode and file I/O; input synthesized in memory",
        resolution: plan.resolution,
        height: h,
        width: w,
        stage: plan.stage,
        interpolator: format!("{:?}", plan.interpolator).to_lowercase(),
        threads: rayon::current_num_threads(),
        seed: plan.seed,
        warmup: plan.warmup,
        iterations: plan.iterations,
        runs,
        fixed_speedup,
    })
}

//! `lutcascade`: enhance images with an image-adaptive 1D+3D LUT cascade,
//! apply and inspect LUT files, compute quality metrics and benchmark.
//!
//! Reports are JSON on stdout, or in the file given by `--out`. Exit codes:
//! 0 success, 2 I/O or file-format error, 3 model or shape error.

mod bench;
mod error;
mod imageio;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lutcascade::analysis::AnalysisReport;
use lutcascade::bundle::{BundleConfig, WeightBundle, read_manifest_json};
use lutcascade::generators::make_identity_bundle;
use lutcascade::interp::{apply_lut1d, apply_lut3d};
use lutcascade::lutio::{read_cube, read_lut1d, write_cube, write_lut1d};
use lutcascade::quant::{footprint, quantize_bundle};
use lutcascade::{Enhancer, ImageBuffer, Interpolator};
use serde::Serialize;
use serde_json::json;

use crate::bench::{BenchPlan, Mode, Resolution, Stage};
use crate::error::{CliError, CliResult};
use crate::imageio::Loaded;

#[derive(Parser)]
#[command(
    name = "lutcascade",
    version,
    about = "Image-adaptive 1D+3D LUT cascade"
)]
struct Cli {
    /// Worker threads for the pixel kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Report {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Predict LUTs from the image and apply them.
    Enhance {
        input: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Apply the LUTs in 8-bit fixed point.
        #[arg(long)]
        fixed_point: bool,
        #[arg(long, default_value = "trilinear")]
        interpolator: Interpolator,
        /// Directory for the predicted `lut1d.txt` and `lut3d.cube`.
        #[arg(long)]
        dump_luts: Option<PathBuf>,
        /// 16-bit PNG of the image after the 1D stage.
        #[arg(long)]
        dump_intermediate: Option<PathBuf>,
        #[command(flatten)]
        report: Report,
    },
    /// Apply LUT files: 1D first, then 3D; a missing stage is skipped.
    ApplyLut {
        input: PathBuf,
        #[arg(long)]
        lut1d: Option<PathBuf>,
        #[arg(long)]
        lut3d: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value = "trilinear")]
        interpolator: Interpolator,
    },
    /// Cell utilization, histogram variance and chi-square distance.
    Analyze {
        input: PathBuf,
        #[arg(long)]
        reference: Option<PathBuf>,
        /// 3D LUT size whose cells are counted.
        #[arg(long, default_value_t = 33)]
        lut_size: usize,
        #[command(flatten)]
        report: Report,
    },
    /// PSNR, SSIM and CIE76 colour difference of a prediction.
    Metrics {
        pred: PathBuf,
        gt: PathBuf,
        #[command(flatten)]
        report: Report,
    },
    /// Time the pipeline on seeded synthetic images.
    Bench {
        #[arg(long, value_enum, default_value = "480p")]
        resolution: Resolution,
        #[arg(long, default_value_t = 100)]
        iterations: usize,
        #[arg(long, default_value_t = 3)]
        warmup: usize,
        #[arg(long, value_enum, default_value = "float")]
        mode: Mode,
        #[arg(long, value_enum, default_value = "full")]
        stage: Stage,
        #[arg(long, default_value = "trilinear")]
        interpolator: Interpolator,
        /// Weight bundle; defaults to an identity bundle with m=6, S=9, K=3.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        report: Report,
    },
    /// Quantize the generator weights to 8 bits.
    Quantize {
        weights_in: PathBuf,
        weights_out: PathBuf,
        #[command(flatten)]
        report: Report,
    },
    /// Write a bundle whose pipeline reproduces its input.
    InitIdentity {
        output: PathBuf,
        #[arg(long, default_value_t = 8)]
        m: usize,
        #[arg(long = "s-o", default_value_t = 9)]
        lut1d_size: usize,
        #[arg(long = "s-t", default_value_t = 9)]
        lut3d_size: usize,
        #[arg(long = "k", default_value_t = 3)]
        rank: usize,
    },
    /// Print a bundle's manifest and parameter counts.
    Inspect {
        weights: PathBuf,
        #[command(flatten)]
        report: Report,
    },
}

fn emit<T: Serialize>(value: &T, report: &Report) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    match &report.out {
        Some(path) => fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn load_bundle(path: &Path) -> CliResult<WeightBundle> {
    WeightBundle::load(path).map_err(|e| {
        let code = CliError::from(e);
        CliError {
            message: format!("{}: {}", path.display(), code.message),
            ..code
        }
    })
}

fn enhance(
    input: &Path,
    weights: &Path,
    output: &Path,
    fixed_point: bool,
    interp: Interpolator,
    dump_luts: Option<&Path>,
    dump_intermediate: Option<&Path>,
) -> CliResult<serde_json::Value> {
    let bundle = load_bundle(weights)?;
    let image = imageio::load(input)?;
    let enhancer = Enhancer::new(&bundle)?;
    let float = image.to_f32();
    let prediction = enhancer.predict(&float)?;
    let result = if fixed_point {
        enhancer.enhance_fixed(&image.to_u8())?
    } else {
        enhancer.enhance(&float, interp)?.to_u8()
    };
    imageio::save_u8(&result, output)?;
    if let Some(dir) = dump_luts {
        fs::create_dir_all(dir)?;
        write_lut1d(&prediction.lut1d, dir.join("lut1d.txt"))?;
        write_cube(&prediction.lut3d, dir.join("lut3d.cube"))?;
    }
    if let Some(path) = dump_intermediate {
        imageio::save_u16(&prediction.intermediate(&float).to_u16(), path)?;
    }
    let (h, w) = image.dims();
    Ok(json!({
        "input": input,
        "output": output,
        "height": h,
        "width": w,
        "fixed_point": fixed_point,
        "interpolator": if fixed_point { "trilinear" } else { interp_name(interp) },
        "config": bundle.config(),
        "context": prediction.context.values(),
    }))
}

fn interp_name(interp: Interpolator) -> &'static str {
    match interp {
        Interpolator::Trilinear => "trilinear",
        Interpolator::Tetrahedral => "tetrahedral",
    }
}

fn apply_lut(
    input: &Path,
    lut1d: Option<&Path>,
    lut3d: Option<&Path>,
    output: &Path,
    interp: Interpolator,
) -> CliResult<()> {
    let mut image = imageio::load(input)?.to_f32();
    if let Some(path) = lut1d {
        image = apply_lut1d(&read_lut1d(path)?, &image);
    }
    if let Some(path) = lut3d {
        image = apply_lut3d(&read_cube(path)?, &image, interp);
    }
    imageio::save_u8(&image.to_u8(), output)
}

/// Runs `f` on both images at a shared bit depth: native 8-bit when both are
/// 8-bit, otherwise the unit-scale float view.
fn with_pair<R>(
    a: &Loaded,
    b: &Loaded,
    f8: impl FnOnce(&ImageBuffer<u8>, &ImageBuffer<u8>) -> lutcascade::Result<R>,
    ff: impl FnOnce(&ImageBuffer<f32>, &ImageBuffer<f32>) -> lutcascade::Result<R>,
) -> CliResult<R> {
    Ok(match (a, b) {
        (Loaded::U8(x), Loaded::U8(y)) => f8(x, y)?,
        _ => ff(&a.to_f32(), &b.to_f32())?,
    })
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Enhance {
            input,
            weights,
            output,
            fixed_point,
            interpolator,
            dump_luts,
            dump_intermediate,
            report,
        } => {
            let summary = enhance(
                &input,
                &weights,
                &output,
                fixed_point,
                interpolator,
                dump_luts.as_deref(),
                dump_intermediate.as_deref(),
            )?;
            emit(&summary, &report)
        }
        Command::ApplyLut {
            input,
            lut1d,
            lut3d,
            output,
            interpolator,
        } => apply_lut(
            &input,
            lut1d.as_deref(),
            lut3d.as_deref(),
            &output,
            interpolator,
        ),
        Command::Analyze {
            input,
            reference,
            lut_size,
            report,
        } => {
            let image = imageio::load(&input)?;
            let analysis = match reference {
                Some(path) => {
                    let reference = imageio::load(&path)?;
                    with_pair(
                        &image,
                        &reference,
                        |a, b| AnalysisReport::distribution(a, Some(b), lut_size),
                        |a, b| AnalysisReport::distribution(a, Some(b), lut_size),
                    )?
                }
                None => AnalysisReport::distribution(&image.to_f32(), None, lut_size)?,
            };
            emit(&analysis, &report)
        }
        Command::Metrics { pred, gt, report } => {
            let (p, g) = (imageio::load(&pred)?, imageio::load(&gt)?);
            let metrics = with_pair(&p, &g, AnalysisReport::quality, AnalysisReport::quality)?;
            emit(&metrics, &report)
        }
        Command::Bench {
            resolution,
            iterations,
            warmup,
            mode,
            stage,
            interpolator,
            weights,
            seed,
            report,
        } => {
            if iterations == 0 {
                return Err(CliError::model("--iterations must be at least 1"));
            }
            let bundle = match weights {
                Some(path) => load_bundle(&path)?,
                None => make_identity_bundle(6, 9, 9, 3)?,
            };
            let enhancer = Enhancer::new(&bundle)?;
            let plan = BenchPlan {
                resolution,
                iterations,
                warmup,
                mode,
                stage,
                interpolator,
                seed,
            };
            emit(&bench::run(&plan, &enhancer)?, &report)
        }
        Command::Quantize {
            weights_in,
            weights_out,
            report,
        } => {
            let bundle = load_bundle(&weights_in)?;
            let quantized = quantize_bundle(&bundle)?;
            quantized.save(&weights_out)?;
            let (original, equivalent, reduction) = footprint(&bundle, &quantized);
            emit(
                &json!({
                    "original_parameters": original,
                    "equivalent_parameters": equivalent,
                    "reduction": reduction,
                    "convention": "8-bit tensors count 1/4 of a float parameter",
                }),
                &report,
            )
        }
        Command::InitIdentity {
            output,
            m,
            lut1d_size,
            lut3d_size,
            rank,
        } => {
            BundleConfig::new(m, lut1d_size, lut3d_size, rank).validate()?;
            make_identity_bundle(m, lut1d_size, lut3d_size, rank)?.save(&output)?;
            Ok(())
        }
        Command::Inspect { weights, report } => {
            let bytes = fs::read(&weights)
                .map_err(|e| CliError::io(format!("{}: {e}", weights.display())))?;
            let manifest = read_manifest_json(&bytes)?;
            let bundle = WeightBundle::from_bytes(&bytes)?;
            emit(
                &json!({
                    "manifest": manifest,
                    "parameters": bundle.parameter_counts(),
                    "equivalent_parameters": bundle.equivalent_parameter_count(),
                }),
                &report,
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads
        && let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(error::EXIT_MODEL);
        }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

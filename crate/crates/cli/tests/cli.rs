use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lutcascade::analysis::psnr;
use lutcascade::bundle::{
    BundleConfig, GEN1D_W, GEN3D_B1, GEN3D_B2, GEN3D_W1, GEN3D_W2, WeightBundle,
};
use lutcascade::generators::make_identity_bundle;
use lutcascade::interp::apply_lut1d;
use lutcascade::lutio::write_lut1d;
use lutcascade::{ImageBuffer, Lut1D, Lut3D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lutcascade"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(args: &[&str]) -> Value {
    serde_json::from_slice(&ok(args).stdout).expect("json report")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_u8(seed: u64, h: usize, w: usize) -> ImageBuffer<u8> {
    let mut r = rng(seed);
    ImageBuffer::new(h, w, (0..3 * h * w).map(|_| r.random()).collect()).unwrap()
}

fn write_png(img: &ImageBuffer<u8>, path: &Path) {
    image::RgbImage::from_raw(
        img.width() as u32,
        img.height() as u32,
        img.to_interleaved(),
    )
    .unwrap()
    .save(path)
    .unwrap();
}

fn read_png(path: &Path) -> ImageBuffer<u8> {
    let img = image::open(path).unwrap().to_rgb8();
    ImageBuffer::from_interleaved(img.height() as usize, img.width() as usize, img.as_raw())
        .unwrap()
}

fn max_diff(a: &ImageBuffer<u8>, b: &ImageBuffer<u8>) -> u8 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| x.abs_diff(*y))
        .max()
        .unwrap()
}

/// Random backbone, generators randomly perturbed around an identity LUT
/// squeezed into [0.1, 0.9], so 8-bit LUT quantization never clips.
fn perturbed_bundle(seed: u64) -> WeightBundle {
    let config = BundleConfig::new(2, 9, 9, 3);
    let mut b = make_identity_bundle(2, 9, 9, 3).unwrap();
    let mut r = rng(seed);
    let names: Vec<(String, usize)> = b
        .tensors()
        .filter(|(n, _)| n.starts_with("backbone."))
        .map(|(n, t)| (n.to_string(), t.len()))
        .collect();
    for (name, n) in names {
        let v = if name.ends_with(".gamma") {
            (0..n).map(|_| r.random_range(0.5..1.5)).collect()
        } else {
            (0..n).map(|_| r.random_range(-0.3..0.3)).collect()
        };
        b.set_f32(&name, v).unwrap();
    }
    let e = config.context_len();
    let mut fill = |name: &str, n: usize, a: f32| {
        b.set_f32(name, (0..n).map(|_| r.random_range(-a..a)).collect())
            .unwrap();
    };
    fill(GEN1D_W, 27 * e, 0.05);
    fill(GEN3D_W1, 3 * e, 0.2);
    fill(GEN3D_B1, 3, 0.5);
    fill(GEN3D_W2, 3 * 729 * 3, 0.03);
    let b2: Vec<f32> = Lut3D::identity(9)
        .unwrap()
        .values()
        .iter()
        .map(|v| 0.1 + 0.8 * v)
        .collect();
    b.set_f32(GEN3D_B2, b2).unwrap();
    b
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn png(&self, name: &str, img: &ImageBuffer<u8>) -> PathBuf {
        let p = self.path(name);
        write_png(img, &p);
        p
    }

    fn bundle(&self, name: &str, b: &WeightBundle) -> PathBuf {
        let p = self.path(name);
        b.save(&p).unwrap();
        p
    }
}

#[test]
fn identity_bundle_preserves_input() {
    let f = Fixture::new();
    let weights = f.path("id.sepw");
    ok(&["init-identity", s(&weights), "--m", "2"]);
    let input = f.png("in.png", &random_u8(1, 64, 80));
    let output = f.path("out.png");
    let report = json(&[
        "enhance",
        s(&input),
        "--weights",
        s(&weights),
        "-o",
        s(&output),
    ]);
    assert_eq!(report["width"], 80);
    let p = psnr(&read_png(&input), &read_png(&output)).unwrap();
    assert!(p >= 50.0, "{p}");
    let metrics = json(&["metrics", s(&output), s(&input)]);
    assert!(metrics["psnr"] == "inf" || metrics["psnr"].as_f64().unwrap() >= 50.0);
}

#[test]
fn fixed_point_tracks_float() {
    let f = Fixture::new();
    let weights = f.bundle("w.sepw", &perturbed_bundle(2));
    let input = f.png("in.png", &random_u8(3, 96, 128));
    let (a, b) = (f.path("float.png"), f.path("fixed.png"));
    ok(&["enhance", s(&input), "--weights", s(&weights), "-o", s(&a)]);
    ok(&[
        "enhance",
        s(&input),
        "--weights",
        s(&weights),
        "-o",
        s(&b),
        "--fixed-point",
    ]);
    let (a, b) = (read_png(&a), read_png(&b));
    assert!(max_diff(&a, &b) <= 4);
    assert_ne!(a, read_png(&input));
}

#[test]
fn dumped_stages_reproduce_enhance() {
    let f = Fixture::new();
    let weights = f.bundle("w.sepw", &perturbed_bundle(4));
    let input = f.png("in.png", &random_u8(5, 72, 90));
    let (out, luts, mid) = (f.path("out.png"), f.path("luts"), f.path("mid.png"));
    ok(&[
        "enhance",
        s(&input),
        "--weights",
        s(&weights),
        "-o",
        s(&out),
        "--dump-luts",
        s(&luts),
        "--dump-intermediate",
        s(&mid),
    ]);
    let expected = read_png(&out);

    let from_mid = f.path("from_mid.png");
    ok(&[
        "apply-lut",
        s(&mid),
        "--lut3d",
        s(&luts.join("lut3d.cube")),
        "-o",
        s(&from_mid),
    ]);
    assert!(max_diff(&read_png(&from_mid), &expected) <= 1);

    let from_luts = f.path("from_luts.png");
    ok(&[
        "apply-lut",
        s(&input),
        "--lut1d",
        s(&luts.join("lut1d.txt")),
        "--lut3d",
        s(&luts.join("lut3d.cube")),
        "-o",
        s(&from_luts),
    ]);
    assert!(max_diff(&read_png(&from_luts), &expected) <= 1);

    let img = image::open(&mid).unwrap();
    assert!(matches!(img, image::DynamicImage::ImageRgb16(_)));
}

#[test]
fn enhance_is_reproducible() {
    let f = Fixture::new();
    let weights = f.bundle("w.sepw", &perturbed_bundle(6));
    let input = f.png("in.png", &random_u8(7, 40, 50));
    let (a, b) = (f.path("a.png"), f.path("b.png"));
    for (p, threads) in [(&a, "1"), (&b, "4")] {
        ok(&[
            "--threads",
            threads,
            "enhance",
            s(&input),
            "--weights",
            s(&weights),
            "-o",
            s(p),
            "--interpolator",
            "tetrahedral",
        ]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn apply_lut_stages() {
    let f = Fixture::new();
    let img = random_u8(8, 50, 60);
    let input = f.png("in.png", &img);
    let cube = f.path("id.cube");
    lutcascade::lutio::write_cube(&Lut3D::identity(17).unwrap(), &cube).unwrap();
    let out = f.path("out.png");
    ok(&["apply-lut", s(&input), "--lut3d", s(&cube), "-o", s(&out)]);
    assert!(max_diff(&read_png(&out), &img) <= 1);

    let curve = Lut1D::new(5, [0.0, 0.1, 0.3, 0.7, 1.0].repeat(3)).unwrap();
    let lut1d = f.path("c.txt");
    write_lut1d(&curve, &lut1d).unwrap();
    ok(&["apply-lut", s(&input), "--lut1d", s(&lut1d), "-o", s(&out)]);
    let back = lutcascade::lutio::read_lut1d(&lut1d).unwrap();
    assert_eq!(read_png(&out), apply_lut1d(&back, &img.to_f32()).to_u8());

    ok(&["apply-lut", s(&input), "-o", s(&out)]);
    assert_eq!(read_png(&out), img);
}

#[test]
fn metrics_and_analysis_reports() {
    let f = Fixture::new();
    let mut r = rng(9);
    let a = ImageBuffer::<u8>::new(
        32,
        32,
        (0..3 * 32 * 32).map(|_| r.random_range(0..255)).collect(),
    )
    .unwrap();
    let b = a.map(|v| v + 1);
    let (pa, pb) = (f.png("a.png", &a), f.png("b.png", &b));
    let m = json(&["metrics", s(&pa), s(&pb)]);
    assert!((m["psnr"].as_f64().unwrap() - 48.13).abs() <= 0.01);
    let same = json(&["metrics", s(&pa), s(&pa)]);
    assert_eq!(same["psnr"], "inf");
    assert!((same["ssim"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    assert_eq!(same["delta_e"], 0.0);

    let out = f.path("report.json");
    ok(&[
        "analyze",
        s(&pa),
        "--reference",
        s(&pa),
        "--lut-size",
        "9",
        "--out",
        s(&out),
    ]);
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rep["chi_square"], 0.0);
    assert!(rep["cell_utilization"].as_f64().unwrap() > 0.0);
    assert_eq!(rep["hist_variance"].as_array().unwrap().len(), 3);

    let flat = f.png(
        "flat.png",
        &ImageBuffer::filled(10, 10, [10, 20, 30]).unwrap(),
    );
    let rep = json(&["analyze", s(&flat), "--lut-size", "9"]);
    assert_eq!(rep["cell_utilization"].as_f64().unwrap(), 1.0 / 512.0);
    assert!(rep.get("chi_square").is_none());
}

#[test]
fn sixteen_bit_input() {
    let f = Fixture::new();
    let weights = f.path("id.sepw");
    ok(&["init-identity", s(&weights), "--m", "2"]);
    let mut r = rng(10);
    let (h, w) = (40u32, 48u32);
    let raw: Vec<u16> = (0..3 * h * w).map(|_| r.random()).collect();
    let input = f.path("in16.png");
    image::ImageBuffer::<image::Rgb<u16>, _>::from_raw(w, h, raw.clone())
        .unwrap()
        .save(&input)
        .unwrap();
    let out = f.path("out.png");
    ok(&[
        "enhance",
        s(&input),
        "--weights",
        s(&weights),
        "-o",
        s(&out),
    ]);
    let expected = ImageBuffer::<u16>::from_interleaved(h as usize, w as usize, &raw)
        .unwrap()
        .to_u8();
    assert!(psnr(&read_png(&out), &expected).unwrap() >= 50.0);
}

#[test]
fn quantize_and_inspect() {
    let f = Fixture::new();
    let weights = f.bundle(
        "w.sepw",
        &WeightBundle::zeros(BundleConfig::new(6, 9, 9, 3)).unwrap(),
    );
    let q = f.path("q.sepw");
    let rep = json(&["quantize", s(&weights), s(&q)]);
    assert_eq!(rep["original_parameters"], 49362.0);
    let reduction = rep["reduction"].as_f64().unwrap();
    assert!((0.15..=0.25).contains(&reduction));
    let info = json(&["inspect", s(&q)]);
    assert_eq!(info["parameters"]["total"], 49362);
    assert_eq!(info["equivalent_parameters"], rep["equivalent_parameters"]);
    assert_eq!(info["manifest"]["m"], 6);
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    let input = f.png("in.png", &random_u8(11, 20, 20));
    let weights = f.path("id.sepw");
    ok(&["init-identity", s(&weights), "--m", "2"]);
    let out = f.path("o.png");

    let missing = run(&[
        "enhance",
        s(&f.path("nope.png")),
        "--weights",
        s(&weights),
        "-o",
        s(&out),
    ]);
    assert_eq!(missing.status.code(), Some(2));

    let junk = f.path("junk.sepw");
    std::fs::write(&junk, b"NOPE0000000000000000").unwrap();
    let bad = run(&["enhance", s(&input), "--weights", s(&junk), "-o", s(&out)]);
    assert_eq!(bad.status.code(), Some(2));

    let other = f.png("other.png", &random_u8(12, 20, 30));
    let mismatch = run(&["metrics", s(&input), s(&other)]);
    assert_eq!(mismatch.status.code(), Some(3));

    let invalid = run(&["init-identity", s(&f.path("x.sepw")), "--s-t", "1"]);
    assert_eq!(invalid.status.code(), Some(3));

    let tiny = run(&["metrics", s(&input), s(&input)]);
    assert_eq!(tiny.status.code(), Some(0));
    let small = f.png("small.png", &random_u8(13, 8, 8));
    let too_small = run(&["metrics", s(&small), s(&small)]);
    assert_eq!(too_small.status.code(), Some(3));

    let cube = f.path("bad.cube");
    std::fs::write(&cube, "LUT_3D_SIZE 2\n0 0 0\n").unwrap();
    let bad_cube = run(&["apply-lut", s(&input), "--lut3d", s(&cube), "-o", s(&out)]);
    assert_eq!(bad_cube.status.code(), Some(2));
}

//! Context vector to LUTs.
//!
//! The 1D generator is one FC layer with a sigmoid. The 3D generator is two
//! FC layers with no activation: `E -> w (K) -> T (3 S³)`. Since the second
//! layer is linear, every generated 3D LUT is `base + Σ w_k · basis_k`, where
//! `base` is the second bias and `basis_k` is column `k` of the second weight.

use crate::backbone::ContextVector;
use crate::bundle::{
    BundleConfig, GEN1D_B, GEN1D_W, GEN3D_B1, GEN3D_B2, GEN3D_W1, GEN3D_W2, WeightBundle,
};
use crate::error::{Error, Result};
use crate::lut::{Lut1D, Lut3D};

/// Clamp applied to identity targets before taking the logit.
pub const IDENTITY_LOGIT_CLAMP: f32 = 1e-4;

/// How far an identity-mode 1D LUT may sit from the exact ramp: the clamp,
/// plus half an f32 ulp at 1.0 because `1 - 1e-4` is not representable.
pub const IDENTITY_LUT1D_TOLERANCE: f32 = IDENTITY_LOGIT_CLAMP + f32::EPSILON / 4.0;

/// Largest f32 below 1; keeps sigmoid outputs strictly inside `(0, 1)`.
const BELOW_ONE: f32 = 1.0 - f32::EPSILON / 2.0;

fn sigmoid(x: f64) -> f32 {
    ((1.0 / (1.0 + (-x).exp())) as f32).clamp(f32::MIN_POSITIVE, BELOW_ONE)
}

fn logit(p: f64) -> f32 {
    (p / (1.0 - p)).ln() as f32
}

/// `weight · x + bias` with a row-major `(bias.len(), x.len())` weight.
fn affine(weight: &[f32], bias: &[f32], x: &[f32]) -> Vec<f64> {
    let n = x.len();
    bias.iter()
        .enumerate()
        .map(|(j, &b)| {
            let row = &weight[j * n..(j + 1) * n];
            row.iter()
                .zip(x)
                .map(|(&w, &v)| w as f64 * v as f64)
                .sum::<f64>()
                + b as f64
        })
        .collect()
}

/// Generator weights unpacked (and dequantized) from a bundle.
#[derive(Debug, Clone)]
pub struct Generators {
    config: BundleConfig,
    w1d: Vec<f32>,
    b1d: Vec<f32>,
    w3d1: Vec<f32>,
    b3d1: Vec<f32>,
    w3d2: Vec<f32>,
    b3d2: Vec<f32>,
}

impl Generators {
    pub fn new(bundle: &WeightBundle) -> Result<Self> {
        let get = |n: &str| bundle.values(n).map(|v| v.into_owned());
        Ok(Self {
            config: *bundle.config(),
            w1d: get(GEN1D_W)?,
            b1d: get(GEN1D_B)?,
            w3d1: get(GEN3D_W1)?,
            b3d1: get(GEN3D_B1)?,
            w3d2: get(GEN3D_W2)?,
            b3d2: get(GEN3D_B2)?,
        })
    }

    fn check(&self, e: &ContextVector) -> Result<()> {
        let expected = self.config.context_len();
        if e.len() != expected {
            return Err(Error::ContextLength {
                expected,
                found: e.len(),
            });
        }
        Ok(())
    }

    pub fn lut1d(&self, e: &ContextVector) -> Result<Lut1D> {
        self.check(e)?;
        let values = affine(&self.w1d, &self.b1d, e.values())
            .into_iter()
            .map(sigmoid)
            .collect();
        Lut1D::new(self.config.lut1d_size, values)
    }

    /// The K basis coefficients `w = W1 · E + b1`.
    pub fn coefficients(&self, e: &ContextVector) -> Result<Vec<f32>> {
        self.check(e)?;
        Ok(affine(&self.w3d1, &self.b3d1, e.values())
            .into_iter()
            .map(|v| v as f32)
            .collect())
    }

    /// 3D LUT from explicit basis coefficients.
    pub fn lut3d_from_coefficients(&self, w: &[f32]) -> Result<Lut3D> {
        if w.len() != self.config.rank {
            return Err(Error::LengthMismatch {
                expected: self.config.rank,
                found: w.len(),
            });
        }
        let values = affine(&self.w3d2, &self.b3d2, w)
            .into_iter()
            .map(|v| v as f32)
            .collect();
        Lut3D::new(self.config.lut3d_size, values)
    }

    pub fn lut3d(&self, e: &ContextVector) -> Result<Lut3D> {
        self.lut3d_from_coefficients(&self.coefficients(e)?)
    }

    /// `(base, basis)` with `base = b2` and `basis[k]` = column `k` of `W2`.
    pub fn basis(&self) -> Result<(Lut3D, Vec<Lut3D>)> {
        let k = self.config.rank;
        let size = self.config.lut3d_size;
        let base = Lut3D::new(size, self.b3d2.clone())?;
        let basis = (0..k)
            .map(|col| {
                let v = self.w3d2.chunks_exact(k).map(|row| row[col]).collect();
                Lut3D::new(size, v)
            })
            .collect::<Result<_>>()?;
        Ok((base, basis))
    }
}

pub fn generate_lut1d(e: &ContextVector, bundle: &WeightBundle) -> Result<Lut1D> {
    Generators::new(bundle)?.lut1d(e)
}

pub fn generate_lut3d(e: &ContextVector, bundle: &WeightBundle) -> Result<Lut3D> {
    Generators::new(bundle)?.lut3d(e)
}

pub fn extract_basis_luts(bundle: &WeightBundle) -> Result<(Lut3D, Vec<Lut3D>)> {
    Generators::new(bundle)?.basis()
}

/// Bias values whose sigmoid reproduces the identity ramp to within
/// [`IDENTITY_LOGIT_CLAMP`].
pub fn identity_lut1d_bias(size: usize) -> Vec<f32> {
    let ramp: Vec<f32> = (0..size)
        .map(|i| {
            let t = i as f64 / (size - 1) as f64;
            let c = IDENTITY_LOGIT_CLAMP as f64;
            logit(t.clamp(c, 1.0 - c))
        })
        .collect();
    ramp.repeat(3)
}

/// A bundle whose generators ignore the context and emit the identity
/// LUTs: zero weights everywhere, logit-ramp 1D bias and identity 3D bias.
pub fn make_identity_bundle(
    m: usize,
    lut1d_size: usize,
    lut3d_size: usize,
    rank: usize,
) -> Result<WeightBundle> {
    let mut bundle = WeightBundle::zeros(BundleConfig::new(m, lut1d_size, lut3d_size, rank))?;
    bundle.set_f32(GEN1D_B, identity_lut1d_bias(lut1d_size))?;
    bundle.set_f32(GEN3D_B2, Lut3D::identity(lut3d_size)?.into_values())?;
    Ok(bundle)
}

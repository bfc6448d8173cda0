//! Learned parameters and the `.sepw` container.
//!
//! Layout on disk:
//!
//! ```text
//! "SEPW"                magic
//! u32 LE                version (1)
//! u64 LE                manifest byte length
//! manifest              UTF-8 JSON
//! payload               raw little-endian tensors, at manifest offsets
//! ```
//!
//! Tensor offsets are relative to the first payload byte. Every tensor is
//! row-major with its declared shape; the manifest also carries the
//! hyper-parameters, and the loader rejects any tensor whose shape disagrees
//! with them.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quant::QuantizedTensor;

pub const MAGIC: [u8; 4] = *b"SEPW";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub const DEFAULT_LEAKY_SLOPE: f32 = 0.2;
pub const DEFAULT_IN_EPS: f32 = 1e-5;
pub const BACKBONE_KIND: &str = "strided-cnn";

/// Number of strided conv blocks in the backbone.
pub const CONV_BLOCKS: usize = 5;
/// Blocks followed by instance normalization.
pub const NORM_BLOCKS: usize = 4;

/// Output channels of conv block `i` (0-based) as a multiple of `m`.
pub const WIDTH_MULTIPLIERS: [usize; CONV_BLOCKS] = [1, 2, 4, 8, 8];

/// Hyper-parameters that fix every tensor shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BundleConfig {
    /// Channel multiplier of the backbone.
    pub m: usize,
    /// Entries per channel of the 1D LUT.
    pub lut1d_size: usize,
    /// Entries per axis of the 3D LUT.
    pub lut3d_size: usize,
    /// Rank of the 3D generator bottleneck.
    pub rank: usize,
    pub leaky_slope: f32,
    pub in_eps: f32,
}

impl BundleConfig {
    pub fn new(m: usize, lut1d_size: usize, lut3d_size: usize, rank: usize) -> Self {
        Self {
            m,
            lut1d_size,
            lut3d_size,
            rank,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            in_eps: DEFAULT_IN_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m < 1 {
            return bad("m must be at least 1".into());
        }
        if self.rank < 1 {
            return bad("K must be at least 1".into());
        }
        if self.lut1d_size < 2 {
            return Err(Error::InvalidSize {
                what: "1D LUT size",
                size: self.lut1d_size,
                min: 2,
            });
        }
        if self.lut3d_size < 2 {
            return Err(Error::InvalidSize {
                what: "3D LUT size",
                size: self.lut3d_size,
                min: 2,
            });
        }
        if !(self.in_eps > 0.0 && self.in_eps.is_finite()) {
            return bad(format!("in_eps must be positive, got {}", self.in_eps));
        }
        if !self.leaky_slope.is_finite() {
            return bad("leaky_slope must be finite".into());
        }
        Ok(())
    }

    pub fn context_len(&self) -> usize {
        32 * self.m
    }

    pub fn conv_channels(&self, block: usize) -> (usize, usize) {
        let out = WIDTH_MULTIPLIERS[block] * self.m;
        let inp = if block == 0 {
            3
        } else {
            WIDTH_MULTIPLIERS[block - 1] * self.m
        };
        (inp, out)
    }

    /// Every tensor name and shape, in container order.
    pub fn expected_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut v = Vec::new();
        for block in 0..CONV_BLOCKS {
            let (cin, cout) = self.conv_channels(block);
            v.push((conv_weight(block), vec![cout, cin, 3, 3]));
            v.push((conv_bias(block), vec![cout]));
        }
        for block in 0..NORM_BLOCKS {
            let (_, c) = self.conv_channels(block);
            v.push((norm_gamma(block), vec![c]));
            v.push((norm_beta(block), vec![c]));
        }
        let e = self.context_len();
        let n1 = 3 * self.lut1d_size;
        let n3 = 3 * self.lut3d_size.pow(3);
        v.push((GEN1D_W.into(), vec![n1, e]));
        v.push((GEN1D_B.into(), vec![n1]));
        v.push((GEN3D_W1.into(), vec![self.rank, e]));
        v.push((GEN3D_B1.into(), vec![self.rank]));
        v.push((GEN3D_W2.into(), vec![n3, self.rank]));
        v.push((GEN3D_B2.into(), vec![n3]));
        v
    }
}

pub const GEN1D_W: &str = "gen1d.fc.weight";
pub const GEN1D_B: &str = "gen1d.fc.bias";
pub const GEN3D_W1: &str = "gen3d.fc1.weight";
pub const GEN3D_B1: &str = "gen3d.fc1.bias";
pub const GEN3D_W2: &str = "gen3d.fc2.weight";
pub const GEN3D_B2: &str = "gen3d.fc2.bias";

pub fn conv_weight(block: usize) -> String {
    format!("backbone.conv{}.weight", block + 1)
}

pub fn conv_bias(block: usize) -> String {
    format!("backbone.conv{}.bias", block + 1)
}

pub fn norm_gamma(block: usize) -> String {
    format!("backbone.in{}.gamma", block + 1)
}

pub fn norm_beta(block: usize) -> String {
    format!("backbone.in{}.beta", block + 1)
}

/// Which part of the model a tensor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Backbone,
    Gen1d,
    Gen3d,
}

pub fn group_of(name: &str) -> Group {
    if name.starts_with("gen1d.") {
        Group::Gen1d
    } else if name.starts_with("gen3d.") {
        Group::Gen3d
    } else {
        Group::Backbone
    }
}

/// True for biases and normalization affine terms, i.e. everything that is
/// not a conv or FC weight matrix.
pub fn is_auxiliary(name: &str) -> bool {
    !name.ends_with(".weight")
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U8(QuantizedTensor),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: TensorData) -> Result<Self> {
        let expected: usize = shape.iter().product();
        let found = match &data {
            TensorData::F32(v) => v.len(),
            TensorData::U8(q) => q.len(),
        };
        if expected != found {
            return Err(Error::LengthMismatch { expected, found });
        }
        Ok(Self { shape, data })
    }

    pub fn from_f32(shape: Vec<usize>, values: Vec<f32>) -> Result<Self> {
        Self::new(shape, TensorData::F32(values))
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: TensorData::F32(vec![0.0; n]),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn is_quantized(&self) -> bool {
        matches!(self.data, TensorData::U8(_))
    }

    /// Float values, dequantizing if needed.
    pub fn values(&self) -> Cow<'_, [f32]> {
        match &self.data {
            TensorData::F32(v) => Cow::Borrowed(v),
            TensorData::U8(q) => Cow::Owned(q.dequantize()),
        }
    }
}

/// Per-group parameter totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParameterCounts {
    pub backbone: usize,
    pub gen1d: usize,
    pub gen3d: usize,
    /// All tensors: conv/FC weights, biases and normalization affine terms.
    pub total: usize,
    /// Conv and FC weight matrices only.
    pub weights_only: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightBundle {
    config: BundleConfig,
    tensors: BTreeMap<String, Tensor>,
}

impl WeightBundle {
    /// Validates that `tensors` holds exactly the expected names and shapes.
    pub fn new(config: BundleConfig, tensors: BTreeMap<String, Tensor>) -> Result<Self> {
        config.validate()?;
        let expected = config.expected_shapes();
        for (name, shape) in &expected {
            let t = tensors
                .get(name)
                .ok_or_else(|| Error::MissingTensor(name.clone()))?;
            if t.shape() != shape.as_slice() {
                return Err(Error::ShapeMismatch {
                    name: name.clone(),
                    expected: shape.clone(),
                    found: t.shape().to_vec(),
                });
            }
        }
        if let Some(extra) = tensors
            .keys()
            .find(|k| !expected.iter().any(|(n, _)| n == *k))
        {
            return Err(Error::UnknownTensor(extra.clone()));
        }
        Ok(Self { config, tensors })
    }

    /// Every tensor float and zero.
    pub fn zeros(config: BundleConfig) -> Result<Self> {
        config.validate()?;
        let tensors = config
            .expected_shapes()
            .into_iter()
            .map(|(n, s)| (n, Tensor::zeros(s)))
            .collect();
        Ok(Self { config, tensors })
    }

    pub fn config(&self) -> &BundleConfig {
        &self.config
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    pub fn values(&self, name: &str) -> Result<Cow<'_, [f32]>> {
        Ok(self.tensor(name)?.values())
    }

    pub fn tensors(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Replaces a tensor; the shape must stay the same.
    pub fn set(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        let slot = self
            .tensors
            .get_mut(name)
            .ok_or_else(|| Error::UnknownTensor(name.to_string()))?;
        if slot.shape() != tensor.shape() {
            return Err(Error::ShapeMismatch {
                name: name.to_string(),
                expected: slot.shape().to_vec(),
                found: tensor.shape().to_vec(),
            });
        }
        *slot = tensor;
        Ok(())
    }

    pub fn set_f32(&mut self, name: &str, values: Vec<f32>) -> Result<()> {
        let shape = self.tensor(name)?.shape().to_vec();
        self.set(name, Tensor::from_f32(shape, values)?)
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn parameter_counts(&self) -> ParameterCounts {
        let mut c = ParameterCounts {
            backbone: 0,
            gen1d: 0,
            gen3d: 0,
            total: 0,
            weights_only: 0,
        };
        for (name, t) in &self.tensors {
            let n = t.len();
            match group_of(name) {
                Group::Backbone => c.backbone += n,
                Group::Gen1d => c.gen1d += n,
                Group::Gen3d => c.gen3d += n,
            }
            c.total += n;
            if !is_auxiliary(name) {
                c.weights_only += n;
            }
        }
        c
    }

    /// Memory-footprint count where an 8-bit value weighs a quarter of a
    /// 32-bit one.
    pub fn equivalent_parameter_count(&self) -> f64 {
        self.tensors
            .values()
            .map(|t| match t.data() {
                TensorData::F32(_) => t.len() as f64,
                TensorData::U8(_) => 0.25 * t.len() as f64,
            })
            .sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut entries = Vec::with_capacity(self.tensors.len());
        let mut payload = Vec::new();
        for (name, _) in self.config.expected_shapes() {
            let t = &self.tensors[&name];
            let offset = payload.len() as u64;
            let (dtype, scale, zero_point) = match t.data() {
                TensorData::F32(v) => {
                    for x in v {
                        payload.extend_from_slice(&x.to_le_bytes());
                    }
                    (Dtype::F32, None, None)
                }
                TensorData::U8(q) => {
                    payload.extend_from_slice(q.data());
                    (Dtype::U8, Some(q.scale()), Some(q.zero_point()))
                }
            };
            entries.push(TensorEntry {
                name,
                dtype,
                scale,
                zero_point,
                offset,
                shape: t.shape().to_vec(),
            });
        }
        let manifest = Manifest {
            m: self.config.m,
            s_o: self.config.lut1d_size,
            s_t: self.config.lut3d_size,
            k: self.config.rank,
            leaky_slope: self.config.leaky_slope,
            in_eps: Some(self.config.in_eps),
            backbone: Some(BACKBONE_KIND.to_string()),
            tensors: entries,
        };
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out = Vec::with_capacity(HEADER_LEN + json.len() + payload.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Truncated("missing magic".into()));
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated("header shorter than 16 bytes".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let manifest_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let manifest_end = usize::try_from(manifest_len)
            .ok()
            .and_then(|n| n.checked_add(HEADER_LEN))
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| Error::Truncated(format!("manifest declares {manifest_len} bytes")))?;
        let manifest: Manifest = serde_json::from_slice(&bytes[HEADER_LEN..manifest_end])
            .map_err(|e| Error::Manifest(e.to_string()))?;
        if let Some(kind) = &manifest.backbone
            && kind != BACKBONE_KIND {
                return Err(Error::Manifest(format!("unsupported backbone `{kind}`")));
            }
        let config = BundleConfig {
            m: manifest.m,
            lut1d_size: manifest.s_o,
            lut3d_size: manifest.s_t,
            rank: manifest.k,
            leaky_slope: manifest.leaky_slope,
            in_eps: manifest.in_eps.unwrap_or(DEFAULT_IN_EPS),
        };
        config.validate()?;
        let payload = &bytes[manifest_end..];

        let expected: BTreeMap<String, Vec<usize>> = config.expected_shapes().into_iter().collect();
        let mut tensors = BTreeMap::new();
        for entry in manifest.tensors {
            let want = expected
                .get(&entry.name)
                .ok_or_else(|| Error::UnknownTensor(entry.name.clone()))?;
            if *want != entry.shape {
                return Err(Error::ShapeMismatch {
                    name: entry.name,
                    expected: want.clone(),
                    found: entry.shape,
                });
            }
            let count: usize = entry.shape.iter().product();
            let width = match entry.dtype {
                Dtype::F32 => 4,
                Dtype::U8 => 1,
            };
            let start = usize::try_from(entry.offset).unwrap_or(usize::MAX);
            let raw = start
                .checked_add(count * width)
                .and_then(|end| payload.get(start..end))
                .ok_or_else(|| {
                    Error::Truncated(format!(
                        "tensor `{}` needs {} bytes at offset {}, payload has {}",
                        entry.name,
                        count * width,
                        entry.offset,
                        payload.len()
                    ))
                })?;
            let data = match entry.dtype {
                Dtype::F32 => TensorData::F32(
                    raw.chunks_exact(4)
                        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                        .collect(),
                ),
                Dtype::U8 => {
                    let scale = entry.scale.ok_or_else(|| {
                        Error::Manifest(format!("u8 tensor `{}` lacks a scale", entry.name))
                    })?;
                    TensorData::U8(QuantizedTensor::from_parts(
                        raw.to_vec(),
                        scale,
                        entry.zero_point.unwrap_or(0),
                    ))
                }
            };
            if tensors
                .insert(entry.name.clone(), Tensor::new(entry.shape, data)?)
                .is_some()
            {
                return Err(Error::Manifest(format!(
                    "duplicate tensor `{}`",
                    entry.name
                )));
            }
        }
        Self::new(config, tensors)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Dtype {
    F32,
    U8,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    dtype: Dtype,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    zero_point: Option<u8>,
    offset: u64,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    m: usize,
    #[serde(rename = "S_o")]
    s_o: usize,
    #[serde(rename = "S_t")]
    s_t: usize,
    #[serde(rename = "K")]
    k: usize,
    leaky_slope: f32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    in_eps: Option<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    backbone: Option<String>,
    tensors: Vec<TensorEntry>,
}

/// Human-readable manifest of a container without decoding the payload.
pub fn read_manifest_json(bytes: &[u8]) -> Result<serde_json::Value> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated("header shorter than 16 bytes".into()));
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes
        .get(HEADER_LEN..HEADER_LEN.saturating_add(len))
        .ok_or_else(|| Error::Truncated("manifest".into()))?;
    serde_json::from_slice(body).map_err(|e| Error::Manifest(e.to_string()))
}

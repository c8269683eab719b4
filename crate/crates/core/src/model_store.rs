//! Single-file model storage, int8 quantization and byte accounting.
//!
//! Layout (little-endian):
//!
//! | bytes | field |
//! |---|---|
//! | 4 | magic `FGRN` |
//! | 2 | version `u16` = 1 |
//! | 2 | flags `u16`, bit 0 = quantized |
//! | 8 | D, H, C, T as `u16` |
//! | … | W, U, b_z, b_h, ζ_raw, ν_raw, W_fc, b_fc |
//! | 8·D | normalization mean then std, `f32` |
//! | 4·C | thresholds, `f32` |
//! | … | C labels, each `u16` byte length + UTF-8 |
//!
//! Float tensors are row-major `f32`. Quantized tensors are row-major `i8`
//! followed by one `f32` scale.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grnn::{count_parameters, FastGrnn, ModelConfig};
use crate::train::{ClassThresholds, NormStats, STD_FLOOR};

pub const MAGIC: &[u8; 4] = b"FGRN";
pub const FORMAT_VERSION: u16 = 1;
pub const FLAG_QUANTIZED: u16 = 1;
pub const HEADER_BYTES: usize = 16;
pub const TENSOR_NAMES: [&str; 8] = ["W", "U", "b_z", "b_h", "zeta_raw", "nu_raw", "W_fc", "b_fc"];

/// Everything needed to run inference on a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub config: ModelConfig,
    pub model: FastGrnn,
    pub norm: NormStats,
    pub thresholds: ClassThresholds,
    pub labels: Vec<String>,
}

fn snap(v: f64) -> f64 {
    v as f32 as f64
}

impl ModelBundle {
    /// Validates the parts and rounds every stored number to `f32`, so that
    /// a save/load round trip is exact.
    pub fn new(
        config: ModelConfig,
        mut model: FastGrnn,
        mut norm: NormStats,
        thresholds: ClassThresholds,
        labels: Vec<String>,
    ) -> Result<Self> {
        for t in model.tensors_mut() {
            t.iter_mut().for_each(|v| *v = snap(*v));
        }
        norm.mean.iter_mut().for_each(|v| *v = snap(*v));
        norm.std.iter_mut().for_each(|v| *v = snap(*v).max(snap(STD_FLOOR)));
        let thresholds = ClassThresholds::new(thresholds.as_slice().iter().map(|&t| snap(t).clamp(0.0, 1.0)).collect())?;
        let bundle = Self {
            config,
            model,
            norm,
            thresholds,
            labels,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.model.check_shapes()?;
        let c = self.config;
        if self.model.config(c.seq_len) != c {
            return Err(Error::DimensionMismatch(format!(
                "config {c:?} does not match model shapes"
            )));
        }
        if self.norm.mean.len() != c.input_dim || self.norm.std.len() != c.input_dim {
            return Err(Error::DimensionMismatch("normalization stats size".into()));
        }
        if self.thresholds.len() != c.num_classes || self.labels.len() != c.num_classes {
            return Err(Error::DimensionMismatch(format!(
                "{} thresholds and {} labels for {} classes",
                self.thresholds.len(),
                self.labels.len(),
                c.num_classes
            )));
        }
        for (i, l) in self.labels.iter().enumerate() {
            if self.labels[..i].contains(l) {
                return Err(Error::BadConfig(format!("duplicate label {l:?}")));
            }
        }
        Ok(())
    }

    pub fn with_thresholds(mut self, thresholds: ClassThresholds) -> Result<Self> {
        self.thresholds = thresholds;
        Self::new(self.config, self.model, self.norm, self.thresholds, self.labels)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::header(&self.config, 0);
        for t in self.model.tensors() {
            for &v in t {
                w.f32(v);
            }
        }
        w.aux(&self.norm, &self.thresholds, &self.labels);
        w.buf
    }
}

/// One int8 tensor with its symmetric scale.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    pub values: Vec<i8>,
    pub scale: f32,
}

impl QuantizedTensor {
    /// `scale = max|x| / 127`, `q = round(x / scale)`; an all-zero tensor
    /// gets scale 1.
    pub fn quantize(values: &[f64]) -> Self {
        let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = if max == 0.0 { 1.0 } else { (max / 127.0) as f32 };
        let s = scale as f64;
        let values = values
            .iter()
            .map(|v| (v / s).round().clamp(-127.0, 127.0) as i8)
            .collect();
        Self { values, scale }
    }

    pub fn dequantize(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|&q| q as f64 * self.scale as f64)
            .collect()
    }
}

/// Int8 variant of [`ModelBundle`]; normalization and thresholds stay `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedBundle {
    pub config: ModelConfig,
    pub tensors: Vec<QuantizedTensor>,
    pub norm: NormStats,
    pub thresholds: ClassThresholds,
    pub labels: Vec<String>,
}

impl QuantizedBundle {
    /// Float bundle that computes with `scale · q` weights.
    pub fn dequantize(&self) -> Result<ModelBundle> {
        let mut model = FastGrnn::zeros(&self.config);
        for (dst, src) in model.tensors_mut().into_iter().zip(&self.tensors) {
            if dst.len() != src.values.len() {
                return Err(Error::ShapeCorruption("quantized tensor size".into()));
            }
            dst.copy_from_slice(&src.dequantize());
        }
        ModelBundle::new(
            self.config,
            model,
            self.norm.clone(),
            self.thresholds.clone(),
            self.labels.clone(),
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::header(&self.config, FLAG_QUANTIZED);
        for t in &self.tensors {
            w.buf.extend(t.values.iter().map(|&q| q as u8));
            w.buf.extend_from_slice(&t.scale.to_le_bytes());
        }
        w.aux(&self.norm, &self.thresholds, &self.labels);
        w.buf
    }
}

/// Per-tensor symmetric int8 quantization of every cell and output tensor.
pub fn quantize_int8(bundle: &ModelBundle) -> QuantizedBundle {
    QuantizedBundle {
        config: bundle.config,
        tensors: bundle.model.tensors().iter().map(|t| QuantizedTensor::quantize(t)).collect(),
        norm: bundle.norm.clone(),
        thresholds: bundle.thresholds.clone(),
        labels: bundle.labels.clone(),
    }
}

/// Either kind of model file.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredModel {
    Float(ModelBundle),
    Quantized(QuantizedBundle),
}

impl StoredModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            StoredModel::Float(b) => b.to_bytes(),
            StoredModel::Quantized(q) => q.to_bytes(),
        }
    }

    /// Float view; quantized weights are dequantized.
    pub fn into_bundle(self) -> Result<ModelBundle> {
        match self {
            StoredModel::Float(b) => Ok(b),
            StoredModel::Quantized(q) => q.dequantize(),
        }
    }

    pub fn size_report(&self) -> SizeReport {
        match self {
            StoredModel::Float(b) => size_report(b),
            StoredModel::Quantized(q) => size_report_quantized(q),
        }
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn header(c: &ModelConfig, flags: u16) -> Self {
        let mut w = Writer { buf: Vec::new() };
        w.buf.extend_from_slice(MAGIC);
        w.u16(FORMAT_VERSION);
        w.u16(flags);
        for d in [c.input_dim, c.hidden_dim, c.num_classes, c.seq_len] {
            w.u16(d as u16);
        }
        w
    }

    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f32(&mut self, v: f64) {
        self.buf.extend_from_slice(&(v as f32).to_le_bytes());
    }

    fn aux(&mut self, norm: &NormStats, thresholds: &ClassThresholds, labels: &[String]) {
        for &v in norm.mean.iter().chain(&norm.std).chain(thresholds.as_slice()) {
            self.f32(v);
        }
        for l in labels {
            self.u16(l.len() as u16);
            self.buf.extend_from_slice(l.as_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::ShapeCorruption(format!("file ends at byte {}, needed {}", self.bytes.len(), self.pos + n))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn f32(&mut self) -> Result<f64> {
        let v = f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(Error::ShapeCorruption("non-finite value".into()));
        }
        Ok(v as f64)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f32()).collect()
    }
}

/// Parses either kind of model file from memory.
pub fn decode(bytes: &[u8]) -> Result<StoredModel> {
    if bytes.len() < MAGIC.len() {
        return Err(Error::ShapeCorruption(format!("only {} bytes", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let flags = r.u16()?;
    if flags & !FLAG_QUANTIZED != 0 {
        return Err(Error::ShapeCorruption(format!("unknown flags {flags:#06x}")));
    }
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = r.u16()? as usize;
    }
    let config = ModelConfig {
        input_dim: dims[0],
        hidden_dim: dims[1],
        num_classes: dims[2],
        seq_len: dims[3],
    };
    config
        .validate()
        .map_err(|e| Error::ShapeCorruption(e.to_string()))?;
    let shape = FastGrnn::zeros(&config);
    let sizes: Vec<usize> = shape.tensors().iter().map(|t| t.len()).collect();

    let quantized = flags & FLAG_QUANTIZED != 0;
    let mut float_model = shape;
    let mut qtensors = Vec::new();
    if quantized {
        for &n in &sizes {
            let values = r.take(n)?.iter().map(|&b| b as i8).collect();
            let scale = r.f32()? as f32;
            qtensors.push(QuantizedTensor { values, scale });
        }
    } else {
        for t in float_model.tensors_mut() {
            for v in t.iter_mut() {
                *v = r.f32()?;
            }
        }
    }
    let d = config.input_dim;
    let norm = NormStats {
        mean: r.f32s(d)?,
        std: r.f32s(d)?,
    };
    let thresholds = ClassThresholds::new(r.f32s(config.num_classes)?)
        .map_err(|e| Error::ShapeCorruption(e.to_string()))?;
    let mut labels = Vec::with_capacity(config.num_classes);
    for _ in 0..config.num_classes {
        let n = r.u16()? as usize;
        let s = std::str::from_utf8(r.take(n)?).map_err(|e| Error::ShapeCorruption(e.to_string()))?;
        labels.push(s.to_owned());
    }
    if r.pos != bytes.len() {
        return Err(Error::ShapeCorruption(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    if norm.std.iter().any(|&s| s <= 0.0) {
        return Err(Error::ShapeCorruption("non-positive std".into()));
    }
    let corrupt = |e: Error| Error::ShapeCorruption(e.to_string());
    if quantized {
        let q = QuantizedBundle {
            config,
            tensors: qtensors,
            norm,
            thresholds,
            labels,
        };
        q.dequantize().map_err(corrupt)?;
        Ok(StoredModel::Quantized(q))
    } else {
        let bundle = ModelBundle {
            config,
            model: float_model,
            norm,
            thresholds,
            labels,
        };
        bundle.validate().map_err(corrupt)?;
        Ok(StoredModel::Float(bundle))
    }
}

pub fn save_model(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, bundle.to_bytes())?;
    Ok(())
}

pub fn save_quantized(bundle: &QuantizedBundle, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, bundle.to_bytes())?;
    Ok(())
}

pub fn load_stored(path: impl AsRef<Path>) -> Result<StoredModel> {
    decode(&fs::read(path)?)
}

/// Loads a model file of either kind as a float bundle.
pub fn load_model(path: impl AsRef<Path>) -> Result<ModelBundle> {
    load_stored(path)?.into_bundle()
}

/// Loads a quantized file without dequantizing it.
pub fn load_quantized(path: impl AsRef<Path>) -> Result<QuantizedBundle> {
    match load_stored(path)? {
        StoredModel::Quantized(q) => Ok(q),
        StoredModel::Float(_) => Err(Error::BadConfig("model file is not quantized".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSize {
    pub name: &'static str,
    pub elements: usize,
    pub bytes: usize,
}

/// Exact serialized byte counts, split into core parameters and the rest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeReport {
    pub quantized: bool,
    pub parameter_count: usize,
    pub header_bytes: usize,
    pub tensors: Vec<TensorSize>,
    pub core_bytes: usize,
    pub norm_bytes: usize,
    pub threshold_bytes: usize,
    pub label_bytes: usize,
    pub total_bytes: usize,
}

impl SizeReport {
    pub fn auxiliary_bytes(&self) -> usize {
        self.header_bytes + self.norm_bytes + self.threshold_bytes + self.label_bytes
    }

    /// Core payload in KiB (1024 bytes).
    pub fn core_kib(&self) -> f64 {
        self.core_bytes as f64 / 1024.0
    }
}

fn report(config: &ModelConfig, labels: &[String], quantized: bool) -> SizeReport {
    let shape = FastGrnn::zeros(config);
    let tensors: Vec<TensorSize> = TENSOR_NAMES
        .iter()
        .zip(shape.tensors())
        .map(|(&name, t)| TensorSize {
            name,
            elements: t.len(),
            bytes: if quantized { t.len() + 4 } else { 4 * t.len() },
        })
        .collect();
    let core_bytes = tensors.iter().map(|t| t.bytes).sum();
    let norm_bytes = 2 * 4 * config.input_dim;
    let threshold_bytes = 4 * config.num_classes;
    let label_bytes = labels.iter().map(|l| 2 + l.len()).sum();
    SizeReport {
        quantized,
        parameter_count: count_parameters(config),
        header_bytes: HEADER_BYTES,
        tensors,
        core_bytes,
        norm_bytes,
        threshold_bytes,
        label_bytes,
        total_bytes: HEADER_BYTES + core_bytes + norm_bytes + threshold_bytes + label_bytes,
    }
}

pub fn size_report(bundle: &ModelBundle) -> SizeReport {
    report(&bundle.config, &bundle.labels, false)
}

pub fn size_report_quantized(bundle: &QuantizedBundle) -> SizeReport {
    report(&bundle.config, &bundle.labels, true)
}

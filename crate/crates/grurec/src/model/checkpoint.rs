//! Checkpoint file format.
//!
//! Layout: magic "DGRU" | version u32 LE | header length u64 LE | UTF-8
//! JSON header | tensor payload. The header carries the model config, label
//! names, normalization statistics, and a manifest of tensor names, shapes,
//! and byte offsets into the payload. Payload tensors are row-major f32 LE
//! in manifest order, so a given model always serializes to the same bytes.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::model::{build_model, Model, ModelConfig};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

pub const MAGIC: [u8; 4] = *b"DGRU";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
    /// Byte offset into the payload region.
    offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    labels: Vec<String>,
    norm_mean: Vec<f64>,
    norm_std: Vec<f64>,
    tensors: Vec<TensorEntry>,
}

/// Serialize a model. Values are stored as f32 regardless of the run
/// precision; an f64 model round-trips through the nearest f32.
pub fn save_checkpoint<T: Scalar>(model: &Model<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let named = model.named_tensors();
    let mut entries = Vec::with_capacity(named.len());
    let mut offset = 0u64;
    for (name, m) in &named {
        entries.push(TensorEntry { name: name.clone(), rows: m.rows(), cols: m.cols(), offset });
        offset += (m.rows() * m.cols() * 4) as u64;
    }
    let header = Header {
        config: model.config.clone(),
        labels: model.labels.clone(),
        norm_mean: model.norm_stats.mean.iter().map(|v| v.as_f64()).collect(),
        norm_std: model.norm_stats.std.iter().map(|v| v.as_f64()).collect(),
        tensors: entries,
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::Header(format!("serializing header: {e}")))?;

    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    w.write_all(&MAGIC).map_err(io_err)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(header_bytes.len() as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&header_bytes).map_err(io_err)?;
    for (_, m) in &named {
        for &v in m.data() {
            w.write_all(&(v.as_f64() as f32).to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Load a checkpoint written by `save_checkpoint`.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    if bytes.len() < 16 {
        return Err(Error::Truncated { expected: 16, actual: bytes.len() as u64 });
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::BadVersion { found: version, supported: VERSION });
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let payload_start = 16usize.checked_add(header_len).ok_or(Error::BadMagic)?;
    if bytes.len() < payload_start {
        return Err(Error::Truncated { expected: payload_start as u64, actual: bytes.len() as u64 });
    }
    let header: Header = serde_json::from_slice(&bytes[16..payload_start])
        .map_err(|e| Error::Header(format!("parsing header: {e}")))?;
    header.config.validate()?;

    // Structure comes from the config; the payload overwrites every value.
    let mut model = build_model::<f32>(header.config.clone(), &mut SeededRng::new(0))?;
    model.set_labels(header.labels.clone())?;
    if header.norm_mean.len() != header.config.input_dim
        || header.norm_std.len() != header.config.input_dim
    {
        return Err(Error::Header(format!(
            "normalization statistics cover {} features, model takes {}",
            header.norm_mean.len(),
            header.config.input_dim
        )));
    }
    model.norm_stats = NormStats {
        mean: header.norm_mean.iter().map(|&v| v as f32).collect(),
        std: header.norm_std.iter().map(|&v| v as f32).collect(),
    };

    let payload = &bytes[payload_start..];
    let mut named = model.named_tensors_mut();
    if header.tensors.len() != named.len() {
        return Err(Error::Header(format!(
            "manifest lists {} tensors, model shape needs {}",
            header.tensors.len(),
            named.len()
        )));
    }
    let mut expected_offset = 0u64;
    for entry in &header.tensors {
        let slot = named
            .iter_mut()
            .find(|(name, _)| *name == entry.name)
            .ok_or_else(|| Error::Header(format!("unknown tensor {:?}", entry.name)))?;
        let m = &mut slot.1;
        if (m.rows(), m.cols()) != (entry.rows, entry.cols) {
            return Err(Error::Header(format!(
                "tensor {:?} is {}x{} in the manifest but {}x{} in the model",
                entry.name,
                entry.rows,
                entry.cols,
                m.rows(),
                m.cols()
            )));
        }
        if entry.offset != expected_offset {
            return Err(Error::Header(format!(
                "tensor {:?} at offset {} but {} bytes written so far",
                entry.name, entry.offset, expected_offset
            )));
        }
        let n = entry.rows * entry.cols;
        let start = entry.offset as usize;
        let end = start + n * 4;
        if payload.len() < end {
            return Err(Error::Truncated {
                expected: (payload_start + end) as u64,
                actual: bytes.len() as u64,
            });
        }
        for (i, v) in m.data_mut().iter_mut().enumerate() {
            let at = start + i * 4;
            let raw: [u8; 4] = payload[at..at + 4].try_into().unwrap();
            *v = f32::from_le_bytes(raw);
        }
        expected_offset = end as u64;
    }
    if payload.len() as u64 != expected_offset {
        return Err(Error::Truncated {
            expected: (payload_start as u64) + expected_offset,
            actual: bytes.len() as u64,
        });
    }
    Ok(model)
}

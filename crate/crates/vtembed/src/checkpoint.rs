//! `XMCK` checkpoints: a JSON config blob, the named parameter tensors and an
//! optional Adam state section with the same tensor layout.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vtembed_core::trainer::OptimizerState;
use vtembed_core::{Dims, ModelParameters};

use crate::bytes::{Reader, Writer};
use crate::error::{read_file, write_file, Error, Result};

pub const MAGIC: &[u8; 4] = b"XMCK";
pub const VERSION: u32 = 1;

/// Model shape as stored in the config blob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDims {
    pub video_dim: usize,
    pub caption_dim: usize,
    pub embed_dim: usize,
    pub word_dim: usize,
    pub conv_width: usize,
    pub max_tokens: usize,
}

impl From<Dims> for ModelDims {
    fn from(d: Dims) -> Self {
        Self {
            video_dim: d.video_dim,
            caption_dim: d.caption_dim,
            embed_dim: d.embed_dim,
            word_dim: d.word_dim,
            conv_width: d.conv_width,
            max_tokens: d.max_tokens,
        }
    }
}

impl From<ModelDims> for Dims {
    fn from(d: ModelDims) -> Self {
        Self {
            video_dim: d.video_dim,
            caption_dim: d.caption_dim,
            embed_dim: d.embed_dim,
            word_dim: d.word_dim,
            conv_width: d.conv_width,
            max_tokens: d.max_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointConfig {
    pub preset: String,
    pub dims: ModelDims,
    /// Effective run configuration that produced the checkpoint.
    #[serde(default)]
    pub run: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: CheckpointConfig,
    pub params: ModelParameters,
    pub optimizer: Option<OptimizerState>,
}

fn is_vector(name: &str) -> bool {
    name.ends_with(".b1") || name.ends_with(".b2") || name.ends_with(".bias")
}

fn write_tensors(w: &mut Writer, prefix: &str, params: &ModelParameters) -> Result<()> {
    let shapes = params.dims.tensor_shapes();
    w.u32(shapes.len() as u32);
    for ((name, shape), (_, values)) in shapes.iter().zip(params.tensors()) {
        w.short_str(&format!("{prefix}{name}"))?;
        if is_vector(name) {
            w.u8(1);
            w.u32(shape[0] as u32);
        } else {
            w.u8(2);
            w.u32(shape[0] as u32);
            w.u32(shape[1] as u32);
        }
        w.f32s(values.iter().map(|&v| v as f32));
    }
    Ok(())
}

fn read_tensors(r: &mut Reader, prefix: &str, dims: Dims) -> Result<ModelParameters> {
    let mut params = ModelParameters::zeros(dims)?;
    let shapes = dims.tensor_shapes();
    let count = r.u32()? as usize;
    if count != shapes.len() {
        return Err(Error::Format(format!(
            "expected {} tensors, found {count}",
            shapes.len()
        )));
    }
    for (t, (name, shape)) in shapes.iter().enumerate() {
        let expected_name = format!("{prefix}{name}");
        let got = r.short_str()?;
        if got != expected_name {
            return Err(Error::Format(format!(
                "expected tensor {expected_name}, found {got}"
            )));
        }
        let rank = r.u8()? as usize;
        let dims_read = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let expected: Vec<usize> = if is_vector(name) {
            vec![shape[0]]
        } else {
            shape.to_vec()
        };
        if dims_read != expected {
            return Err(Error::Format(format!(
                "shape mismatch for {expected_name}: file has {dims_read:?}, config expects {expected:?}"
            )));
        }
        let values = r.f32s(shape[0] * shape[1], &expected_name)?;
        for (dst, v) in params.tensors_mut()[t].1.iter_mut().zip(values) {
            *dst = v as f64;
        }
    }
    Ok(params)
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    if Dims::from(ckpt.config.dims) != ckpt.params.dims {
        return Err(Error::Format("checkpoint config dims differ from the parameters".into()));
    }
    let mut w = Writer::header(MAGIC, VERSION);
    let json = serde_json::to_vec(&ckpt.config)?;
    w.u32(json.len() as u32);
    w.buf.extend_from_slice(&json);
    write_tensors(&mut w, "", &ckpt.params)?;
    match &ckpt.optimizer {
        None => w.u8(0),
        Some(state) => {
            w.u8(1);
            w.u64(state.step);
            write_tensors(&mut w, "adam.m.", &state.first)?;
            write_tensors(&mut w, "adam.v.", &state.second)?;
        }
    }
    Ok(w.buf)
}

/// Decodes a checkpoint. With `expected`, the stored dims must match it.
pub fn decode_checkpoint(bytes: &[u8], expected: Option<Dims>) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC, VERSION)?;
    let n = r.u32()? as usize;
    let config: CheckpointConfig = serde_json::from_slice(r.take(n)?)?;
    let dims = Dims::from(config.dims);
    if let Some(want) = expected {
        if want != dims {
            return Err(Error::Format(format!(
                "shape mismatch: checkpoint has {:?}, expected {:?}",
                config.dims,
                ModelDims::from(want)
            )));
        }
    }
    let params = read_tensors(&mut r, "", dims)?;
    let optimizer = match r.u8()? {
        0 => None,
        1 => {
            let step = r.u64()?;
            let first = read_tensors(&mut r, "adam.m.", dims)?;
            let second = read_tensors(&mut r, "adam.v.", dims)?;
            Some(OptimizerState { first, second, step })
        }
        f => return Err(Error::Format(format!("bad optimizer section flag {f}"))),
    };
    r.finish()?;
    Ok(Checkpoint {
        config,
        params,
        optimizer,
    })
}

pub fn read_checkpoint(path: &Path, expected: Option<Dims>) -> Result<Checkpoint> {
    decode_checkpoint(&read_file(path)?, expected)
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_file(path, &encode_checkpoint(ckpt)?)
}

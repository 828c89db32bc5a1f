//! Binary checkpoint container.
//!
//! Layout: magic bytes `SALADCKPT`, format version (u32 LE), then
//! length-prefixed named sections. Tensor sections hold a count followed by
//! name / shape / little-endian IEEE-754 f32 row-major data per tensor.
//! Sections: `config` (model config echo, JSON), `step` (u64 LE optimizer
//! step), `params`, `adam_m`, `adam_v`, and optionally `frozen_mask`
//! (captured regression masks keyed by video id, stored as 0/1 tensors).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::Real;
use crate::model::{ModelConfig, ModelParams};
use crate::optim::AdamState;

pub const CHECKPOINT_MAGIC: &[u8; 9] = b"SALADCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Captured regression masks of a finished run, keyed by video id.
pub type FrozenMasks = BTreeMap<String, Array2<bool>>;

/// A checkpoint as read from disk, before binding to a config/precision.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub step: u64,
    pub params: Vec<(String, Array2<f32>)>,
    pub adam_m: Vec<(String, Array2<f32>)>,
    pub adam_v: Vec<(String, Array2<f32>)>,
    pub frozen_masks: Option<FrozenMasks>,
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn tensor_table(tensors: &[(String, Array2<f32>)]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_u32(&mut buf, tensors.len() as u32)?;
    for (name, tensor) in tensors {
        write_str(&mut buf, name)?;
        write_u32(&mut buf, 2)?;
        write_u32(&mut buf, tensor.nrows() as u32)?;
        write_u32(&mut buf, tensor.ncols() as u32)?;
        for &v in tensor.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

fn write_section<W: Write>(w: &mut W, name: &str, payload: &[u8]) -> Result<()> {
    write_str(w, name)?;
    write_u64(w, payload.len() as u64)?;
    w.write_all(payload)?;
    Ok(())
}

fn to_f32<F: Real>(a: &Array2<F>) -> Array2<f32> {
    a.mapv(|v| v.as_f64() as f32)
}

/// Writes parameters, optimizer state and (optionally) frozen masks.
pub fn save_checkpoint<F: Real>(
    path: &Path,
    params: &ModelParams<F>,
    state: &AdamState<F>,
    frozen_masks: Option<&FrozenMasks>,
) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(CHECKPOINT_MAGIC)?;
    write_u32(&mut w, CHECKPOINT_VERSION)?;

    let config_json = serde_json::to_vec(params.config())?;
    write_section(&mut w, "config", &config_json)?;
    write_section(&mut w, "step", &state.step.to_le_bytes())?;

    let named = |tensors: &[Array2<F>]| -> Vec<(String, Array2<f32>)> {
        params
            .entries()
            .iter()
            .zip(tensors)
            .map(|(p, t)| (p.name.clone(), to_f32(t)))
            .collect()
    };
    let param_tensors: Vec<(String, Array2<f32>)> = params
        .entries()
        .iter()
        .map(|p| (p.name.clone(), to_f32(&p.value)))
        .collect();
    write_section(&mut w, "params", &tensor_table(&param_tensors)?)?;
    write_section(&mut w, "adam_m", &tensor_table(&named(&state.m))?)?;
    write_section(&mut w, "adam_v", &tensor_table(&named(&state.v))?)?;

    if let Some(masks) = frozen_masks {
        let tensors: Vec<(String, Array2<f32>)> = masks
            .iter()
            .map(|(id, mask)| {
                (
                    id.clone(),
                    mask.mapv(|bit| if bit { 1.0f32 } else { 0.0 }),
                )
            })
            .collect();
        write_section(&mut w, "frozen_mask", &tensor_table(&tensors)?)?;
    }
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::CheckpointFormat("unexpected end of data".into()));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::CheckpointFormat("invalid UTF-8 in name".into()))
    }

    fn done(&self) -> bool {
        self.pos >= self.data.len()
    }
}

fn read_tensor_table(payload: &[u8]) -> Result<Vec<(String, Array2<f32>)>> {
    let mut cur = Cursor {
        data: payload,
        pos: 0,
    };
    let count = cur.u32()? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name = cur.string()?;
        let ndims = cur.u32()?;
        if ndims != 2 {
            return Err(Error::CheckpointFormat(format!(
                "tensor '{name}': expected 2 dims, got {ndims}"
            )));
        }
        let rows = cur.u32()? as usize;
        let cols = cur.u32()? as usize;
        let bytes = cur.take(rows * cols * 4)?;
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::CheckpointFormat(format!("tensor '{name}': {e}")))?;
        tensors.push((name, tensor));
    }
    Ok(tensors)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut data = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut data)?;
    if data.len() < CHECKPOINT_MAGIC.len() + 4 || &data[..9] != CHECKPOINT_MAGIC {
        return Err(Error::CheckpointFormat("bad magic bytes".into()));
    }
    let mut cur = Cursor {
        data: &data,
        pos: 9,
    };
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointFormat(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }

    let mut sections: BTreeMap<String, &[u8]> = BTreeMap::new();
    while !cur.done() {
        let name = cur.string()?;
        let len = cur.u64()? as usize;
        sections.insert(name, cur.take(len)?);
    }
    let required = |name: &str| -> Result<&[u8]> {
        sections
            .get(name)
            .copied()
            .ok_or_else(|| Error::CheckpointFormat(format!("missing section '{name}'")))
    };

    let mut config: ModelConfig = serde_json::from_slice(required("config")?)
        .map_err(|e| Error::CheckpointFormat(format!("bad config section: {e}")))?;
    config.fill_default_widths();
    let step_bytes: [u8; 8] = required("step")?
        .try_into()
        .map_err(|_| Error::CheckpointFormat("bad step section".into()))?;
    let frozen_masks = match sections.get("frozen_mask") {
        Some(payload) => Some(
            read_tensor_table(payload)?
                .into_iter()
                .map(|(id, t)| (id, t.mapv(|v| v != 0.0)))
                .collect(),
        ),
        None => None,
    };

    Ok(Checkpoint {
        config,
        step: u64::from_le_bytes(step_bytes),
        params: read_tensor_table(required("params")?)?,
        adam_m: read_tensor_table(required("adam_m")?)?,
        adam_v: read_tensor_table(required("adam_v")?)?,
        frozen_masks,
    })
}

impl Checkpoint {
    fn convert<F: Real>(tensors: &[(String, Array2<f32>)]) -> Vec<(String, Array2<F>)> {
        tensors
            .iter()
            .map(|(n, t)| (n.clone(), t.mapv(|v| F::from_f64(v as f64))))
            .collect()
    }

    /// Binds the checkpoint to `expected`, verifying every tensor name and
    /// shape; mismatches are reported all at once.
    pub fn into_model<F: Real>(&self, expected: &ModelConfig) -> Result<ModelParams<F>> {
        if self.config != *expected {
            return Err(Error::CheckpointMismatch(vec![format!(
                "stored config differs from the requested one (stored hidden_dim {}, requested {})",
                self.config.hidden_dim, expected.hidden_dim
            )]));
        }
        ModelParams::from_named_tensors(expected, Self::convert(&self.params))
    }

    /// Restores the optimizer state for `params`. Shapes must match; use
    /// [`AdamState::new`] instead to reset the optimizer.
    pub fn into_adam_state<F: Real>(&self, params: &ModelParams<F>) -> Result<AdamState<F>> {
        let mut offenders = Vec::new();
        for (kind, stored) in [("adam_m", &self.adam_m), ("adam_v", &self.adam_v)] {
            if stored.len() != params.entries().len() {
                offenders.push(format!(
                    "{kind}: {} tensors for {} parameters",
                    stored.len(),
                    params.entries().len()
                ));
                continue;
            }
            for (p, (name, tensor)) in params.entries().iter().zip(stored.iter()) {
                if p.name != *name || p.value.dim() != tensor.dim() {
                    offenders.push(format!("{kind}: tensor '{name}' does not match '{}'", p.name));
                }
            }
        }
        if !offenders.is_empty() {
            return Err(Error::CheckpointMismatch(offenders));
        }
        Ok(AdamState {
            step: self.step,
            m: Self::convert(&self.adam_m).into_iter().map(|(_, t)| t).collect(),
            v: Self::convert(&self.adam_v).into_iter().map(|(_, t)| t).collect(),
        })
    }
}

//! Binary model checkpoints with a JSON sidecar.
//!
//! Layout, little-endian: `"SSM1"`, `u32` input width, hidden size, class
//! count, `f64` dropout rate, then one block per tensor in
//! [`TENSOR_NAMES`] order: `u16` name length, name bytes, `u32` element
//! count, `f64` values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::data::fseq::write_bytes;
use crate::data::BinningScheme;
use crate::error::{Error, Result};
use crate::nn::{ModelParams, ModelShape, TENSOR_NAMES};
use crate::reduce::ReductionConfig;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SSM1";

/// Training context stored next to the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub shape: ModelShape,
    pub dropout: f64,
    pub feature_dim: usize,
    pub reduction: ReductionConfig,
    pub binning: BinningScheme,
    pub hyperparameters: Map<String, Value>,
    pub fold: usize,
    pub best_epoch: Option<usize>,
}

pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("json")
}

pub fn encode_model(model: &ModelParams) -> Vec<u8> {
    let shape = model.shape();
    let mut out = Vec::with_capacity(24 + model.parameter_count() * 8 + TENSOR_NAMES.len() * 16);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    for dim in [shape.input_width, shape.hidden, shape.classes] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.extend_from_slice(&model.dropout_rate.to_le_bytes());
    for (name, values) in TENSOR_NAMES.iter().zip(model.tensors()) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(values.len() as u32).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos,
                reason: format!("truncated {what}: need {n} bytes, {} left", self.bytes.len() - self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelParams> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Format {
            offset: 0,
            reason: "not a model checkpoint".into(),
        });
    }
    let input_width = cur.u32("header")? as usize;
    let hidden = cur.u32("header")? as usize;
    let classes = cur.u32("header")? as usize;
    let shape = ModelShape {
        input_width,
        hidden,
        classes,
    };
    shape.validate().map_err(|e| Error::Format {
        offset: 4,
        reason: e.to_string(),
    })?;
    let dropout_rate = cur.f64("header")?;
    let mut model = ModelParams::zeros(&shape, dropout_rate);
    for (name, slot) in TENSOR_NAMES.iter().zip(model.tensors_mut()) {
        let at = cur.pos;
        let len = cur.u16("tensor name length")? as usize;
        let got = cur.take(len, "tensor name")?;
        if got != name.as_bytes() {
            return Err(Error::Format {
                offset: at,
                reason: format!("expected tensor {name}, found {:?}", String::from_utf8_lossy(got)),
            });
        }
        let at = cur.pos;
        let count = cur.u32("element count")? as usize;
        if count != slot.len() {
            return Err(Error::Format {
                offset: at,
                reason: format!("{name} has {count} values, shape needs {}", slot.len()),
            });
        }
        for v in slot.iter_mut() {
            let at = cur.pos;
            *v = cur.f64(name)?;
            if !v.is_finite() {
                return Err(Error::Format {
                    offset: at,
                    reason: format!("non-finite value in {name}"),
                });
            }
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format {
            offset: cur.pos,
            reason: "trailing bytes after last tensor".into(),
        });
    }
    model.validate().map_err(|e| Error::Format {
        offset: 4,
        reason: e.to_string(),
    })?;
    Ok(model)
}

/// Writes the weights to `path` and, when given, the metadata to the sidecar.
pub fn save_checkpoint(path: &Path, model: &ModelParams, meta: Option<&CheckpointMeta>) -> Result<()> {
    write_bytes(path, &encode_model(model))?;
    if let Some(meta) = meta {
        let mut text = serde_json::to_string_pretty(meta).map_err(|e| Error::json("checkpoint metadata", e))?;
        text.push('\n');
        write_bytes(&sidecar_path(path), text.as_bytes())?;
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes).map_err(|e| match e {
        Error::Format { offset, reason } => Error::Load(format!("{}: byte {offset}: {reason}", path.display())),
        other => other,
    })
}

/// Loads weights plus the sidecar if one exists. A sidecar that disagrees
/// with the weights is an error.
pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, Option<CheckpointMeta>)> {
    let model = load_model(path)?;
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok((model, None));
    }
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&text).map_err(|e| Error::json(side.display().to_string(), e))?;
    if meta.shape != model.shape() {
        return Err(Error::Load(format!(
            "{}: sidecar shape {:?} differs from weights {:?}",
            side.display(),
            meta.shape,
            model.shape()
        )));
    }
    Ok((model, Some(meta)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ModelParams {
        ModelParams::init(
            &ModelShape {
                input_width: 7,
                hidden: 4,
                classes: 3,
            },
            0.2,
            11,
        )
        .unwrap()
    }

    #[test]
    fn bytes_round_trip_exactly() {
        let m = model();
        let bytes = encode_model(&m);
        assert_eq!(&bytes[..4], b"SSM1");
        assert_eq!(decode_model(&bytes).unwrap(), m);
        assert_eq!(encode_model(&decode_model(&bytes).unwrap()), bytes);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = encode_model(&model());
        assert!(decode_model(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode_model(&extra), Err(Error::Format { .. })));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(decode_model(&magic), Err(Error::Format { offset: 0, .. })));
        let mut name = bytes.clone();
        name[26] = b'X';
        assert!(decode_model(&name).is_err());
        let mut nan = bytes;
        let last = nan.len() - 8;
        nan[last..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_model(&nan).is_err());
    }

    #[test]
    fn files_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoints/fold_1.ssm");
        let m = model();
        let meta = CheckpointMeta {
            shape: m.shape(),
            dropout: m.dropout_rate,
            feature_dim: 7,
            reduction: ReductionConfig {
                window: 1,
                ..Default::default()
            },
            binning: BinningScheme::default(),
            hyperparameters: crate::train::TrainConfig::default().to_json(),
            fold: 1,
            best_epoch: Some(3),
        };
        save_checkpoint(&path, &m, Some(&meta)).unwrap();
        assert!(dir.path().join("checkpoints/fold_1.json").exists());
        let (back, side) = load_checkpoint(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(side.unwrap(), meta);
        assert!(matches!(
            load_model(&dir.path().join("missing.ssm")),
            Err(Error::Io { .. })
        ));
    }
}

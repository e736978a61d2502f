use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::model::{AttentionHead, FeatureScaler, Linear, MilModel, ModelConfig};
use super::train::TrainParams;
use super::Method;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const CHECKPOINT_FORMAT: &str = "clonescope-mil/1";

/// Row-major f64 matrix, little-endian, base64-encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub rows: usize,
    pub cols: usize,
    pub data: String,
}

impl Block {
    fn encode<T: Real>(rows: usize, cols: usize, values: &[T]) -> Self {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.as_f64().to_le_bytes()).collect();
        Self { rows, cols, data: STANDARD.encode(bytes) }
    }

    fn decode<T: Real>(&self, name: &str) -> Result<Vec<T>> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| Error::Truncated(format!("block `{name}`: {e}")))?;
        if bytes.len() != self.rows * self.cols * 8 {
            return Err(Error::DimensionMismatch(format!(
                "block `{name}` holds {} bytes, expected {}×{} f64",
                bytes.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(bytes.chunks_exact(8).map(|b| T::of(f64::from_le_bytes(b.try_into().expect("8 bytes")))).collect())
    }
}

/// Serialized model plus what is needed to apply it to new bags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub method: Method,
    pub classes: Vec<String>,
    pub dim: usize,
    pub config: ModelConfig,
    pub seed: u64,
    pub hyper: Option<TrainParams>,
    pub scaler: Option<FeatureScaler<f64>>,
    pub blocks: BTreeMap<String, Block>,
}

impl Checkpoint {
    pub fn from_model<T: Real>(
        model: &MilModel<T>,
        hyper: Option<TrainParams>,
        scaler: Option<&FeatureScaler<T>>,
    ) -> Self {
        let mut blocks = BTreeMap::new();
        for (k, h) in model.attention.iter().enumerate() {
            blocks.insert(format!("attention.{k}.v"), Block::encode(h.hidden, h.dim, &h.v));
            blocks.insert(format!("attention.{k}.w"), Block::encode(1, h.hidden, &h.w));
        }
        for (name, lin) in [("head", &model.head), ("patch_head", &model.patch_head)] {
            blocks.insert(format!("{name}.weight"), Block::encode(lin.outputs, lin.inputs, &lin.weight));
            blocks.insert(format!("{name}.bias"), Block::encode(1, lin.outputs, &lin.bias));
        }
        let scaler = scaler.map(|s| FeatureScaler {
            mean: s.mean.iter().map(|v| v.as_f64()).collect(),
            scale: s.scale.iter().map(|v| v.as_f64()).collect(),
        });
        Self {
            format: CHECKPOINT_FORMAT.into(),
            method: model.method,
            classes: model.classes.clone(),
            dim: model.dim,
            config: model.config,
            seed: model.seed,
            hyper,
            scaler,
            blocks,
        }
    }

    fn block<T: Real>(&self, name: &str, rows: usize, cols: usize) -> Result<Vec<T>> {
        let b = self.blocks.get(name).ok_or_else(|| Error::Truncated(format!("missing block `{name}`")))?;
        if (b.rows, b.cols) != (rows, cols) {
            return Err(Error::DimensionMismatch(format!(
                "block `{name}` is {}×{}, expected {rows}×{cols}",
                b.rows, b.cols
            )));
        }
        b.decode(name)
    }

    pub fn to_model<T: Real>(&self) -> Result<MilModel<T>> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::InvalidArgument(format!("unsupported checkpoint format `{}`", self.format)));
        }
        let mut model = MilModel::new(self.method, self.classes.clone(), self.dim, self.config, self.seed)?;
        let k = self.classes.len();
        let (hidden, dim) = (self.config.hidden, self.dim);
        let attention = (0..model.attention.len())
            .map(|i| {
                Ok(AttentionHead {
                    v: self.block(&format!("attention.{i}.v"), hidden, dim)?,
                    w: self.block(&format!("attention.{i}.w"), 1, hidden)?,
                    hidden,
                    dim,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        model.attention = attention;
        let linear = |name: &str, inputs: usize| -> Result<Linear<T>> {
            Ok(Linear {
                inputs,
                outputs: k,
                weight: self.block(&format!("{name}.weight"), k, inputs)?,
                bias: self.block(&format!("{name}.bias"), 1, k)?,
            })
        };
        model.head = linear("head", model.head.inputs)?;
        model.patch_head = linear("patch_head", dim)?;
        Ok(model)
    }

    pub fn scaler<T: Real>(&self) -> Option<FeatureScaler<T>> {
        self.scaler.as_ref().map(|s| FeatureScaler {
            mean: s.mean.iter().map(|&v| T::of(v)).collect(),
            scale: s.scale.iter().map(|&v| T::of(v)).collect(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let classes = vec!["A".to_string(), "B".into(), "C".into()];
        let m = MilModel::<f64>::new(Method::Abmilp, classes, 6, ModelConfig { hidden: 5, heads: 2 }, 4).unwrap();
        let scaler = FeatureScaler { mean: vec![0.25; 6], scale: vec![2.0; 6] };
        let ck = Checkpoint::from_model(&m, Some(TrainParams::default()), Some(&scaler));
        let json = serde_json::to_string(&ck).unwrap();
        let back: Checkpoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_model::<f64>().unwrap(), m);
        assert_eq!(back.scaler::<f64>().unwrap(), scaler);
    }

    #[test]
    fn rejects_wrong_shape() {
        let classes = vec!["A".to_string(), "B".into()];
        let m = MilModel::<f32>::new(Method::Emax, classes, 3, ModelConfig::default(), 0).unwrap();
        let mut ck = Checkpoint::from_model(&m, None, None);
        ck.dim = 4;
        assert!(matches!(ck.to_model::<f32>(), Err(Error::DimensionMismatch(_))));
    }
}

//! Versioned JSON checkpoints: named tensors with shapes, the model
//! hyperparameters, the frozen traversal sequence and the input preprocessing.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, Parameters, TwoStreamModel};
use crate::embedding::{EncoderKind, Preprocessing, TinyConv};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "facetopo-checkpoint/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub model: ModelConfig,
    pub sequence: Vec<usize>,
    pub preprocessing: Preprocessing,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_model(model: &TwoStreamModel, sequence: &[usize], preprocessing: &Preprocessing) -> Self {
        let mut tensors = Vec::new();
        model.visit("", &mut |name, shape, data| {
            tensors.push(NamedTensor {
                name: name.to_string(),
                shape: shape.to_vec(),
                data: data.to_vec(),
            })
        });
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            model: model.config.clone(),
            sequence: sequence.to_vec(),
            preprocessing: preprocessing.clone(),
            tensors,
        }
    }

    /// Rebuilds the model, checking every tensor name and shape.
    pub fn to_model(&self) -> Result<TwoStreamModel> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::format(None, format!("unsupported checkpoint format '{}'", self.format)));
        }
        let encoder = match self.preprocessing.encoder {
            EncoderKind::TinyConv { filters, seed } => Some(TinyConv::new(self.preprocessing.patch.size, filters, seed)),
            _ => None,
        };
        let mut model = TwoStreamModel::new(self.model.clone(), encoder, 0)?;
        let mut expected = Vec::new();
        model.visit("", &mut |name, shape, _| expected.push((name.to_string(), shape.to_vec())));
        if expected.len() != self.tensors.len() {
            return Err(Error::format(
                None,
                format!("checkpoint has {} tensors, model needs {}", self.tensors.len(), expected.len()),
            ));
        }
        for ((name, shape), t) in expected.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::format(None, format!("tensor '{}' does not match model slot '{name}'", t.name)));
            }
        }
        let flat: Vec<f64> = self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect();
        model.set_flat(&flat);
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(Some(e.line()), format!("checkpoint: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{FeatureNormalizer, PatchConfig};
    use crate::neural::gradcheck::toy_model;

    fn prep() -> Preprocessing {
        Preprocessing {
            patch: PatchConfig { size: 5 },
            encoder: EncoderKind::TinyConv { filters: 2, seed: 49 },
            structure: FeatureNormalizer::identity(4, 2),
            texture: None,
        }
    }

    #[test]
    fn roundtrip_restores_identical_model() {
        let (model, samples) = toy_model(3);
        let ck = Checkpoint::from_model(&model, &[0, 1, 0, 2, 3, 2, 0], &prep());
        let back: Checkpoint = serde_json::from_str(&ck.to_json()).unwrap();
        assert_eq!(back, ck);
        let restored = back.to_model().unwrap();
        assert_eq!(restored.to_flat(), model.to_flat());
        let a = model.predict(&samples[0].0).unwrap();
        let b = restored.predict(&samples[0].0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_format_tag_rejected() {
        let (model, _) = toy_model(3);
        let mut ck = Checkpoint::from_model(&model, &[0], &prep());
        ck.format = "other/v0".into();
        assert!(ck.to_model().is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let (model, _) = toy_model(3);
        let mut ck = Checkpoint::from_model(&model, &[0], &prep());
        ck.tensors[0].shape = vec![1];
        assert!(ck.to_model().is_err());
    }
}

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, Dense, MlpModel};
use crate::data::NormalizationStats;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// On-disk model snapshot (JSON). Floats are written in shortest round-trip
/// form and parsed exactly, so weights survive a save/load bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub dropout_rate: f64,
    /// Row-major `(in_dim, out_dim)` per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormalizationStats>,
}

impl Checkpoint {
    pub fn from_model(model: &MlpModel, normalization: Option<NormalizationStats>) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            layer_dims: model.layer_dims().to_vec(),
            activation: model.activation(),
            dropout_rate: model.dropout_rate(),
            weights: model.layers().iter().map(|l| l.weights.iter().copied().collect()).collect(),
            biases: model.layers().iter().map(|l| l.biases.to_vec()).collect(),
            normalization,
        }
    }

    pub fn to_model(&self) -> Result<MlpModel> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Data(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let n = self.layer_dims.len().saturating_sub(1);
        if self.weights.len() != n || self.biases.len() != n {
            return Err(Error::Data("checkpoint layer count does not match layer_dims".into()));
        }
        let mut layers = Vec::with_capacity(n);
        for k in 0..n {
            let (i, o) = (self.layer_dims[k], self.layer_dims[k + 1]);
            let weights = Array2::from_shape_vec((i, o), self.weights[k].clone())
                .map_err(|e| Error::Data(format!("checkpoint layer {k}: {e}")))?;
            let biases = Array1::from(self.biases[k].clone());
            layers.push(Dense { weights, biases });
        }
        MlpModel::from_layers(layers, self.activation, self.dropout_rate)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

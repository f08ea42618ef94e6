use serde::{Deserialize, Serialize};

use crate::nn::{Activation, AdamConfig};
use crate::objectives::QdHyperparams;
use crate::{Error, Result};

/// Which interval method a run trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    DualAqd,
    Qd,
    QdPlus,
    McDropoutPi,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::DualAqd, LossKind::Qd, LossKind::QdPlus, LossKind::McDropoutPi];

    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::DualAqd => "dualaqd",
            LossKind::Qd => "qd",
            LossKind::QdPlus => "qdplus",
            LossKind::McDropoutPi => "mcdropout_pi",
        }
    }

    /// Width of the interval network's output layer.
    pub fn interval_outputs(&self) -> usize {
        match self {
            LossKind::QdPlus => 3,
            _ => 2,
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown loss_kind {s:?}; valid values are dualaqd, qd, qdplus, mcdropout_pi"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Significance level; the coverage target is `1 - tau`.
    pub tau: f64,
    /// Learning rate of the self-adaptive λ.
    pub alpha: f64,
    pub batch_size: usize,
    /// Epochs for the interval network.
    pub max_epochs: usize,
    /// Epochs for the point network.
    pub point_epochs: usize,
    pub loss_kind: LossKind,
    pub batch_sorting: bool,
    /// Monte Carlo dropout passes at evaluation time.
    pub mc_passes: usize,
    pub seed: u64,
    pub optimizer: AdamConfig,
    pub dropout_rate: f64,
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    /// QD-Ens / QD+ coefficients. Their `tau` is kept equal to [`TrainConfig::tau`].
    pub qd: QdHyperparams,
    /// Ensemble members for the QD-family baselines.
    pub ensemble_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            tau: 0.05,
            alpha: 0.005,
            batch_size: 16,
            max_epochs: 500,
            point_epochs: 500,
            loss_kind: LossKind::DualAqd,
            batch_sorting: true,
            mc_passes: 100,
            seed: 7,
            optimizer: AdamConfig::default(),
            dropout_rate: 0.1,
            hidden_layers: vec![100, 100],
            activation: Activation::Relu,
            qd: QdHyperparams::default(),
            ensemble_size: 5,
        }
    }
}

impl TrainConfig {
    /// Collects every problem instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.tau > 0.0 && self.tau < 1.0) {
            problems.push(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if !(self.alpha > 0.0) {
            problems.push(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be at least 1".to_string());
        }
        if self.mc_passes == 0 {
            problems.push("mc_passes must be at least 1".to_string());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            problems.push(format!("dropout_rate must lie in [0, 1), got {}", self.dropout_rate));
        }
        if self.hidden_layers.contains(&0) {
            problems.push("hidden layer widths must be positive".to_string());
        }
        if !(self.optimizer.learning_rate > 0.0) {
            problems.push(format!("learning_rate must be positive, got {}", self.optimizer.learning_rate));
        }
        if self.ensemble_size == 0 {
            problems.push("ensemble_size must be at least 1".to_string());
        }
        if let Err(Error::Config(msg)) = self.qd_hyperparams().validate() {
            problems.push(msg);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn qd_hyperparams(&self) -> QdHyperparams {
        QdHyperparams { tau: self.tau, ..self.qd }
    }

    pub fn coverage_target(&self) -> f64 {
        1.0 - self.tau
    }

    pub fn layer_dims(&self, inputs: usize, outputs: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_layers.len() + 2);
        dims.push(inputs);
        dims.extend(&self.hidden_layers);
        dims.push(outputs);
        dims
    }
}

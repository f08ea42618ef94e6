//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! Weights are stored as `(in_dim, out_dim)` matrices so a batch `X` of shape
//! `(n, in_dim)` maps to `X · W + b`. Hidden layers apply the configured
//! activation followed by inverted dropout; the output layer is linear.

mod adam;
mod checkpoint;

pub use adam::{AdamConfig, OptimizerState};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative evaluated at the pre-activation `z`. ReLU uses 0 at the kink.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Config(format!(
                "unknown activation {other:?}; expected one of relu, tanh, identity"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// Shape `(in_dim, out_dim)`.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.ncols()
    }

    /// He-uniform weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`; biases `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    ///
    /// Nonzero biases spread the ReLU kinks over the input range, which matters
    /// for low-dimensional inputs.
    pub fn he_uniform<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / in_dim as f64).sqrt();
        let weights = Array2::from_shape_fn((in_dim, out_dim), |_| rng.random_range(-limit..limit));
        let bias_limit = 1.0 / (in_dim as f64).sqrt();
        let biases = Array1::from_shape_fn(out_dim, |_| rng.random_range(-bias_limit..bias_limit));
        Dense { weights, biases }
    }
}

/// A feed-forward network: `layer_dims[0]` inputs, hidden layers, and a 1-3 unit linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    layers: Vec<Dense>,
    activation: Activation,
    dropout_rate: f64,
}

/// Everything the backward pass needs from a forward call.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input to each layer (after activation and dropout of the previous one).
    pub layer_inputs: Vec<Array2<f64>>,
    /// Pre-activation of every hidden layer.
    pub pre_activations: Vec<Array2<f64>>,
    /// Inverted-dropout mask per hidden layer; `None` means all ones.
    pub masks: Vec<Option<Array2<f64>>>,
    pub dropout_active: bool,
}

/// Parameter gradients, laid out like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Flattened in the same order as [`MlpModel::parameters`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }
}

impl MlpModel {
    /// Builds a freshly initialized network. `layer_dims` lists input width, hidden widths, output width.
    pub fn new<R: Rng + ?Sized>(
        layer_dims: &[usize],
        activation: Activation,
        dropout_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        validate_dims(layer_dims, dropout_rate)?;
        let layers = layer_dims
            .windows(2)
            .map(|w| Dense::he_uniform(w[0], w[1], rng))
            .collect();
        Ok(MlpModel {
            layer_dims: layer_dims.to_vec(),
            layers,
            activation,
            dropout_rate,
        })
    }

    /// Builds a network from explicit parameters, checking that the shapes chain.
    pub fn from_layers(layers: Vec<Dense>, activation: Activation, dropout_rate: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("a network needs at least one layer".into()));
        }
        let mut dims = vec![layers[0].in_dim()];
        for (k, layer) in layers.iter().enumerate() {
            if layer.in_dim() != *dims.last().unwrap() {
                return Err(Error::Config(format!(
                    "layer {k} expects {} inputs but the previous layer produces {}",
                    layer.in_dim(),
                    dims.last().unwrap()
                )));
            }
            if layer.biases.len() != layer.out_dim() {
                return Err(Error::Config(format!(
                    "layer {k} has {} biases for {} outputs",
                    layer.biases.len(),
                    layer.out_dim()
                )));
            }
            dims.push(layer.out_dim());
        }
        validate_dims(&dims, dropout_rate)?;
        Ok(MlpModel {
            layer_dims: dims,
            layers,
            activation,
            dropout_rate,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All parameters flattened layer by layer (weights row-major, then biases).
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_parameters());
        for layer in &self.layers {
            out.extend(layer.weights.iter().copied());
            out.extend(layer.biases.iter().copied());
        }
        out
    }

    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_parameters() {
            return Err(Error::Contract(format!(
                "expected {} parameters, got {}",
                self.num_parameters(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for layer in &mut self.layers {
            layer.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            layer.biases.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    /// Runs a batch `(n, input_dim)` through the network.
    ///
    /// Passing an RNG activates dropout on every hidden layer; `None` gives the
    /// deterministic (inference) output.
    pub fn forward(
        &self,
        x: ArrayView2<'_, f64>,
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<(Array2<f64>, ForwardTrace)> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Config(format!(
                "input has {} columns but the network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        let dropout_active = rng.is_some() && self.dropout_rate > 0.0;
        let keep = 1.0 - self.dropout_rate;
        let n_hidden = self.layers.len() - 1;

        let mut trace = ForwardTrace {
            layer_inputs: Vec::with_capacity(self.layers.len()),
            pre_activations: Vec::with_capacity(n_hidden),
            masks: Vec::with_capacity(n_hidden),
            dropout_active,
        };
        let mut current = x.to_owned();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = current.dot(&layer.weights) + &layer.biases;
            trace.layer_inputs.push(current);
            if k == n_hidden {
                return Ok((z, trace));
            }
            let mut a = z.mapv(|v| self.activation.apply(v));
            let mask = match rng.as_deref_mut() {
                Some(rng) if dropout_active => {
                    let mask = Array2::from_shape_fn(a.raw_dim(), |_| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    a *= &mask;
                    Some(mask)
                }
                _ => None,
            };
            trace.pre_activations.push(z);
            trace.masks.push(mask);
            current = a;
        }
        unreachable!("network has at least one layer")
    }

    /// Deterministic batch prediction (dropout disabled).
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.forward(x, None).map(|(y, _)| y)
    }

    /// One dropout-active pass.
    pub fn sample<R: RngCore>(&self, x: ArrayView2<'_, f64>, rng: &mut R) -> Result<Array2<f64>> {
        self.forward(x, Some(rng)).map(|(y, _)| y)
    }

    /// Back-propagates `output_gradient` (dLoss/dOutput, shape `(n, output_dim)`).
    ///
    /// The masks stored in `trace` are reused, so the gradient matches the exact
    /// sub-network sampled in the forward pass.
    pub fn backward(&self, trace: &ForwardTrace, output_gradient: ArrayView2<'_, f64>) -> Result<Gradients> {
        let n_layers = self.layers.len();
        if trace.layer_inputs.len() != n_layers || trace.pre_activations.len() != n_layers - 1 {
            return Err(Error::Contract("forward trace does not belong to this network".into()));
        }
        let n = trace.layer_inputs[0].nrows();
        if output_gradient.dim() != (n, self.output_dim()) {
            return Err(Error::Contract(format!(
                "output gradient has shape {:?}, expected ({n}, {})",
                output_gradient.dim(),
                self.output_dim()
            )));
        }

        let mut grad_w = vec![Array2::zeros((0, 0)); n_layers];
        let mut grad_b = vec![Array1::zeros(0); n_layers];
        let mut delta = output_gradient.to_owned();
        for k in (0..n_layers).rev() {
            let input = &trace.layer_inputs[k];
            if input.ncols() != self.layers[k].in_dim() {
                return Err(Error::Contract("forward trace does not belong to this network".into()));
            }
            grad_w[k] = input.t().dot(&delta);
            grad_b[k] = delta.sum_axis(Axis(0));
            if k == 0 {
                break;
            }
            let mut upstream = delta.dot(&self.layers[k].weights.t());
            if let Some(mask) = &trace.masks[k - 1] {
                upstream *= mask;
            }
            let activation = self.activation;
            upstream.zip_mut_with(&trace.pre_activations[k - 1], |d, &z| *d *= activation.derivative(z));
            delta = upstream;
        }
        Ok(Gradients {
            weights: grad_w,
            biases: grad_b,
        })
    }
}

fn validate_dims(layer_dims: &[usize], dropout_rate: f64) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::Config("layer_dims needs an input and an output width".into()));
    }
    if let Some(k) = layer_dims.iter().position(|&d| d == 0) {
        return Err(Error::Config(format!("layer width {k} is zero")));
    }
    let out = *layer_dims.last().unwrap();
    if !(1..=3).contains(&out) {
        return Err(Error::Config(format!("output width must be 1, 2 or 3, got {out}")));
    }
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(Error::Config(format!("dropout rate must lie in [0, 1), got {dropout_rate}")));
    }
    Ok(())
}

/// Initializes `g` from `f`: every layer except the output head is copied.
///
/// Both networks must share input and hidden widths; their output widths may differ.
pub fn transfer_weights(f: &MlpModel, g: &mut MlpModel) -> Result<()> {
    let fd = f.layer_dims();
    let gd = g.layer_dims();
    if fd.len() != gd.len() || fd[..fd.len() - 1] != gd[..gd.len() - 1] {
        return Err(Error::Config(format!(
            "cannot transfer weights between architectures {fd:?} and {gd:?}"
        )));
    }
    let n = f.layers.len();
    for (dst, src) in g.layers[..n - 1].iter_mut().zip(&f.layers[..n - 1]) {
        dst.clone_from(src);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn zero_weights_output_equals_bias() {
        let layers = vec![
            Dense {
                weights: Array2::zeros((3, 4)),
                biases: Array1::zeros(4),
            },
            Dense {
                weights: Array2::zeros((4, 2)),
                biases: array![0.25, -1.5],
            },
        ];
        let m = MlpModel::from_layers(layers, Activation::Relu, 0.0).unwrap();
        let y = m.predict(array![[1.0, -2.0, 3.0], [9.0, 9.0, 9.0]].view()).unwrap();
        assert_eq!(y, array![[0.25, -1.5], [0.25, -1.5]]);
    }

    #[test]
    fn single_affine_layer() {
        let layer = Dense {
            weights: array![[2.0]],
            biases: array![1.0],
        };
        let m = MlpModel::from_layers(vec![layer], Activation::Relu, 0.0).unwrap();
        assert_eq!(m.predict(array![[3.0]].view()).unwrap(), array![[7.0]]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let m = MlpModel::new(&[3, 5, 1], Activation::Relu, 0.1, &mut rng()).unwrap();
        assert!(matches!(m.predict(Array2::zeros((2, 4)).view()), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_architectures() {
        assert!(MlpModel::new(&[3, 5, 4], Activation::Relu, 0.1, &mut rng()).is_err());
        assert!(MlpModel::new(&[3, 5, 1], Activation::Relu, 1.0, &mut rng()).is_err());
        assert!(MlpModel::new(&[3], Activation::Relu, 0.0, &mut rng()).is_err());
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradients() {
        let m = MlpModel::new(&[3, 6, 6, 2], Activation::Relu, 0.2, &mut rng()).unwrap();
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i as f64 - j as f64) * 0.3);
        let mut r = rng();
        let (y, trace) = m.forward(x.view(), Some(&mut r)).unwrap();
        let g = m.backward(&trace, Array2::zeros(y.raw_dim()).view()).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_gradient_is_input() {
        let layer = Dense {
            weights: array![[0.7]],
            biases: array![0.0],
        };
        let m = MlpModel::from_layers(vec![layer], Activation::Relu, 0.0).unwrap();
        let (_, trace) = m.forward(array![[2.5]].view(), None).unwrap();
        let g = m.backward(&trace, array![[1.0]].view()).unwrap();
        assert_eq!(g.weights[0], array![[2.5]]);
        assert_eq!(g.biases[0], array![1.0]);
    }

    #[test]
    fn backward_rejects_foreign_trace() {
        let a = MlpModel::new(&[2, 4, 1], Activation::Relu, 0.0, &mut rng()).unwrap();
        let b = MlpModel::new(&[2, 4, 4, 1], Activation::Relu, 0.0, &mut rng()).unwrap();
        let (_, trace) = a.forward(Array2::zeros((1, 2)).view(), None).unwrap();
        assert!(matches!(
            b.backward(&trace, Array2::zeros((1, 1)).view()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn dropout_disabled_is_deterministic() {
        let m = MlpModel::new(&[2, 8, 1], Activation::Relu, 0.5, &mut rng()).unwrap();
        let x = array![[0.3, -0.4]];
        assert_eq!(m.predict(x.view()).unwrap(), m.predict(x.view()).unwrap());
    }

    #[test]
    fn dropout_masks_are_scaled_bernoulli() {
        let m = MlpModel::new(&[2, 50, 1], Activation::Relu, 0.25, &mut rng()).unwrap();
        let mut r = rng();
        let (_, trace) = m.forward(Array2::ones((20, 2)).view(), Some(&mut r)).unwrap();
        let mask = trace.masks[0].as_ref().unwrap();
        assert!(mask.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.75).abs() < 1e-15));
        let kept = mask.iter().filter(|&&v| v > 0.0).count() as f64 / mask.len() as f64;
        assert!((kept - 0.75).abs() < 0.05, "kept fraction {kept}");
    }

    #[test]
    fn transfer_copies_hidden_layers_only() {
        let f = MlpModel::new(&[3, 7, 7, 1], Activation::Relu, 0.1, &mut rng()).unwrap();
        let mut g = MlpModel::new(&[3, 7, 7, 2], Activation::Relu, 0.1, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let head_before = g.layers()[2].clone();
        transfer_weights(&f, &mut g).unwrap();
        assert_eq!(g.layers()[0], f.layers()[0]);
        assert_eq!(g.layers()[1], f.layers()[1]);
        assert_eq!(g.layers()[2], head_before);
    }

    #[test]
    fn transfer_rejects_mismatched_hidden_dims() {
        let f = MlpModel::new(&[3, 7, 7, 1], Activation::Relu, 0.1, &mut rng()).unwrap();
        let mut g = MlpModel::new(&[3, 7, 8, 2], Activation::Relu, 0.1, &mut rng()).unwrap();
        assert!(matches!(transfer_weights(&f, &mut g), Err(Error::Config(_))));
    }

    #[test]
    fn parameter_round_trip() {
        let mut m = MlpModel::new(&[2, 3, 2], Activation::Tanh, 0.0, &mut rng()).unwrap();
        let p = m.parameters();
        let doubled: Vec<f64> = p.iter().map(|v| v * 2.0).collect();
        m.set_parameters(&doubled).unwrap();
        assert_eq!(m.parameters(), doubled);
        assert!(m.set_parameters(&p[1..]).is_err());
    }
}

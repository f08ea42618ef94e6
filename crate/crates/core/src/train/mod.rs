//! Training of the point network `f` and the interval network `g`, the
//! self-adaptive λ schedule, batch sorting, checkpoint selection and
//! cross-validation.

mod config;
mod cv;
mod selection;

pub use config::{LossKind, TrainConfig};
pub use cv::{
    cross_validate, fit_fold, grid_search_alpha, AlphaRow, CvReport, FittedPredictor, FoldOutcome, GridSearchResult,
};
pub use selection::{dominates, select_solution, SolutionRecord, PICP_TIE_TOLERANCE};

use log::debug;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DatasetSplit;
use crate::inference::{LOWER, POINT, UPPER};
use crate::metrics;
use crate::nn::{transfer_weights, Dense, MlpModel, OptimizerState};
use crate::objectives::{self, BatchPiOutputs, IntervalLoss};
use crate::{derive_seed, Error, Result};

// Independent RNG streams derived from a run seed.
const STREAM_F_INIT: u64 = 1;
const STREAM_F_SHUFFLE: u64 = 2;
const STREAM_F_DROPOUT: u64 = 3;
const STREAM_G_INIT: u64 = 4;
const STREAM_G_SHUFFLE: u64 = 5;
const STREAM_G_DROPOUT: u64 = 6;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, id))
}

/// Random partition of `0..n` into consecutive batches; the last may be short.
pub fn shuffled_batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Sorts samples by their previous interval width (stable, ascending) and
/// chunks them into batches, so each batch holds samples of similar width.
pub fn batch_sorting(widths: &[f64], n: usize, batch_size: usize) -> Result<Vec<Vec<usize>>> {
    if widths.len() != n {
        return Err(Error::Contract(format!(
            "batch sorting got {} widths for {n} samples",
            widths.len()
        )));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| widths[a].total_cmp(&widths[b]));
    Ok(idx.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// `λ + α((1 - τ) - PICP_train)`, floored at 0.
pub fn update_lambda(lambda: f64, alpha: f64, tau: f64, picp_train: f64) -> f64 {
    (lambda + alpha * ((1.0 - tau) - picp_train)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaEntry {
    pub epoch: usize,
    pub picp_train: f64,
    /// `(1 - τ) - PICP_train`
    pub cost: f64,
    /// λ after this epoch's update.
    pub lambda: f64,
}

/// Per-epoch history of the self-adaptive coefficient. λ starts at 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LambdaTrace {
    pub entries: Vec<LambdaEntry>,
}

impl LambdaTrace {
    pub const INITIAL_LAMBDA: f64 = 1.0;

    /// Replays the recurrence and checks every recorded λ bit for bit.
    pub fn replays_exactly(&self, alpha: f64) -> bool {
        let mut lambda = Self::INITIAL_LAMBDA;
        for e in &self.entries {
            lambda = (lambda + alpha * e.cost).max(0.0);
            if lambda.to_bits() != e.lambda.to_bits() {
                return false;
            }
        }
        true
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }
}

/// Result of training the point network.
#[derive(Debug, Clone)]
pub struct PointTraining {
    /// Checkpoint with the lowest validation MSE.
    pub model: MlpModel,
    /// 0 when no epoch ran.
    pub best_epoch: usize,
    /// Normalized-unit validation MSE per epoch.
    pub val_mse: Vec<f64>,
}

fn select_rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

fn gather(v: &Array1<f64>, idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

/// Trains `f` on the MSE objective, keeping the best-validation checkpoint.
pub fn train_point_network(split: &DatasetSplit, config: &TrainConfig) -> Result<PointTraining> {
    let dims = config.layer_dims(split.train_x.ncols(), 1);
    let mut model = MlpModel::new(
        &dims,
        config.activation,
        config.dropout_rate,
        &mut stream(config.seed, STREAM_F_INIT),
    )?;
    let mut best = PointTraining {
        model: model.clone(),
        best_epoch: 0,
        val_mse: Vec::with_capacity(config.point_epochs),
    };
    let mut best_mse = f64::INFINITY;
    let mut opt = OptimizerState::for_model(&model, config.optimizer);
    let mut shuffle_rng = stream(config.seed, STREAM_F_SHUFFLE);
    let mut dropout_rng = stream(config.seed, STREAM_F_DROPOUT);
    let n = split.train_y.len();
    let val_y = split.val_y.to_vec();

    for epoch in 1..=config.point_epochs {
        for (b, batch) in shuffled_batches(n, config.batch_size, &mut shuffle_rng).iter().enumerate() {
            let x = select_rows(&split.train_x, batch);
            let y = gather(&split.train_y, batch);
            let (out, trace) = model.forward(x.view(), Some(&mut dropout_rng))?;
            let loss = objectives::mse_loss(&out.column(0).to_vec(), &y)?;
            if !loss.value.is_finite() {
                return Err(Error::Numeric(format!(
                    "point network loss is {} at epoch {epoch}, batch {b}",
                    loss.value
                )));
            }
            let grad = Array2::from_shape_vec((batch.len(), 1), loss.grad).expect("n x 1");
            let grads = model.backward(&trace, grad.view())?;
            opt.step_model(&mut model, &grads)
                .map_err(|e| Error::Numeric(format!("point network, epoch {epoch}, batch {b}: {e}")))?;
        }
        let pred = model.predict(split.val_x.view())?;
        let mse = metrics::mse(&pred.column(0).to_vec(), &val_y);
        best.val_mse.push(mse);
        if mse < best_mse {
            best_mse = mse;
            best.best_epoch = epoch;
            best.model.clone_from(&model);
        }
    }
    Ok(best)
}

/// Result of training an interval network.
#[derive(Debug, Clone)]
pub struct PiTraining {
    /// The dominance-best checkpoint.
    pub model: MlpModel,
    /// Empty for the QD-family losses, which have no λ.
    pub lambda_trace: LambdaTrace,
    pub records: Vec<SolutionRecord>,
    /// Training-set PICP after each epoch (from the metrics pass).
    pub picp_train: Vec<f64>,
    /// `None` when no epoch ran.
    pub selected: Option<SolutionRecord>,
}

/// Point estimates used for the coverage indicator of an interval network's output.
fn point_estimates(kind: LossKind, out: ArrayView2<'_, f64>, frozen: Option<&[f64]>) -> Vec<f64> {
    match (kind, frozen) {
        (LossKind::QdPlus, _) => out.column(POINT).to_vec(),
        (_, Some(p)) => p.to_vec(),
        _ => out
            .rows()
            .into_iter()
            .map(|r| 0.5 * (r[LOWER] + r[UPPER]))
            .collect(),
    }
}

fn interval_network(split: &DatasetSplit, f: Option<&MlpModel>, config: &TrainConfig, seed: u64) -> Result<MlpModel> {
    let kind = config.loss_kind;
    let dims = config.layer_dims(split.train_x.ncols(), kind.interval_outputs());
    let mut g = MlpModel::new(&dims, config.activation, config.dropout_rate, &mut stream(seed, STREAM_G_INIT))?;
    match kind {
        LossKind::DualAqd => {
            let f = f.ok_or_else(|| Error::Contract("DualAQD needs a trained point network".into()))?;
            transfer_weights(f, &mut g)?;
        }
        LossKind::Qd | LossKind::QdPlus => {
            // Start from wide intervals around the middle of the [0, 1] target range
            // so the capture-based losses see covered samples from the first batch.
            let head: &mut Dense = g.layers_mut().last_mut().expect("output layer");
            head.biases[LOWER] = -0.25;
            head.biases[UPPER] = 1.25;
            if kind == LossKind::QdPlus {
                head.biases[POINT] = 0.5;
            }
        }
        LossKind::McDropoutPi => {
            return Err(Error::Config("mcdropout_pi does not train an interval network".into()));
        }
    }
    Ok(g)
}

/// Trains the interval network `g` for `config.loss_kind` (DualAQD, QD or QD+).
///
/// Per epoch: batches (random on the first epoch or without sorting, sorted by
/// the previous widths otherwise), one optimizer step per batch, a
/// deterministic metrics pass over the training set giving PICP and widths,
/// the λ update (DualAQD only), and a validation snapshot. The returned model
/// is the dominance-best snapshot.
///
/// `f` is required for DualAQD, whose loss uses the frozen point estimates.
pub fn train_pi_network(
    split: &DatasetSplit,
    f: Option<&MlpModel>,
    config: &TrainConfig,
    seed: u64,
) -> Result<PiTraining> {
    let kind = config.loss_kind;
    let mut g = interval_network(split, f, config, seed)?;
    let hp = config.qd_hyperparams();
    let tau = config.tau;
    let target_range = split.stats.target.range();

    let (train_point, val_point) = match (kind, f) {
        (LossKind::DualAqd, Some(f)) => (
            Some(f.predict(split.train_x.view())?.column(0).to_vec()),
            Some(f.predict(split.val_x.view())?.column(0).to_vec()),
        ),
        _ => (None, None),
    };
    let train_y = split.train_y.to_vec();
    let val_y = split.val_y.to_vec();
    let n = train_y.len();

    let mut opt = OptimizerState::for_model(&g, config.optimizer);
    let mut shuffle_rng = stream(seed, STREAM_G_SHUFFLE);
    let mut dropout_rng = stream(seed, STREAM_G_DROPOUT);
    let mut lambda = LambdaTrace::INITIAL_LAMBDA;
    let mut out = PiTraining {
        model: g.clone(),
        lambda_trace: LambdaTrace::default(),
        records: Vec::with_capacity(config.max_epochs),
        picp_train: Vec::with_capacity(config.max_epochs),
        selected: None,
    };
    let mut widths: Option<Vec<f64>> = None;

    for epoch in 1..=config.max_epochs {
        let batches = match (&widths, config.batch_sorting) {
            (Some(w), true) => batch_sorting(w, n, config.batch_size)?,
            _ => shuffled_batches(n, config.batch_size, &mut shuffle_rng),
        };
        for (b, batch) in batches.iter().enumerate() {
            let x = select_rows(&split.train_x, batch);
            let y = gather(&split.train_y, batch);
            let (pred, trace) = g.forward(x.view(), Some(&mut dropout_rng))?;
            let lower = pred.column(LOWER).to_vec();
            let upper = pred.column(UPPER).to_vec();
            let (value, grad) = match kind {
                LossKind::DualAqd => {
                    let y_hat: Vec<f64> = batch.iter().map(|&i| train_point.as_ref().unwrap()[i]).collect();
                    let bo = BatchPiOutputs::new(&y, &y_hat, &upper, &lower)?;
                    let loss = objectives::dualaqd_loss(&bo, lambda).map_err(|e| {
                        Error::Numeric(format!("epoch {epoch}, batch {b}, lambda {lambda}: {e}"))
                    })?;
                    let grad = interval_gradient(batch.len(), 2, &loss.grad_upper, &loss.grad_lower, None);
                    (loss.terms.total, grad)
                }
                LossKind::Qd => {
                    let mid: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| 0.5 * (l + u)).collect();
                    let bo = BatchPiOutputs::new(&y, &mid, &upper, &lower)?;
                    let IntervalLoss {
                        value,
                        grad_upper,
                        grad_lower,
                        ..
                    } = objectives::qd_loss(&bo, &hp)?;
                    (value, interval_gradient(batch.len(), 2, &grad_upper, &grad_lower, None))
                }
                LossKind::QdPlus => {
                    let point = pred.column(POINT).to_vec();
                    let bo = BatchPiOutputs::new(&y, &point, &upper, &lower)?;
                    let loss = objectives::qdplus_loss(&bo, &hp)?;
                    let grad = interval_gradient(
                        batch.len(),
                        3,
                        &loss.grad_upper,
                        &loss.grad_lower,
                        loss.grad_point.as_deref(),
                    );
                    (loss.value, grad)
                }
                LossKind::McDropoutPi => unreachable!("rejected in interval_network"),
            };
            if !value.is_finite() {
                return Err(Error::Numeric(format!(
                    "{kind} loss is {value} at epoch {epoch}, batch {b}; lambda trace so far: {:?}",
                    out.lambda_trace.lambdas()
                )));
            }
            let grads = g.backward(&trace, grad.view())?;
            opt.step_model(&mut g, &grads)
                .map_err(|e| Error::Numeric(format!("{kind} network, epoch {epoch}, batch {b}: {e}")))?;
        }

        // Metrics pass over the training set (dropout off).
        let train_out = g.predict(split.train_x.view())?;
        let tl = train_out.column(LOWER).to_vec();
        let tu = train_out.column(UPPER).to_vec();
        let tp = point_estimates(kind, train_out.view(), train_point.as_deref());
        let picp_train = metrics::picp(&train_y, &tp, &tu, &tl);
        out.picp_train.push(picp_train);
        widths = Some(tu.iter().zip(&tl).map(|(u, l)| u - l).collect());

        if kind == LossKind::DualAqd {
            let cost = (1.0 - tau) - picp_train;
            lambda = update_lambda(lambda, config.alpha, tau, picp_train);
            out.lambda_trace.entries.push(LambdaEntry {
                epoch,
                picp_train,
                cost,
                lambda,
            });
        }

        let val_out = g.predict(split.val_x.view())?;
        let vl = val_out.column(LOWER).to_vec();
        let vu = val_out.column(UPPER).to_vec();
        let vp = point_estimates(kind, val_out.view(), val_point.as_deref());
        let record = SolutionRecord::new(
            epoch,
            metrics::picp(&val_y, &vp, &vu, &vl),
            metrics::mpiw(&vu, &vl) * target_range,
        );
        out.records.push(record);
        let improved = out.selected.is_none_or(|best| dominates(&record, &best, tau));
        if improved {
            out.selected = Some(record);
            out.model.clone_from(&g);
        }
        debug!(
            "{kind} epoch {epoch}: picp_train {picp_train:.4} lambda {lambda:.5} picp_val {:.4} mpiw_val {:.4}",
            record.picp_val, record.mpiw_val
        );
    }
    Ok(out)
}

fn interval_gradient(
    n: usize,
    width: usize,
    grad_upper: &[f64],
    grad_lower: &[f64],
    grad_point: Option<&[f64]>,
) -> Array2<f64> {
    let mut g = Array2::zeros((n, width));
    for i in 0..n {
        g[[i, LOWER]] = grad_lower[i];
        g[[i, UPPER]] = grad_upper[i];
        if let Some(p) = grad_point {
            g[[i, POINT]] = p[i];
        }
    }
    g
}

//! Per-fold fitting, cross-validation and the α grid search.

use log::info;
use ndarray::ArrayView2;
use rayon::prelude::*;

use super::{
    dominates, train_pi_network, train_point_network, LambdaTrace, LossKind, SolutionRecord, TrainConfig,
};
use crate::data::{assign_folds, split_fold, Dataset, DatasetSplit, Fold, FoldScheme, TargetStats};
use crate::inference::{self, PiTriple, LOWER, POINT, UPPER};
use crate::metrics::{self, FoldMetrics, MetricReport};
use crate::nn::MlpModel;
use crate::{derive_seed, Error, Result};

// Seed offsets separating the sub-jobs of one fold.
const JOB_INTERVAL: u64 = 100;
const JOB_ENSEMBLE: u64 = 200;
const JOB_MC: u64 = 300;

/// A trained interval predictor for one fold, working in normalized units.
#[derive(Debug, Clone)]
pub enum FittedPredictor {
    DualAqd { f: MlpModel, g: MlpModel },
    /// `sigma2_noise` is the point network's validation MSE (normalized units).
    McDropoutPi { f: MlpModel, sigma2_noise: f64 },
    /// Members' bounds are averaged; the point estimate is the interval midpoint.
    QdEnsemble { members: Vec<MlpModel> },
    /// Members' three outputs are averaged.
    QdPlusEnsemble { members: Vec<MlpModel> },
}

impl FittedPredictor {
    pub fn kind(&self) -> LossKind {
        match self {
            FittedPredictor::DualAqd { .. } => LossKind::DualAqd,
            FittedPredictor::McDropoutPi { .. } => LossKind::McDropoutPi,
            FittedPredictor::QdEnsemble { .. } => LossKind::Qd,
            FittedPredictor::QdPlusEnsemble { .. } => LossKind::QdPlus,
        }
    }

    /// Normalized-unit intervals for `x`. MC passes apply to the dropout-based methods.
    pub fn predict(&self, x: ArrayView2<'_, f64>, mc_passes: usize, tau: f64, seed: u64) -> Result<PiTriple> {
        match self {
            FittedPredictor::DualAqd { f, g } => inference::mc_aggregate(f, g, x, mc_passes, seed),
            FittedPredictor::McDropoutPi { f, sigma2_noise } => {
                inference::mcdropout_pi(f, x, mc_passes, *sigma2_noise, tau, seed)
            }
            FittedPredictor::QdEnsemble { members } | FittedPredictor::QdPlusEnsemble { members } => {
                let width = members[0].output_dim();
                let mut sum = ndarray::Array2::<f64>::zeros((x.nrows(), width));
                for m in members {
                    sum += &m.predict(x)?;
                }
                sum /= members.len() as f64;
                let lower = sum.column(LOWER).to_vec();
                let upper = sum.column(UPPER).to_vec();
                let y_bar = if width > POINT {
                    sum.column(POINT).to_vec()
                } else {
                    lower.iter().zip(&upper).map(|(l, u)| 0.5 * (l + u)).collect()
                };
                Ok(PiTriple {
                    y_bar,
                    y_upper: upper,
                    y_lower: lower,
                })
            }
        }
    }
}

/// Everything produced for one fold.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub repetition: usize,
    pub fold_index: usize,
    /// Dataset row indices of the validation samples.
    pub validation_rows: Vec<usize>,
    pub metrics: FoldMetrics,
    /// Validation predictions in original target units.
    pub predictions: PiTriple,
    pub y_true: Vec<f64>,
    pub predictor: FittedPredictor,
    /// Epoch of the kept point-network checkpoint (0 for the QD family).
    pub point_best_epoch: usize,
    /// Present for DualAQD only.
    pub lambda_trace: Option<LambdaTrace>,
    /// Per-epoch validation records of the interval network (first member for ensembles).
    pub records: Vec<SolutionRecord>,
    pub selected: Option<SolutionRecord>,
    /// Normalized-unit noise variance of MC-Dropout intervals.
    pub sigma2_noise: Option<f64>,
    /// Target scaling fit on this fold's training part.
    pub target_stats: TargetStats,
}

/// Trains the configured method on one split and scores it on the validation part.
pub fn fit_fold(split: &DatasetSplit, config: &TrainConfig, seed: u64) -> Result<FoldOutcome> {
    let cfg = TrainConfig { seed, ..config.clone() };
    let mut lambda_trace = None;
    let mut records = Vec::new();
    let mut selected = None;
    let mut point_best_epoch = 0;
    let mut sigma2_noise = None;

    let predictor = match cfg.loss_kind {
        LossKind::DualAqd | LossKind::McDropoutPi => {
            let f = train_point_network(split, &cfg)?;
            point_best_epoch = f.best_epoch;
            if cfg.loss_kind == LossKind::DualAqd {
                let pi = train_pi_network(split, Some(&f.model), &cfg, derive_seed(seed, JOB_INTERVAL))?;
                lambda_trace = Some(pi.lambda_trace);
                records = pi.records;
                selected = pi.selected;
                FittedPredictor::DualAqd { f: f.model, g: pi.model }
            } else {
                let s2 = if f.best_epoch == 0 {
                    let p = f.model.predict(split.val_x.view())?;
                    metrics::mse(&p.column(0).to_vec(), &split.val_y.to_vec())
                } else {
                    f.val_mse[f.best_epoch - 1]
                };
                sigma2_noise = Some(s2);
                FittedPredictor::McDropoutPi {
                    f: f.model,
                    sigma2_noise: s2,
                }
            }
        }
        LossKind::Qd | LossKind::QdPlus => {
            let members: Vec<_> = (0..cfg.ensemble_size)
                .into_par_iter()
                .map(|k| train_pi_network(split, None, &cfg, derive_seed(seed, JOB_ENSEMBLE + k as u64)))
                .collect::<Result<_>>()?;
            records = members[0].records.clone();
            selected = members[0].selected;
            let models = members.into_iter().map(|m| m.model).collect();
            if cfg.loss_kind == LossKind::Qd {
                FittedPredictor::QdEnsemble { members: models }
            } else {
                FittedPredictor::QdPlusEnsemble { members: models }
            }
        }
    };

    let normalized = predictor.predict(split.val_x.view(), cfg.mc_passes, cfg.tau, derive_seed(seed, JOB_MC))?;
    let predictions = inference::denormalize_triple(&normalized, &split.stats.target)?;
    let y_true = split.val_y_original();
    let metrics = score(&predictions, &y_true, split)?;
    Ok(FoldOutcome {
        repetition: 0,
        fold_index: 0,
        validation_rows: Vec::new(),
        metrics,
        predictions,
        y_true,
        predictor,
        point_best_epoch,
        lambda_trace,
        records,
        selected,
        sigma2_noise,
        target_stats: split.stats.target,
    })
}

fn score(p: &PiTriple, y: &[f64], split: &DatasetSplit) -> Result<FoldMetrics> {
    let mse = metrics::mse(&p.y_bar, y);
    let picp = metrics::picp(y, &p.y_bar, &p.y_upper, &p.y_lower);
    if !(mse.is_finite() && p.y_upper.iter().chain(&p.y_lower).all(|v| v.is_finite())) {
        return Err(Error::Numeric("non-finite predictions on the validation fold".into()));
    }
    let pi_delta = match &split.val_ideal {
        Some(ideal) => Some(metrics::pi_delta(&p.y_upper, &p.y_lower, Some(ideal))?),
        None => None,
    };
    Ok(FoldMetrics {
        mse,
        rmse: mse.sqrt(),
        mpiw: metrics::mpiw(&p.y_upper, &p.y_lower),
        picp,
        pi_delta,
    })
}

/// Cross-validated results of one method.
#[derive(Debug, Clone)]
pub struct CvReport {
    pub method: LossKind,
    pub scheme: FoldScheme,
    pub folds: Vec<FoldOutcome>,
    pub report: MetricReport,
}

impl CvReport {
    /// Fold-level metric values grouped by repetition, averaged within each.
    pub fn repetition_means(&self, column: &str) -> Option<Vec<f64>> {
        let values = self.report.column(column)?;
        let reps = self.folds.iter().map(|f| f.repetition).max().map_or(0, |r| r + 1);
        let mut sum = vec![0.0; reps];
        let mut count = vec![0usize; reps];
        for (f, v) in self.folds.iter().zip(values) {
            sum[f.repetition] += v;
            count[f.repetition] += 1;
        }
        Some(sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect())
    }
}

/// Runs `scheme` over `dataset`. Folds run in parallel with seeds derived
/// from the fold index, so results do not depend on the thread count.
pub fn cross_validate(dataset: &Dataset, config: &TrainConfig, scheme: FoldScheme) -> Result<CvReport> {
    config.validate()?;
    let folds = assign_folds(dataset.len(), scheme, config.seed)?;
    check_fold_sizes(&folds, config.batch_size)?;
    let outcomes: Vec<FoldOutcome> = folds
        .par_iter()
        .map(|fold| {
            let split = split_fold(dataset, fold)?;
            let mut out = fit_fold(&split, config, derive_seed(config.seed, fold.index as u64))?;
            out.repetition = fold.repetition;
            out.fold_index = fold.index;
            out.validation_rows = fold.validation.clone();
            info!(
                "{} fold {}: picp {:.4} mpiw {:.4} mse {:.4}",
                config.loss_kind, fold.index, out.metrics.picp, out.metrics.mpiw, out.metrics.mse
            );
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let report = MetricReport::from_folds(outcomes.iter().map(|o| o.metrics).collect());
    Ok(CvReport {
        method: config.loss_kind,
        scheme,
        folds: outcomes,
        report,
    })
}

fn check_fold_sizes(folds: &[Fold], batch_size: usize) -> Result<()> {
    for f in folds {
        if f.train.len() < batch_size || f.validation.is_empty() {
            return Err(Error::Config(format!(
                "fold {} has {} training and {} validation samples; at least one batch of {batch_size} is needed",
                f.index,
                f.train.len(),
                f.validation.len()
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct AlphaRow {
    pub alpha: f64,
    pub report: MetricReport,
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub rows: Vec<AlphaRow>,
    pub best_alpha: f64,
}

/// Cross-validates every candidate α and picks the winner by the dominance
/// order on mean (PICP, MPIW); earlier candidates win ties.
pub fn grid_search_alpha(
    dataset: &Dataset,
    config: &TrainConfig,
    scheme: FoldScheme,
    alphas: &[f64],
) -> Result<GridSearchResult> {
    if alphas.is_empty() {
        return Err(Error::Config("the alpha grid is empty".into()));
    }
    let rows: Vec<AlphaRow> = alphas
        .par_iter()
        .map(|&alpha| {
            let cfg = TrainConfig {
                alpha,
                loss_kind: LossKind::DualAqd,
                ..config.clone()
            };
            cross_validate(dataset, &cfg, scheme).map(|r| AlphaRow { alpha, report: r.report })
        })
        .collect::<Result<_>>()?;
    let best_alpha = best_row(&rows, config.tau);
    Ok(GridSearchResult { rows, best_alpha })
}

fn best_row(rows: &[AlphaRow], tau: f64) -> f64 {
    let record = |i: usize, r: &AlphaRow| SolutionRecord::new(i, r.report.picp.mean, r.report.mpiw.mean);
    let mut best = 0;
    for i in 1..rows.len() {
        if dominates(&record(i, &rows[i]), &record(best, &rows[best]), tau) {
            best = i;
        }
    }
    rows[best].alpha
}

//! Experiment driver behind the command-line tool: `synth`, `run`, `compare`
//! and `gridsearch`, their output files and the run manifest.

mod config;
mod output;

pub use config::{parse_settings, ExperimentConfig, Method, Setting, DEFAULT_ALPHA_GRID, KEYS};
pub use output::{ARTIFACT_LAMBDA, ARTIFACT_MANIFEST, ARTIFACT_METRICS, ARTIFACT_PLOT, ARTIFACT_PREDICTIONS};

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{generate_synthetic, load_csv, save_csv, CsvSchema, Dataset, FoldScheme, SyntheticSpec};
use crate::metrics::{paired_t_test, MetricReport};
use crate::objectives::QdHyperparams;
use crate::train::{self, dominates, CvReport, LossKind, SolutionRecord, TrainConfig};
use crate::{derive_seed, Error, Result};

/// QD+ hinge weights tried by the random search.
pub const QD_XI_GRID: [f64; 5] = [0.5, 1.0, 2.0, 5.0, 10.0];

const QD_SEARCH_STREAM: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: String,
    /// SHA-256 of the file contents.
    pub sha256: String,
    pub rows: usize,
    pub features: usize,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lambda: Option<f64>,
    pub picp_train: Option<f64>,
    pub picp_val: f64,
    pub mpiw_val: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub repetition: usize,
    pub selected_epoch: Option<usize>,
    pub point_best_epoch: usize,
    /// Noise variance (original units) used by MC-Dropout intervals.
    pub sigma2_noise: Option<f64>,
    pub epochs: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub report: MetricReport,
    pub folds: Vec<FoldRecord>,
    /// QD+ weights actually used, when a random search ran.
    pub qd: Option<QdHyperparams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub metric: String,
    pub winner: Method,
    pub other: Method,
    pub t_statistic: f64,
    pub p_value: f64,
    pub degrees_of_freedom: usize,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub winner: Method,
    pub level: f64,
    pub tests: Vec<PairedTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub alpha: f64,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub rows: Vec<GridRow>,
    pub best_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdTrial {
    pub hyperparams: QdHyperparams,
    pub picp: f64,
    pub mpiw: f64,
}

/// Record of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub experiment_id: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub dataset: DatasetInfo,
    pub seed: u64,
    pub cv_scheme: FoldScheme,
    pub methods: Vec<MethodResult>,
    pub comparison: Option<Comparison>,
    pub grid: Option<GridSummary>,
    pub qd_search: Vec<QdTrial>,
    /// File names written next to the manifest.
    pub artifacts: Vec<String>,
    /// Excluded from reproducibility comparisons.
    pub wall_time_secs: f64,
}

impl ExperimentManifest {
    pub fn method(&self, name: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method.name() == name)
    }
}

/// Writes the synthetic sinusoid (with ideal bounds) to `out`.
pub fn cmd_synth(spec: &SyntheticSpec, out: &Path) -> Result<Dataset> {
    let data = generate_synthetic(spec)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_csv(&data, out)?;
    info!("wrote {} rows to {}", data.len(), out.display());
    Ok(data)
}

struct LoadedData {
    dataset: Dataset,
    info: DatasetInfo,
}

fn load_data(path: &Path, target: &str) -> Result<LoadedData> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let dataset = load_csv(path, &CsvSchema::with_target(target))?;
    let info = DatasetInfo {
        path: path.display().to_string(),
        sha256: hex(&Sha256::digest(&bytes)),
        rows: dataset.len(),
        features: dataset.n_features(),
        target: target.to_string(),
    };
    Ok(LoadedData { dataset, info })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// 5×2 for data with known ideal bounds (the synthetic task), 10-fold otherwise.
pub fn resolve_scheme(cfg: &ExperimentConfig, dataset: &Dataset) -> FoldScheme {
    cfg.cv.unwrap_or(if dataset.ideal_bounds.is_some() {
        FoldScheme::RepeatedTwoFold { repeats: 5 }
    } else {
        FoldScheme::KFold { k: 10 }
    })
}

fn method_config(base: &TrainConfig, method: Method) -> TrainConfig {
    TrainConfig {
        loss_kind: method.kind,
        batch_sorting: method.batch_sorting,
        ..base.clone()
    }
}

fn summarize(method: Method, cv: &CvReport) -> MethodResult {
    let folds = cv
        .folds
        .iter()
        .map(|f| {
            let lambdas = f.lambda_trace.as_ref().map(|t| &t.entries);
            let epochs = f
                .records
                .iter()
                .enumerate()
                .map(|(i, r)| EpochRecord {
                    epoch: r.epoch,
                    lambda: lambdas.map(|e| e[i].lambda),
                    picp_train: lambdas.map(|e| e[i].picp_train),
                    picp_val: r.picp_val,
                    mpiw_val: r.mpiw_val,
                })
                .collect();
            FoldRecord {
                fold: f.fold_index,
                repetition: f.repetition,
                selected_epoch: f.selected.map(|s| s.epoch),
                point_best_epoch: f.point_best_epoch,
                sigma2_noise: f.sigma2_noise.map(|s| s * f.target_stats.range().powi(2)),
                epochs,
            }
        })
        .collect();
    MethodResult {
        method,
        report: cv.report.clone(),
        folds,
        qd: None,
    }
}

/// Seeded random search over the QD+ weights: `λ₁, λ₂ ~ U[0, 1]`, `ξ` from [`QD_XI_GRID`].
/// Trials are ranked like checkpoints, by mean validation (PICP, MPIW).
pub fn qdplus_random_search(
    dataset: &Dataset,
    base: &TrainConfig,
    scheme: FoldScheme,
    trials: usize,
) -> Result<(QdHyperparams, Vec<QdTrial>)> {
    if trials == 0 {
        return Err(Error::Config("qd_search_trials must be positive to run a search".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base.seed, QD_SEARCH_STREAM));
    let mut results = Vec::with_capacity(trials);
    for _ in 0..trials {
        let hp = QdHyperparams {
            lambda1: rng.random_range(0.0..=1.0),
            lambda2: rng.random_range(0.0..=1.0),
            xi_qd: QD_XI_GRID[rng.random_range(0..QD_XI_GRID.len())],
            ..base.qd
        };
        let cfg = TrainConfig {
            qd: hp,
            loss_kind: LossKind::QdPlus,
            ..base.clone()
        };
        let cv = train::cross_validate(dataset, &cfg, scheme)?;
        results.push(QdTrial {
            hyperparams: hp,
            picp: cv.report.picp.mean,
            mpiw: cv.report.mpiw.mean,
        });
    }
    let as_record = |i: usize, t: &QdTrial| SolutionRecord::new(i, t.picp, t.mpiw);
    let mut best = 0;
    for i in 1..results.len() {
        if dominates(&as_record(i, &results[i]), &as_record(best, &results[best]), base.tau) {
            best = i;
        }
    }
    Ok((results[best].hyperparams, results))
}

struct MethodRun {
    method: Method,
    cv: CvReport,
    result: MethodResult,
}

fn run_methods(
    cfg: &ExperimentConfig,
    data: &LoadedData,
    scheme: FoldScheme,
    methods: &[Method],
) -> Result<(Vec<MethodRun>, Vec<QdTrial>)> {
    let mut qd_search = Vec::new();
    let mut runs = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut tc = method_config(&cfg.train, method);
        let mut qd = None;
        if method.kind == LossKind::QdPlus && cfg.qd_search_trials > 0 {
            let (hp, trials) = qdplus_random_search(&data.dataset, &tc, scheme, cfg.qd_search_trials)?;
            tc.qd = hp;
            qd = Some(hp);
            qd_search = trials;
        }
        info!("cross-validating {} with {scheme}", method.name());
        let cv = train::cross_validate(&data.dataset, &tc, scheme)?;
        let mut result = summarize(method, &cv);
        result.qd = qd;
        runs.push(MethodRun { method, cv, result });
    }
    Ok((runs, qd_search))
}

fn experiment_id(command: &str, cfg: &ExperimentConfig, data: &DatasetInfo) -> Result<String> {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(serde_json::to_vec(cfg)?);
    h.update(data.sha256.as_bytes());
    Ok(format!("{command}-{}", &hex(&h.finalize())[..12]))
}

fn prepare_out(out: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    Ok(out.to_path_buf())
}

fn finish(mut manifest: ExperimentManifest, out: &Path, started: Instant) -> Result<ExperimentManifest> {
    manifest.artifacts.push(ARTIFACT_MANIFEST.to_string());
    manifest.wall_time_secs = started.elapsed().as_secs_f64();
    output::write_manifest(&manifest, &out.join(ARTIFACT_MANIFEST))?;
    Ok(manifest)
}

fn run_and_write(
    command: &str,
    cfg: &ExperimentConfig,
    data_path: &Path,
    out: &Path,
    methods: &[Method],
) -> Result<(ExperimentManifest, Vec<MethodRun>)> {
    let started = Instant::now();
    let out = prepare_out(out)?;
    let data = load_data(data_path, &cfg.target)?;
    let scheme = resolve_scheme(cfg, &data.dataset);
    let (runs, qd_search) = run_methods(cfg, &data, scheme, methods)?;

    let cvs: Vec<(Method, &CvReport)> = runs.iter().map(|r| (r.method, &r.cv)).collect();
    output::write_metrics(&out.join(ARTIFACT_METRICS), "method", &cvs_as_reports(&cvs))?;
    output::write_predictions(&out.join(ARTIFACT_PREDICTIONS), &cvs)?;
    output::write_plotdata(&out.join(ARTIFACT_PLOT), &data.dataset, &cvs)?;
    output::write_lambda_trace(&out.join(ARTIFACT_LAMBDA), &cvs)?;

    let comparison = if runs.len() > 1 { Some(compare(&runs, cfg.train.tau)?) } else { None };
    let manifest = ExperimentManifest {
        experiment_id: experiment_id(command, cfg, &data.info)?,
        command: command.to_string(),
        config: cfg.clone(),
        dataset: data.info,
        seed: cfg.train.seed,
        cv_scheme: scheme,
        methods: runs.iter().map(|r| r.result.clone()).collect(),
        comparison,
        grid: None,
        qd_search,
        artifacts: [ARTIFACT_METRICS, ARTIFACT_PREDICTIONS, ARTIFACT_PLOT, ARTIFACT_LAMBDA]
            .map(String::from)
            .to_vec(),
        wall_time_secs: 0.0,
    };
    Ok((finish(manifest, &out, started)?, runs))
}

fn cvs_as_reports(cvs: &[(Method, &CvReport)]) -> Vec<(String, MetricReport, Vec<usize>)> {
    cvs.iter()
        .map(|(m, cv)| (m.name(), cv.report.clone(), cv.folds.iter().map(|f| f.repetition).collect()))
        .collect()
}

/// Cross-validates the configured method and writes all artifacts to `out`.
pub fn cmd_run(cfg: &ExperimentConfig, data: &Path, out: &Path) -> Result<ExperimentManifest> {
    let method = Method {
        kind: cfg.train.loss_kind,
        batch_sorting: cfg.train.batch_sorting,
    };
    run_and_write("run", cfg, data, out, &[method]).map(|(m, _)| m)
}

/// Cross-validates every method in `cfg.methods` on shared folds and seeds,
/// then t-tests the winner against the rest.
pub fn cmd_compare(cfg: &ExperimentConfig, data: &Path, out: &Path) -> Result<ExperimentManifest> {
    run_and_write("compare", cfg, data, out, &cfg.methods).map(|(m, _)| m)
}

/// Significance level of the paired t-tests in comparisons.
pub const T_TEST_LEVEL: f64 = 0.05;

fn compare(runs: &[MethodRun], tau: f64) -> Result<Comparison> {
    let rec = |i: usize| SolutionRecord::new(i, runs[i].cv.report.picp.mean, runs[i].cv.report.mpiw.mean);
    let mut best = 0;
    for i in 1..runs.len() {
        if dominates(&rec(i), &rec(best), tau) {
            best = i;
        }
    }
    let mut tests = Vec::new();
    for other in runs.iter().enumerate().filter(|(i, _)| *i != best).map(|(_, r)| r) {
        for metric in ["mpiw", "picp"] {
            let a = runs[best].cv.report.column(metric).expect("known column");
            let b = other.cv.report.column(metric).expect("known column");
            let t = paired_t_test(&a, &b, T_TEST_LEVEL)?;
            tests.push(PairedTest {
                metric: metric.to_string(),
                winner: runs[best].method,
                other: other.method,
                t_statistic: t.t_statistic,
                p_value: t.p_value,
                degrees_of_freedom: t.degrees_of_freedom,
                significant: t.significant,
            });
        }
    }
    Ok(Comparison {
        winner: runs[best].method,
        level: T_TEST_LEVEL,
        tests,
    })
}

/// Cross-validates DualAQD for every α in `cfg.alphas` and reports the winner.
pub fn cmd_gridsearch(cfg: &ExperimentConfig, data_path: &Path, out: &Path) -> Result<ExperimentManifest> {
    let started = Instant::now();
    let out = prepare_out(out)?;
    let data = load_data(data_path, &cfg.target)?;
    let scheme = resolve_scheme(cfg, &data.dataset);
    let train_cfg = TrainConfig {
        loss_kind: LossKind::DualAqd,
        ..cfg.train.clone()
    };
    let grid = train::grid_search_alpha(&data.dataset, &train_cfg, scheme, &cfg.alphas)?;
    let rows: Vec<(String, MetricReport, Vec<usize>)> = grid
        .rows
        .iter()
        .map(|r| (r.alpha.to_string(), r.report.clone(), Vec::new()))
        .collect();
    output::write_metrics(&out.join(ARTIFACT_METRICS), "alpha", &rows)?;
    let manifest = ExperimentManifest {
        experiment_id: experiment_id("gridsearch", cfg, &data.info)?,
        command: "gridsearch".into(),
        config: cfg.clone(),
        dataset: data.info,
        seed: cfg.train.seed,
        cv_scheme: scheme,
        methods: Vec::new(),
        comparison: None,
        grid: Some(GridSummary {
            rows: grid
                .rows
                .into_iter()
                .map(|r| GridRow {
                    alpha: r.alpha,
                    report: r.report,
                })
                .collect(),
            best_alpha: grid.best_alpha,
        }),
        qd_search: Vec::new(),
        artifacts: vec![ARTIFACT_METRICS.to_string()],
        wall_time_secs: 0.0,
    };
    finish(manifest, &out, started)
}

/// Human-readable summary table of a manifest.
pub fn format_summary(m: &ExperimentManifest) -> String {
    let mut s = format!("{} ({} on {} rows, {})\n", m.experiment_id, m.command, m.dataset.rows, m.cv_scheme);
    let row = |label: &str, r: &MetricReport| {
        let delta = r.pi_delta.map_or("-".to_string(), |d| d.to_string());
        format!(
            "{label:<16} MSE {}  MPIW {}  PICP {}  PI_delta {}\n",
            r.mse, r.mpiw, r.picp, delta
        )
    };
    for mr in &m.methods {
        s += &row(&mr.method.name(), &mr.report);
    }
    if let Some(g) = &m.grid {
        for r in &g.rows {
            s += &row(&format!("alpha={}", r.alpha), &r.report);
        }
        s += &format!("best alpha: {}\n", g.best_alpha);
    }
    if let Some(c) = &m.comparison {
        s += &format!("winner: {}\n", c.winner.name());
        for t in &c.tests {
            s += &format!(
                "  {} vs {} on {}: t = {:.3}, p = {:.4}{}\n",
                t.winner.name(),
                t.other.name(),
                t.metric,
                t.t_statistic,
                t.p_value,
                if t.significant { " (significant)" } else { "" }
            );
        }
    }
    s
}

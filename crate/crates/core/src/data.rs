//! Datasets: the heteroscedastic sinusoid generator, CSV ingestion,
//! train-only normalization and fold assignment.

use std::f64::consts::PI;
use std::path::Path;

use log::warn;
use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{derive_seed, Error, Result};

/// Two-sided 95% normal critical value used for the generator's ideal bounds.
pub const IDEAL_Z: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealBounds {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

impl IdealBounds {
    fn subset(&self, idx: &[usize]) -> Self {
        IdealBounds {
            upper: idx.iter().map(|&i| self.upper[i]).collect(),
            lower: idx.iter().map(|&i| self.lower[i]).collect(),
        }
    }
}

/// Raw (unnormalized) tabular data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub target_name: String,
    /// Shape `(n, z)`.
    pub features: Array2<f64>,
    pub targets: Array1<f64>,
    pub ideal_bounds: Option<IdealBounds>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            features: self.features.select(Axis(0), idx),
            targets: self.targets.select(Axis(0), idx),
            ideal_bounds: self.ideal_bounds.as_ref().map(|b| b.subset(idx)),
        }
    }
}

// ---------------------------------------------------------------------------
// Synthetic sinusoid

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub seed: u64,
    /// When false the Gaussian draw is forced to 0 and targets lie on the noiseless curve.
    pub noise: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_points: 1000,
            x_min: -5.0,
            x_max: 5.0,
            seed: 0,
            noise: true,
        }
    }
}

/// `5 cos(x) + 10`
pub fn noiseless_curve(x: f64) -> f64 {
    5.0 * x.cos() + 10.0
}

/// Standard deviation of the additive noise at `x`: `2 cos(1.2 x) + 2`.
pub fn noise_std(x: f64) -> f64 {
    2.0 * (1.2 * x).cos() + 2.0
}

/// Ideal 95% bounds `(upper, lower)` of the generator at `x`.
pub fn ideal_bounds(x: f64) -> (f64, f64) {
    let c = noiseless_curve(x);
    let h = IDEAL_Z * noise_std(x);
    (c + h, c - h)
}

/// The zero-noise location `π / 1.2` (noise std vanishes there).
pub const ZERO_NOISE_X: f64 = PI / 1.2;

/// Draws `y` at a fixed `x` from the generator.
pub fn sample_target<R: Rng + ?Sized>(x: f64, rng: &mut R) -> f64 {
    let v: f64 = rng.sample(StandardNormal);
    noiseless_curve(x) + noise_std(x) * v
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n_points < 2 {
        return Err(Error::Config(format!("n_points must be at least 2, got {}", spec.n_points)));
    }
    if !(spec.x_min < spec.x_max) {
        return Err(Error::Config("x_min must be below x_max".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut xs = Vec::with_capacity(spec.n_points);
    let mut ys = Vec::with_capacity(spec.n_points);
    let mut upper = Vec::with_capacity(spec.n_points);
    let mut lower = Vec::with_capacity(spec.n_points);
    for _ in 0..spec.n_points {
        let x = rng.random_range(spec.x_min..spec.x_max);
        let v: f64 = rng.sample(StandardNormal);
        let v = if spec.noise { v } else { 0.0 };
        xs.push(x);
        ys.push(noiseless_curve(x) + noise_std(x) * v);
        let (u, l) = ideal_bounds(x);
        upper.push(u);
        lower.push(l);
    }
    Ok(Dataset {
        feature_names: vec!["x".into()],
        target_name: "y".into(),
        features: Array2::from_shape_vec((spec.n_points, 1), xs).expect("n x 1"),
        targets: Array1::from(ys),
        ideal_bounds: Some(IdealBounds { upper, lower }),
    })
}

// ---------------------------------------------------------------------------
// CSV

pub const IDEAL_LOWER_COLUMN: &str = "ideal_lower";
pub const IDEAL_UPPER_COLUMN: &str = "ideal_upper";

/// Column roles for [`load_csv`]. Every column that is not the target, an
/// ideal-bound column or explicitly ignored becomes a feature.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvSchema {
    pub target: String,
    /// Recognize `ideal_lower` / `ideal_upper` columns as ideal bounds.
    pub detect_ideal_bounds: bool,
    pub ignore: Vec<String>,
}

impl CsvSchema {
    pub fn with_target(target: impl Into<String>) -> Self {
        CsvSchema {
            target: target.into(),
            detect_ideal_bounds: true,
            ignore: Vec::new(),
        }
    }
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn read_csv<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Data("empty file: no header row".into()));
    }
    let target_col = headers
        .iter()
        .position(|h| *h == schema.target)
        .ok_or_else(|| {
            Error::Data(format!(
                "target column {:?} not found; columns are {headers:?}",
                schema.target
            ))
        })?;
    let find = |name: &str| {
        if schema.detect_ideal_bounds {
            headers.iter().position(|h| h == name)
        } else {
            None
        }
    };
    let lower_col = find(IDEAL_LOWER_COLUMN);
    let upper_col = find(IDEAL_UPPER_COLUMN);
    let ideal = match (lower_col, upper_col) {
        (Some(l), Some(u)) => Some((l, u)),
        _ => None,
    };
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != target_col)
        .filter(|&c| ideal.is_none_or(|(l, u)| c != l && c != u))
        .filter(|&c| !schema.ignore.contains(&headers[c]))
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::Data("no feature columns besides the target".into()));
    }

    let mut features = Vec::new();
    let mut targets = Vec::new();
    let (mut upper, mut lower) = (Vec::new(), Vec::new());
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        // 1-based data row; the header is line 1 of the file.
        let row_no = row + 1;
        if record.len() != headers.len() {
            return Err(Error::Data(format!(
                "row {row_no}: expected {} cells, found {}",
                headers.len(),
                record.len()
            )));
        }
        let cell = |c: usize| -> Result<f64> {
            let raw = record.get(c).unwrap_or("").trim();
            if raw.is_empty() {
                return Err(Error::Data(format!("row {row_no}, column {:?}: missing value", headers[c])));
            }
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::Data(format!(
                        "row {row_no}, column {:?}: cannot parse {raw:?} as a number",
                        headers[c]
                    ))
                })
        };
        for &c in &feature_cols {
            features.push(cell(c)?);
        }
        targets.push(cell(target_col)?);
        if let Some((l, u)) = ideal {
            lower.push(cell(l)?);
            upper.push(cell(u)?);
        }
    }
    if targets.is_empty() {
        return Err(Error::Data("empty file: header but no data rows".into()));
    }
    let n = targets.len();
    Ok(Dataset {
        feature_names: feature_cols.iter().map(|&c| headers[c].clone()).collect(),
        target_name: schema.target.clone(),
        features: Array2::from_shape_vec((n, feature_cols.len()), features).expect("row-major cells"),
        targets: Array1::from(targets),
        ideal_bounds: ideal.map(|_| IdealBounds { upper, lower }),
    })
}

/// Writes features, the target, then `ideal_lower, ideal_upper` when present.
pub fn write_csv<W: std::io::Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = dataset.feature_names.iter().map(String::as_str).collect();
    header.push(&dataset.target_name);
    if dataset.ideal_bounds.is_some() {
        header.push(IDEAL_LOWER_COLUMN);
        header.push(IDEAL_UPPER_COLUMN);
    }
    wtr.write_record(&header)?;
    for i in 0..dataset.len() {
        let mut row: Vec<String> = dataset.features.row(i).iter().map(|v| v.to_string()).collect();
        row.push(dataset.targets[i].to_string());
        if let Some(b) = &dataset.ideal_bounds {
            row.push(b.lower[i].to_string());
            row.push(b.upper[i].to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(dataset, std::io::BufWriter::new(file))
}

// ---------------------------------------------------------------------------
// Normalization

/// Z-score statistics of the retained feature columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    /// Indices (into the raw feature matrix) of columns with nonzero variance.
    pub kept_columns: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn apply(&self, features: &Array2<f64>) -> Array2<f64> {
        let mut out = features.select(Axis(1), &self.kept_columns);
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        out
    }
}

/// Min-max statistics of the response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub min: f64,
    pub max: f64,
}

impl TargetStats {
    pub const IDENTITY: TargetStats = TargetStats { min: 0.0, max: 1.0 };

    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    fn check(&self) -> Result<()> {
        if !(self.max > self.min) {
            return Err(Error::Config(format!(
                "degenerate target statistics: min {} max {}",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn normalize(&self, y: f64) -> f64 {
        (y - self.min) / (self.max - self.min)
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        v * (self.max - self.min) + self.min
    }

    /// Checked inverse map over a slice.
    pub fn denormalize_all(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check()?;
        Ok(v.iter().map(|&x| self.denormalize(x)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub features: FeatureStats,
    pub target: TargetStats,
}

/// A normalized train/validation pair. Statistics come from the training part only.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train_x: Array2<f64>,
    pub train_y: Array1<f64>,
    pub val_x: Array2<f64>,
    pub val_y: Array1<f64>,
    pub stats: NormalizationStats,
    /// Ideal bounds of the validation rows in original units, when known.
    pub val_ideal: Option<IdealBounds>,
    /// Raw feature values of the validation rows (for plot output).
    pub val_raw_x: Array2<f64>,
}

impl DatasetSplit {
    /// Validation targets in original units.
    pub fn val_y_original(&self) -> Vec<f64> {
        self.val_y.iter().map(|&v| self.stats.target.denormalize(v)).collect()
    }
}

/// Fits z-score feature and min-max target statistics on `train` and applies them to both parts.
///
/// Zero-variance feature columns are dropped (with a warning) rather than rejected.
pub fn fit_apply_normalization(train: &Dataset, other: &Dataset) -> Result<DatasetSplit> {
    if train.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    if train.n_features() != other.n_features() {
        return Err(Error::Contract("train and validation feature widths differ".into()));
    }
    let n = train.len() as f64;
    let mut kept = Vec::new();
    let mut means = Vec::new();
    let mut stds = Vec::new();
    for (j, col) in train.features.axis_iter(Axis(1)).enumerate() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std > 0.0 && std.is_finite() {
            kept.push(j);
            means.push(mean);
            stds.push(std);
        } else {
            let name = train.feature_names.get(j).map(String::as_str).unwrap_or("?");
            warn!("dropping zero-variance feature column {j} ({name})");
        }
    }
    if kept.is_empty() {
        return Err(Error::Data("every feature column is constant on the training set".into()));
    }
    let min = train.targets.iter().copied().fold(f64::INFINITY, f64::min);
    let max = train.targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let target = TargetStats { min, max };
    if !(max > min) {
        return Err(Error::Data(format!("training targets are constant ({min})")));
    }
    let features = FeatureStats {
        kept_columns: kept,
        mean: means,
        std: stds,
    };
    Ok(DatasetSplit {
        train_x: features.apply(&train.features),
        train_y: train.targets.mapv(|v| target.normalize(v)),
        val_x: features.apply(&other.features),
        val_y: other.targets.mapv(|v| target.normalize(v)),
        stats: NormalizationStats { features, target },
        val_ideal: other.ideal_bounds.clone(),
        val_raw_x: other.features.clone(),
    })
}

// ---------------------------------------------------------------------------
// Folds

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FoldScheme {
    KFold { k: usize },
    /// `repeats` independent random halvings, each used both ways round.
    RepeatedTwoFold { repeats: usize },
}

impl FoldScheme {
    pub fn n_folds(&self) -> usize {
        match *self {
            FoldScheme::KFold { k } => k,
            FoldScheme::RepeatedTwoFold { repeats } => 2 * repeats,
        }
    }
}

impl std::fmt::Display for FoldScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FoldScheme::KFold { k } => write!(f, "kfold:{k}"),
            FoldScheme::RepeatedTwoFold { repeats } => write!(f, "{repeats}x2"),
        }
    }
}

impl std::str::FromStr for FoldScheme {
    type Err = Error;

    /// Accepts `kfold:K` or `Rx2`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown cv scheme {s:?}; expected kfold:K or Rx2 (e.g. 5x2)"));
        if let Some(k) = s.strip_prefix("kfold:") {
            let k = k.parse().map_err(|_| bad())?;
            return Ok(FoldScheme::KFold { k });
        }
        if let Some(r) = s.strip_suffix("x2") {
            let repeats = r.parse().map_err(|_| bad())?;
            return Ok(FoldScheme::RepeatedTwoFold { repeats });
        }
        Err(bad())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    /// Repetition number (always 0 for plain k-fold).
    pub repetition: usize,
    pub index: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Deterministic fold assignment from `(n, scheme, seed)` alone.
pub fn assign_folds(n: usize, scheme: FoldScheme, seed: u64) -> Result<Vec<Fold>> {
    let chunks = |k: usize, rng_seed: u64| -> Vec<Vec<usize>> {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(rng_seed));
        let (base, extra) = (n / k, n % k);
        let mut out = Vec::with_capacity(k);
        let mut start = 0;
        for c in 0..k {
            let len = base + usize::from(c < extra);
            out.push(idx[start..start + len].to_vec());
            start += len;
        }
        out
    };
    match scheme {
        FoldScheme::KFold { k } => {
            if k < 2 || k > n {
                return Err(Error::Config(format!("k-fold needs 2 <= k <= n, got k={k}, n={n}")));
            }
            let parts = chunks(k, seed);
            Ok((0..k)
                .map(|i| Fold {
                    repetition: 0,
                    index: i,
                    train: parts
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .flat_map(|(_, p)| p.iter().copied())
                        .collect(),
                    validation: parts[i].clone(),
                })
                .collect())
        }
        FoldScheme::RepeatedTwoFold { repeats } => {
            if repeats == 0 || n < 2 {
                return Err(Error::Config(format!(
                    "repeated two-fold needs repeats >= 1 and n >= 2, got {repeats}, {n}"
                )));
            }
            let mut folds = Vec::with_capacity(2 * repeats);
            for r in 0..repeats {
                let halves = chunks(2, derive_seed(seed, r as u64));
                for side in 0..2 {
                    folds.push(Fold {
                        repetition: r,
                        index: 2 * r + side,
                        train: halves[side].clone(),
                        validation: halves[1 - side].clone(),
                    });
                }
            }
            Ok(folds)
        }
    }
}

/// Normalized split for one fold.
pub fn split_fold(dataset: &Dataset, fold: &Fold) -> Result<DatasetSplit> {
    fit_apply_normalization(&dataset.subset(&fold.train), &dataset.subset(&fold.validation))
}

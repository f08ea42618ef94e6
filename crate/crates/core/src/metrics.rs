//! Reported metrics: PICP, MPIW, MSE/RMSE, deviation from ideal bounds, the
//! width/coverage trade-off score μ, and a paired t-test.

use log::warn;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::IdealBounds;
use crate::objectives::coverage_indicator;
use crate::{Error, Result};

/// Mean interval width. Crossed intervals (upper < lower) count negatively and are logged.
pub fn mpiw(y_upper: &[f64], y_lower: &[f64]) -> f64 {
    if y_upper.is_empty() {
        return 0.0;
    }
    let crossed = crossed_intervals(y_upper, y_lower);
    if crossed > 0 {
        warn!("{crossed} of {} intervals have upper < lower", y_upper.len());
    }
    y_upper.iter().zip(y_lower).map(|(u, l)| u - l).sum::<f64>() / y_upper.len() as f64
}

pub fn crossed_intervals(y_upper: &[f64], y_lower: &[f64]) -> usize {
    y_upper.iter().zip(y_lower).filter(|(u, l)| u < l).count()
}

/// Coverage probability with the strict two-sided indicator (target and estimate inside).
pub fn picp(y: &[f64], y_hat: &[f64], y_upper: &[f64], y_lower: &[f64]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let covered = (0..y.len())
        .filter(|&i| coverage_indicator(y_lower[i], y_hat[i], y[i], y_upper[i]))
        .count();
    covered as f64 / y.len() as f64
}

pub fn mse(y_hat: &[f64], y: &[f64]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    y_hat.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64
}

pub fn rmse(y_hat: &[f64], y: &[f64]) -> f64 {
    mse(y_hat, y).sqrt()
}

/// Mean of `|ideal_upper - upper| + |ideal_lower - lower|`.
pub fn pi_delta(y_upper: &[f64], y_lower: &[f64], ideal: Option<&IdealBounds>) -> Result<f64> {
    let ideal = ideal.ok_or_else(|| Error::Contract("pi_delta requires ideal bounds".into()))?;
    let n = y_upper.len();
    if n == 0 || y_lower.len() != n || ideal.upper.len() != n || ideal.lower.len() != n {
        return Err(Error::Contract("pi_delta needs equal-length nonempty bounds".into()));
    }
    let total: f64 = (0..n)
        .map(|i| (ideal.upper[i] - y_upper[i]).abs() + (ideal.lower[i] - y_lower[i]).abs())
        .sum();
    Ok(total / n as f64)
}

/// `mpiw_norm^ω · (1 - picp)^(1-ω)`.
pub fn mu_omega(mpiw_norm: f64, picp: f64, omega: f64) -> f64 {
    let miss = 1.0 - picp;
    if miss <= 0.0 && omega < 1.0 {
        warn!("mu_omega at full coverage with omega < 1 is 0 in the limit");
        return 0.0;
    }
    mpiw_norm.powf(omega) * miss.powf(1.0 - omega)
}

/// `∫₀¹ μ_ω dω` in closed form: `(a - b) / ln(a / b)` with `a = mpiw_norm`, `b = 1 - picp`.
pub fn mu_integral(mpiw_norm: f64, picp: f64) -> f64 {
    let a = mpiw_norm;
    let b = 1.0 - picp;
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    let r = a / b;
    if (r - 1.0).abs() < 1e-9 {
        // logarithmic mean tends to the arithmetic mean as a → b
        return 0.5 * (a + b);
    }
    (a - b) / r.ln()
}

/// μ_ω over a uniform ω grid plus the closed-form integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuCurve {
    pub omegas: Vec<f64>,
    pub mu_values: Vec<f64>,
    pub mu_integral: f64,
    /// Largest MPIW among the compared methods (normalization upper bound; lower bound is 0).
    pub mpiw_upper_bound: f64,
}

pub fn mu_curve(mpiw: f64, picp: f64, mpiw_upper_bound: f64, points: usize) -> MuCurve {
    let a = mpiw / mpiw_upper_bound;
    let points = points.max(2);
    let omegas: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let mu_values = omegas.iter().map(|&w| mu_omega(a, picp, w)).collect();
    MuCurve {
        omegas,
        mu_values,
        mu_integral: mu_integral(a, picp),
        mpiw_upper_bound,
    }
}

/// μ for each `(mpiw, picp)` row, normalizing MPIW by the maximum over the rows.
pub fn mu_scores(rows: &[(f64, f64)]) -> Vec<f64> {
    let upper = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    rows.iter()
        .map(|&(w, p)| if upper > 0.0 { mu_integral(w / upper, p) } else { 0.0 })
        .collect()
}

/// Result of a two-sided paired t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t_statistic: f64,
    pub p_value: f64,
    pub degrees_of_freedom: usize,
    pub significant: bool,
}

pub fn paired_t_test(a: &[f64], b: &[f64], level: f64) -> Result<TTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Contract(format!(
            "paired t-test needs two equal-length samples with n >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let df = a.len() - 1;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        // Exact ties are never significant; a constant nonzero shift is the t → ∞ limit.
        let (t, p) = if mean == 0.0 { (0.0, 1.0) } else { (mean.signum() * f64::INFINITY, 0.0) };
        return Ok(TTest {
            t_statistic: t,
            p_value: p,
            degrees_of_freedom: df,
            significant: p < level,
        });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(TTest {
        t_statistic: t,
        p_value: p,
        degrees_of_freedom: df,
        significant: p < level,
    })
}

/// Metrics of one validation fold, in original target units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub mse: f64,
    pub rmse: f64,
    pub mpiw: f64,
    pub picp: f64,
    pub pi_delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return MeanStd { mean: f64::NAN, std: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

/// Per-fold metrics with their aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub folds: Vec<FoldMetrics>,
    pub mse: MeanStd,
    pub rmse: MeanStd,
    pub mpiw: MeanStd,
    pub picp: MeanStd,
    pub pi_delta: Option<MeanStd>,
}

impl MetricReport {
    pub fn from_folds(folds: Vec<FoldMetrics>) -> Self {
        let col = |f: fn(&FoldMetrics) -> f64| -> Vec<f64> { folds.iter().map(f).collect() };
        let deltas: Option<Vec<f64>> = folds.iter().map(|m| m.pi_delta).collect();
        MetricReport {
            mse: MeanStd::of(&col(|m| m.mse)),
            rmse: MeanStd::of(&col(|m| m.rmse)),
            mpiw: MeanStd::of(&col(|m| m.mpiw)),
            picp: MeanStd::of(&col(|m| m.picp)),
            pi_delta: deltas.filter(|d| !d.is_empty()).map(|d| MeanStd::of(&d)),
            folds,
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let v = match name {
            "mse" => self.folds.iter().map(|m| m.mse).collect(),
            "rmse" => self.folds.iter().map(|m| m.rmse).collect(),
            "mpiw" => self.folds.iter().map(|m| m.mpiw).collect(),
            "picp" => self.folds.iter().map(|m| m.picp).collect(),
            "pi_delta" => self.folds.iter().map(|m| m.pi_delta).collect::<Option<Vec<_>>>()?,
            _ => return None,
        };
        Some(v)
    }
}

//! Loss functions for the point network and the interval networks, each with
//! its analytic gradient with respect to the network outputs.
//!
//! All gradients are already divided by the batch size, so they can be fed
//! straight into [`crate::nn::MlpModel::backward`].

use log::warn;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default denominator guard in [`mpiw_capt`].
pub const MPIW_CAPT_EPS: f64 = 1e-8;

/// Exponents in the coverage penalty are clipped here before `exp`.
pub const MAX_PENALTY_EXPONENT: f64 = 50.0;

/// Borrowed view of one batch: targets, point estimates and both bounds.
#[derive(Debug, Clone, Copy)]
pub struct BatchPiOutputs<'a> {
    pub y: &'a [f64],
    pub y_hat: &'a [f64],
    pub y_upper: &'a [f64],
    pub y_lower: &'a [f64],
}

impl<'a> BatchPiOutputs<'a> {
    pub fn new(y: &'a [f64], y_hat: &'a [f64], y_upper: &'a [f64], y_lower: &'a [f64]) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Contract("empty batch".into()));
        }
        if y_hat.len() != n || y_upper.len() != n || y_lower.len() != n {
            return Err(Error::Contract(format!(
                "batch arrays differ in length: y={n}, y_hat={}, upper={}, lower={}",
                y_hat.len(),
                y_upper.len(),
                y_lower.len()
            )));
        }
        Ok(BatchPiOutputs {
            y,
            y_hat,
            y_upper,
            y_lower,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// A scalar loss with its gradient with respect to one output vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarLoss {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// A scalar loss with gradients with respect to the interval bounds (and,
/// for losses that train it, the point estimate).
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalLoss {
    pub value: f64,
    pub grad_upper: Vec<f64>,
    pub grad_lower: Vec<f64>,
    pub grad_point: Option<Vec<f64>>,
}

/// Mean squared error with gradient `2(ŷ - y)/N`.
pub fn mse_loss(y_hat: &[f64], y: &[f64]) -> Result<ScalarLoss> {
    if y.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    if y_hat.len() != y.len() {
        return Err(Error::Contract(format!(
            "mse: {} estimates for {} targets",
            y_hat.len(),
            y.len()
        )));
    }
    let n = y.len() as f64;
    let value = y_hat.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let grad = y_hat.iter().zip(y).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok(ScalarLoss { value, grad })
}

/// A sample is covered when both the target and the point estimate lie
/// strictly inside the interval.
#[inline]
pub fn coverage_indicator(y_lower: f64, y_hat: f64, y: f64, y_upper: f64) -> bool {
    y_lower < y_hat && y_hat < y_upper && y_lower < y && y < y_upper
}

pub fn coverage_indicators(batch: &BatchPiOutputs<'_>) -> Vec<bool> {
    (0..batch.len())
        .map(|i| coverage_indicator(batch.y_lower[i], batch.y_hat[i], batch.y[i], batch.y_upper[i]))
        .collect()
}

/// Target-only capture (`l < y < u`), as used inside the QD-family losses.
#[inline]
pub fn captures_target(y_lower: f64, y: f64, y_upper: f64) -> bool {
    y_lower < y && y < y_upper
}

pub fn picp(indicators: &[bool]) -> f64 {
    if indicators.is_empty() {
        return 0.0;
    }
    indicators.iter().filter(|&&k| k).count() as f64 / indicators.len() as f64
}

/// Mean width over captured samples: `Σ(u - l)k / (ε + Σk)`.
pub fn mpiw_capt(y_upper: &[f64], y_lower: &[f64], indicators: &[bool], eps: f64) -> f64 {
    let mut width = 0.0;
    let mut count = 0.0;
    for ((u, l), &k) in y_upper.iter().zip(y_lower).zip(indicators) {
        if k {
            width += u - l;
            count += 1.0;
        }
    }
    width / (eps + count)
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Target-anchored width penalty `mean(|u - y| + |y - l|)` and its subgradients.
pub fn mpiw_pen(y_upper: &[f64], y: &[f64], y_lower: &[f64]) -> Result<IntervalLoss> {
    let n = y.len();
    if n == 0 || y_upper.len() != n || y_lower.len() != n {
        return Err(Error::Contract("mpiw_pen needs equal-length nonempty arrays".into()));
    }
    let nf = n as f64;
    let mut value = 0.0;
    let mut grad_upper = Vec::with_capacity(n);
    let mut grad_lower = Vec::with_capacity(n);
    for i in 0..n {
        let du = y_upper[i] - y[i];
        let dl = y[i] - y_lower[i];
        value += du.abs() + dl.abs();
        grad_upper.push(sign(du) / nf);
        grad_lower.push(-sign(dl) / nf);
    }
    Ok(IntervalLoss {
        value: value / nf,
        grad_upper,
        grad_lower,
        grad_point: None,
    })
}

/// Terms of the coverage penalty `C = e^(ξ - d_u) + e^(ξ - d_l)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageTerms {
    /// Largest absolute point-estimate error in the batch.
    pub xi: f64,
    pub d_upper: f64,
    pub d_lower: f64,
    pub c: f64,
}

/// Scalar form of the coverage penalty, given its summary statistics.
pub fn coverage_penalty_value(xi: f64, d_upper: f64, d_lower: f64) -> f64 {
    clipped_exp(xi - d_upper) + clipped_exp(xi - d_lower)
}

fn clipped_exp(exponent: f64) -> f64 {
    if exponent > MAX_PENALTY_EXPONENT {
        warn!("coverage penalty exponent {exponent:.3} clipped to {MAX_PENALTY_EXPONENT}");
        MAX_PENALTY_EXPONENT.exp()
    } else {
        exponent.exp()
    }
}

/// Coverage penalty over a batch. `y_hat` comes from the frozen point network
/// and receives no gradient.
pub fn coverage_penalty(batch: &BatchPiOutputs<'_>) -> Result<(CoverageTerms, Vec<f64>, Vec<f64>)> {
    let n = batch.len() as f64;
    let xi = batch
        .y_hat
        .iter()
        .zip(batch.y)
        .map(|(p, t)| (p - t).abs())
        .fold(0.0, f64::max);
    let d_upper = batch.y_upper.iter().zip(batch.y).map(|(u, t)| u - t).sum::<f64>() / n;
    let d_lower = batch.y.iter().zip(batch.y_lower).map(|(t, l)| t - l).sum::<f64>() / n;
    let eu = clipped_exp(xi - d_upper);
    let el = clipped_exp(xi - d_lower);
    let c = eu + el;
    if !c.is_finite() {
        return Err(Error::Numeric(format!(
            "coverage penalty is not finite (xi={xi}, d_u={d_upper}, d_l={d_lower}, batch size {})",
            batch.len()
        )));
    }
    let grad_upper = vec![-eu / n; batch.len()];
    let grad_lower = vec![el / n; batch.len()];
    Ok((
        CoverageTerms {
            xi,
            d_upper,
            d_lower,
            c,
        },
        grad_upper,
        grad_lower,
    ))
}

/// Breakdown of one evaluation of the DualAQD objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualAqdTerms {
    pub mpiw_pen: f64,
    pub coverage: CoverageTerms,
    pub lambda: f64,
    /// `mpiw_pen + lambda * coverage.c`
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualAqdLoss {
    pub terms: DualAqdTerms,
    pub grad_upper: Vec<f64>,
    pub grad_lower: Vec<f64>,
}

/// Width penalty plus `lambda` times the coverage penalty.
pub fn dualaqd_loss(batch: &BatchPiOutputs<'_>, lambda: f64) -> Result<DualAqdLoss> {
    if !(lambda >= 0.0) {
        return Err(Error::Contract(format!("lambda must be nonnegative, got {lambda}")));
    }
    let width = mpiw_pen(batch.y_upper, batch.y, batch.y_lower)?;
    let (coverage, cu, cl) = coverage_penalty(batch)?;
    let total = width.value + lambda * coverage.c;
    let grad_upper = width.grad_upper.iter().zip(&cu).map(|(w, c)| w + lambda * c).collect();
    let grad_lower = width.grad_lower.iter().zip(&cl).map(|(w, c)| w + lambda * c).collect();
    Ok(DualAqdLoss {
        terms: DualAqdTerms {
            mpiw_pen: width.value,
            coverage,
            lambda,
            total,
        },
        grad_upper,
        grad_lower,
    })
}

/// Orientation of the QD+ point-estimate hinge term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HingeOrientation {
    /// `max(0, ŷ - u) + max(0, l - ŷ)`: penalizes estimates outside the interval.
    Violation,
    /// `max(0, u - ŷ) + max(0, ŷ - l)`: the literal printed form.
    AsPrinted,
}

impl std::str::FromStr for HingeOrientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "violation" => Ok(HingeOrientation::Violation),
            "as_printed" => Ok(HingeOrientation::AsPrinted),
            other => Err(Error::Config(format!(
                "unknown hinge orientation {other:?}; expected violation or as_printed"
            ))),
        }
    }
}

/// Coefficients of the QD-Ens and QD+ baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QdHyperparams {
    /// QD-Ens coverage-penalty weight.
    pub delta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// QD+ hinge weight (unrelated to the DualAQD batch error ξ).
    pub xi_qd: f64,
    /// Sigmoid sharpness used to soften PICP.
    pub soften_s: f64,
    pub tau: f64,
    pub hinge: HingeOrientation,
}

impl Default for QdHyperparams {
    fn default() -> Self {
        QdHyperparams {
            delta: 0.05,
            lambda1: 0.5,
            lambda2: 0.2,
            xi_qd: 1.0,
            soften_s: 160.0,
            tau: 0.05,
            hinge: HingeOrientation::Violation,
        }
    }
}

impl QdHyperparams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.tau > 0.0 && self.tau < 1.0) {
            problems.push(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if !(self.soften_s > 0.0) {
            problems.push(format!("soften_s must be positive, got {}", self.soften_s));
        }
        if !(0.0..=1.0).contains(&self.lambda1) || !(0.0..=1.0).contains(&self.lambda2) {
            problems.push(format!(
                "lambda1 and lambda2 must lie in [0, 1], got {} and {}",
                self.lambda1, self.lambda2
            ));
        }
        if !(self.delta > 0.0) {
            problems.push(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.xi_qd >= 0.0) {
            problems.push(format!("xi_qd must be nonnegative, got {}", self.xi_qd));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Sigmoid-softened PICP and its gradients with respect to both bounds.
fn soft_picp(y: &[f64], y_upper: &[f64], y_lower: &[f64], s: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let n = y.len() as f64;
    let mut value = 0.0;
    let mut gu = Vec::with_capacity(y.len());
    let mut gl = Vec::with_capacity(y.len());
    for i in 0..y.len() {
        let su = sigmoid(s * (y_upper[i] - y[i]));
        let sl = sigmoid(s * (y[i] - y_lower[i]));
        value += su * sl;
        gu.push(s * su * (1.0 - su) * sl / n);
        gl.push(-s * sl * (1.0 - sl) * su / n);
    }
    (value / n, gu, gl)
}

/// Hard-capture MPIW with gradient (indicators held constant).
fn mpiw_capt_with_grad(y: &[f64], y_upper: &[f64], y_lower: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let k: Vec<bool> = (0..y.len())
        .map(|i| captures_target(y_lower[i], y[i], y_upper[i]))
        .collect();
    let denom = MPIW_CAPT_EPS + k.iter().filter(|&&c| c).count() as f64;
    let value = mpiw_capt(y_upper, y_lower, &k, MPIW_CAPT_EPS);
    let gu = k.iter().map(|&c| if c { 1.0 / denom } else { 0.0 }).collect();
    let gl = k.iter().map(|&c| if c { -1.0 / denom } else { 0.0 }).collect();
    (value, gu, gl)
}

/// QD-Ens loss: `MPIW_capt + δ·N/(τ(1-τ))·max(0, (1-τ) - PICP_soft)²`.
pub fn qd_loss(batch: &BatchPiOutputs<'_>, hp: &QdHyperparams) -> Result<IntervalLoss> {
    let n = batch.len() as f64;
    let tau = hp.tau;
    let (capt, mut gu, mut gl) = mpiw_capt_with_grad(batch.y, batch.y_upper, batch.y_lower);
    let (soft, su, sl) = soft_picp(batch.y, batch.y_upper, batch.y_lower, hp.soften_s);
    let shortfall = ((1.0 - tau) - soft).max(0.0);
    let scale = hp.delta * n / (tau * (1.0 - tau));
    let value = capt + scale * shortfall * shortfall;
    if shortfall > 0.0 {
        // d/dp of scale·(c - p)² is -2·scale·(c - p).
        let factor = -2.0 * scale * shortfall;
        gu.iter_mut().zip(&su).for_each(|(g, s)| *g += factor * s);
        gl.iter_mut().zip(&sl).for_each(|(g, s)| *g += factor * s);
    }
    Ok(IntervalLoss {
        value,
        grad_upper: gu,
        grad_lower: gl,
        grad_point: None,
    })
}

/// QD+ loss: weighted MPIW_capt, soft coverage shortfall, MSE of the third
/// output, and a hinge tying the estimate to the interval.
pub fn qdplus_loss(batch: &BatchPiOutputs<'_>, hp: &QdHyperparams) -> Result<IntervalLoss> {
    let n = batch.len() as f64;
    let (l1, l2, tau) = (hp.lambda1, hp.lambda2, hp.tau);
    let w_capt = (1.0 - l1) * (1.0 - l2);
    let w_cov = l1 * (1.0 - l2);

    let (capt, cgu, cgl) = mpiw_capt_with_grad(batch.y, batch.y_upper, batch.y_lower);
    let (soft, su, sl) = soft_picp(batch.y, batch.y_upper, batch.y_lower, hp.soften_s);
    let shortfall = ((1.0 - tau) - soft).max(0.0);
    let mse = mse_loss(batch.y_hat, batch.y)?;

    let mut gu: Vec<f64> = cgu.iter().map(|g| w_capt * g).collect();
    let mut gl: Vec<f64> = cgl.iter().map(|g| w_capt * g).collect();
    let mut gp: Vec<f64> = mse.grad.iter().map(|g| l2 * g).collect();
    if shortfall > 0.0 {
        let factor = -2.0 * w_cov * shortfall;
        gu.iter_mut().zip(&su).for_each(|(g, s)| *g += factor * s);
        gl.iter_mut().zip(&sl).for_each(|(g, s)| *g += factor * s);
    }

    let mut hinge = 0.0;
    let hw = hp.xi_qd / n;
    for i in 0..batch.len() {
        let (u, l, p) = (batch.y_upper[i], batch.y_lower[i], batch.y_hat[i]);
        match hp.hinge {
            HingeOrientation::Violation => {
                if p - u > 0.0 {
                    hinge += p - u;
                    gp[i] += hw;
                    gu[i] -= hw;
                }
                if l - p > 0.0 {
                    hinge += l - p;
                    gl[i] += hw;
                    gp[i] -= hw;
                }
            }
            HingeOrientation::AsPrinted => {
                if u - p > 0.0 {
                    hinge += u - p;
                    gu[i] += hw;
                    gp[i] -= hw;
                }
                if p - l > 0.0 {
                    hinge += p - l;
                    gp[i] += hw;
                    gl[i] -= hw;
                }
            }
        }
    }

    let value = w_capt * capt + w_cov * shortfall * shortfall + l2 * mse.value + hw * hinge;
    Ok(IntervalLoss {
        value,
        grad_upper: gu,
        grad_lower: gl,
        grad_point: Some(gp),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap().value, 0.0);
        let l = mse_loss(&[1.0, 3.0], &[0.0, 0.0]).unwrap();
        assert_eq!(l.value, 5.0);
        assert_eq!(l.grad, vec![1.0, 3.0]);
        assert!(matches!(mse_loss(&[], &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn coverage_indicator_examples() {
        assert!(coverage_indicator(1.0, 2.0, 2.5, 3.0));
        assert!(!coverage_indicator(0.1, 25.0, 24.0, 0.2));
        assert!(!coverage_indicator(1.0, 1.0, 2.0, 3.0));
    }

    #[test]
    fn picp_examples() {
        assert_eq!(picp(&[true; 7]), 1.0);
        assert_eq!(picp(&[false; 7]), 0.0);
        let mut k = vec![true; 20];
        k[3] = false;
        assert_eq!(picp(&k), 0.95);
    }

    #[test]
    fn mpiw_capt_examples() {
        assert!(mpiw_capt(&[0.2], &[0.1], &[false], MPIW_CAPT_EPS) < 1e-8);
        assert!(close(mpiw_capt(&[3.0], &[1.0], &[true], MPIW_CAPT_EPS), 2.0, 1e-7));
        assert!(close(
            mpiw_capt(&[2.0, 5.0], &[0.0, 1.0], &[true, true], MPIW_CAPT_EPS),
            3.0,
            1e-7
        ));
    }

    #[test]
    fn mpiw_pen_examples() {
        let l = mpiw_pen(&[0.2], &[24.0], &[0.1]).unwrap();
        assert!(close(l.value, 47.7, 1e-12));
        assert_eq!(mpiw_pen(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]).unwrap().value, 0.0);
        let l = mpiw_pen(&[2.0, 6.0], &[1.0, 5.0], &[0.0, 4.0]).unwrap();
        assert_eq!(l.value, 2.0);
    }

    #[test]
    fn coverage_penalty_closed_forms() {
        assert_eq!(coverage_penalty_value(1.5, 1.5, 1.5), 2.0);
        assert!(close(coverage_penalty_value(1.0, 0.0, 0.0), 2.0 * std::f64::consts::E, 1e-12));
        // e^-1.5 + e^-0.5 evaluated independently: 0.22313016 + 0.60653066
        assert!(close(coverage_penalty_value(0.5, 2.0, 1.0), 0.829_660_8, 1e-6));
    }

    #[test]
    fn coverage_penalty_statistics() {
        let y = [1.0, 2.0];
        let y_hat = [1.5, 1.0];
        let u = [3.0, 4.0];
        let l = [0.0, 1.0];
        let b = BatchPiOutputs::new(&y, &y_hat, &u, &l).unwrap();
        let (t, gu, gl) = coverage_penalty(&b).unwrap();
        assert_eq!(t.xi, 1.0);
        assert_eq!(t.d_upper, 2.0);
        assert_eq!(t.d_lower, 1.0);
        assert!(close(t.c, (-1.0f64).exp() + 1.0, 1e-15));
        assert!(close(gu[0], -(-1.0f64).exp() / 2.0, 1e-15));
        assert!(close(gl[1], 0.5, 1e-15));
    }

    #[test]
    fn coverage_penalty_clips_huge_exponents() {
        let y = [0.0];
        let y_hat = [200.0];
        let u = [0.0];
        let l = [0.0];
        let b = BatchPiOutputs::new(&y, &y_hat, &u, &l).unwrap();
        let (t, _, _) = coverage_penalty(&b).unwrap();
        assert!(t.c.is_finite());
        assert_eq!(t.c, 2.0 * MAX_PENALTY_EXPONENT.exp());
    }

    #[test]
    fn coverage_penalty_rejects_nan() {
        let y = [f64::NAN];
        let b = BatchPiOutputs::new(&y, &[0.0], &[1.0], &[-1.0]).unwrap();
        assert!(matches!(coverage_penalty(&b), Err(Error::Numeric(_))));
    }

    #[test]
    fn dualaqd_reduces_to_width_penalty_at_zero_lambda() {
        let y = [1.0, 2.0, 3.0];
        let y_hat = [1.1, 1.8, 3.3];
        let u = [1.5, 2.5, 4.0];
        let l = [0.5, 1.0, 2.9];
        let b = BatchPiOutputs::new(&y, &y_hat, &u, &l).unwrap();
        let loss = dualaqd_loss(&b, 0.0).unwrap();
        assert_eq!(loss.terms.total, mpiw_pen(&u, &y, &l).unwrap().value);
    }

    #[test]
    fn dualaqd_perfect_tight_interval() {
        let y = [0.3, 0.7];
        let b = BatchPiOutputs::new(&y, &y, &y, &y).unwrap();
        let loss = dualaqd_loss(&b, 2.5).unwrap();
        assert_eq!(loss.terms.coverage.xi, 0.0);
        assert_eq!(loss.terms.total, 5.0);
        assert!(dualaqd_loss(&b, -1.0).is_err());
    }

    #[test]
    fn batch_length_mismatch_is_rejected() {
        assert!(BatchPiOutputs::new(&[1.0, 2.0], &[1.0], &[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(BatchPiOutputs::new(&[], &[], &[], &[]).is_err());
    }

    #[test]
    fn qd_penalty_clamps_when_covered() {
        let y = [0.5, 0.5];
        let u = [1.5, 1.0];
        let l = [0.0, 0.2];
        let b = BatchPiOutputs::new(&y, &y, &u, &l).unwrap();
        let hp = QdHyperparams::default();
        let loss = qd_loss(&b, &hp).unwrap();
        let k = [true, true];
        assert!(close(loss.value, mpiw_capt(&u, &l, &k, MPIW_CAPT_EPS), 1e-12));
    }

    #[test]
    fn qd_penalty_far_outside_limit() {
        let y = [10.0];
        let u = [1.0];
        let l = [0.0];
        let hp = QdHyperparams {
            soften_s: 1e4,
            ..QdHyperparams::default()
        };
        let b = BatchPiOutputs::new(&y, &y, &u, &l).unwrap();
        let loss = qd_loss(&b, &hp).unwrap();
        let tau = hp.tau;
        let expected = hp.delta * 1.0 / (tau * (1.0 - tau)) * (1.0 - tau).powi(2);
        assert!(close(loss.value, expected, 1e-12));
    }

    #[test]
    fn qdplus_special_cases() {
        let y = [0.2, 0.6, 0.9];
        let p = [0.25, 0.5, 1.2];
        let u = [0.5, 0.8, 1.0];
        let l = [0.0, 0.3, 0.7];
        let b = BatchPiOutputs::new(&y, &p, &u, &l).unwrap();
        let base = QdHyperparams {
            lambda1: 0.0,
            lambda2: 0.0,
            xi_qd: 0.0,
            ..QdHyperparams::default()
        };
        let k: Vec<bool> = (0..3).map(|i| captures_target(l[i], y[i], u[i])).collect();
        let capt = mpiw_capt(&u, &l, &k, MPIW_CAPT_EPS);
        assert!(close(qdplus_loss(&b, &base).unwrap().value, capt, 1e-12));

        let only_mse = QdHyperparams {
            lambda2: 1.0,
            xi_qd: 0.6,
            ..base
        };
        let mse = mse_loss(&p, &y).unwrap().value;
        // violation hinge: only sample 2 has p > u, by 0.2
        let hinge = 0.6 / 3.0 * 0.2;
        assert!(close(qdplus_loss(&b, &only_mse).unwrap().value, mse + hinge, 1e-12));
    }

    #[test]
    fn hinge_orientations_differ() {
        let y = [0.5];
        let p = [0.5];
        let u = [1.0];
        let l = [0.0];
        let b = BatchPiOutputs::new(&y, &p, &u, &l).unwrap();
        let hp = QdHyperparams {
            lambda1: 0.0,
            lambda2: 0.0,
            xi_qd: 1.0,
            ..QdHyperparams::default()
        };
        let violation = qdplus_loss(&b, &hp).unwrap().value;
        let printed = qdplus_loss(
            &b,
            &QdHyperparams {
                hinge: HingeOrientation::AsPrinted,
                ..hp
            },
        )
        .unwrap()
        .value;
        // estimate inside the interval: no violation, but the printed form charges u - l.
        assert!(close(printed - violation, 1.0, 1e-7));
    }

    #[test]
    fn hyperparameter_validation() {
        assert!(QdHyperparams::default().validate().is_ok());
        let bad = QdHyperparams {
            tau: 1.0,
            lambda1: 2.0,
            ..QdHyperparams::default()
        };
        let err = bad.validate().unwrap_err().to_string();
        assert!(err.contains("tau") && err.contains("lambda1"));
    }

    /// Output-level central differences at the default sharp softening.
    #[test]
    fn qd_family_gradients_at_default_softening() {
        let y = [0.30, 0.55, 0.72, 0.10, 0.95];
        let l = [0.28, 0.40, 0.75, 0.02, 0.80];
        let u = [0.41, 0.70, 0.90, 0.12, 0.97];
        let p = [0.33, 0.80, 0.78, 0.07, 0.85];
        let hp = QdHyperparams {
            lambda1: 0.4,
            lambda2: 0.3,
            xi_qd: 0.5,
            ..QdHyperparams::default()
        };
        let h = 1e-7;
        for plus in [false, true] {
            let eval = |l: &[f64], u: &[f64], p: &[f64]| {
                let b = BatchPiOutputs::new(&y, p, u, l).unwrap();
                if plus { qdplus_loss(&b, &hp) } else { qd_loss(&b, &hp) }.unwrap()
            };
            let base = eval(&l, &u, &p);
            for i in 0..y.len() {
                for which in 0..3 {
                    if which == 2 && !plus {
                        continue;
                    }
                    let bump = |d: f64| {
                        let (mut l2, mut u2, mut p2) = (l, u, p);
                        [&mut l2, &mut u2, &mut p2][which][i] += d;
                        eval(&l2, &u2, &p2).value
                    };
                    let numeric = (bump(h) - bump(-h)) / (2.0 * h);
                    let analytic = match which {
                        0 => base.grad_lower[i],
                        1 => base.grad_upper[i],
                        _ => base.grad_point.as_ref().unwrap()[i],
                    };
                    let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-2);
                    assert!(err < 1e-5, "plus={plus} sample {i} output {which}: {analytic} vs {numeric}");
                }
            }
        }
    }
}

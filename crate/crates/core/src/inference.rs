//! Monte Carlo dropout aggregation of point estimates and interval bounds.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::TargetStats;
use crate::nn::MlpModel;
use crate::{derive_seed, Error, Result};

/// Column of the lower bound in an interval network's output.
pub const LOWER: usize = 0;
/// Column of the upper bound in an interval network's output.
pub const UPPER: usize = 1;
/// Column of the point estimate in a three-output (QD+) network.
pub const POINT: usize = 2;

/// Per-sample point estimate with lower and upper bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiTriple {
    pub y_bar: Vec<f64>,
    pub y_upper: Vec<f64>,
    pub y_lower: Vec<f64>,
}

impl PiTriple {
    pub fn len(&self) -> usize {
        self.y_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_bar.is_empty()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.y_upper.iter().zip(&self.y_lower).map(|(u, l)| u - l).collect()
    }

    /// Reads the triple out of the outputs of `f` (one column) and `g` (lower, upper).
    pub fn from_outputs(point: &Array2<f64>, bounds: &Array2<f64>) -> Self {
        PiTriple {
            y_bar: point.column(0).to_vec(),
            y_lower: bounds.column(LOWER).to_vec(),
            y_upper: bounds.column(UPPER).to_vec(),
        }
    }
}

fn pass_rng(seed: u64, pass: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, pass as u64))
}

/// Averages `m` dropout-active passes of `f` and `g`.
///
/// Pass `i` draws its masks from a stream derived from `(seed, i)`, so the
/// result does not depend on how passes are scheduled.
pub fn mc_aggregate(f: &MlpModel, g: &MlpModel, x: ArrayView2<'_, f64>, m: usize, seed: u64) -> Result<PiTriple> {
    if m == 0 {
        return Err(Error::Config("the number of Monte Carlo passes must be at least 1".into()));
    }
    if f.output_dim() != 1 || g.output_dim() < 2 {
        return Err(Error::Config("mc_aggregate expects a 1-output f and a 2-output g".into()));
    }
    let passes: Vec<(Array2<f64>, Array2<f64>)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = pass_rng(seed, i);
            Ok((f.sample(x, &mut rng)?, g.sample(x, &mut rng)?))
        })
        .collect::<Result<_>>()?;
    let mut point = Array2::zeros((x.nrows(), 1));
    let mut bounds = Array2::zeros((x.nrows(), g.output_dim()));
    for (p, b) in &passes {
        point += p;
        bounds += b;
    }
    point /= m as f64;
    bounds /= m as f64;
    Ok(PiTriple::from_outputs(&point, &bounds))
}

/// Mean and (unbiased) variance of `m` dropout-active passes of a 1-output network.
pub fn mc_moments(f: &MlpModel, x: ArrayView2<'_, f64>, m: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if m == 0 {
        return Err(Error::Config("the number of Monte Carlo passes must be at least 1".into()));
    }
    let passes: Vec<Array2<f64>> = (0..m)
        .into_par_iter()
        .map(|i| f.sample(x, &mut pass_rng(seed, i)))
        .collect::<Result<_>>()?;
    let n = x.nrows();
    let mut mean = vec![0.0; n];
    for p in &passes {
        mean.iter_mut().zip(p.column(0)).for_each(|(a, v)| *a += v);
    }
    mean.iter_mut().for_each(|a| *a /= m as f64);
    let mut var = vec![0.0; n];
    if m > 1 {
        for p in &passes {
            var.iter_mut()
                .zip(p.column(0))
                .zip(&mean)
                .for_each(|((s, v), mu)| *s += (v - mu) * (v - mu));
        }
        var.iter_mut().for_each(|s| *s /= (m - 1) as f64);
    }
    Ok((mean, var))
}

/// Two-sided normal critical value `z_(1-τ/2)`; exactly 1.96 at τ = 0.05.
pub fn z_critical(tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Config(format!("tau must lie in (0, 1), got {tau}")));
    }
    if (tau - 0.05).abs() < 1e-12 {
        return Ok(1.96);
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(1.0 - tau / 2.0))
}

/// Intervals from the point network alone: `ȳ ± z·sqrt(σ²_model + σ²_noise)`.
///
/// `sigma2_noise` is the point network's MSE on held-out data of the same fold.
pub fn mcdropout_pi(
    f: &MlpModel,
    x: ArrayView2<'_, f64>,
    m: usize,
    sigma2_noise: f64,
    tau: f64,
    seed: u64,
) -> Result<PiTriple> {
    if !(sigma2_noise >= 0.0) {
        return Err(Error::Contract(format!("noise variance must be nonnegative, got {sigma2_noise}")));
    }
    let z = z_critical(tau)?;
    let (mean, var) = mc_moments(f, x, m, seed)?;
    let half: Vec<f64> = var.iter().map(|v| z * (v + sigma2_noise).sqrt()).collect();
    Ok(PiTriple {
        y_upper: mean.iter().zip(&half).map(|(c, h)| c + h).collect(),
        y_lower: mean.iter().zip(&half).map(|(c, h)| c - h).collect(),
        y_bar: mean,
    })
}

/// Maps a normalized triple back to original target units.
pub fn denormalize_triple(triple: &PiTriple, stats: &TargetStats) -> Result<PiTriple> {
    Ok(PiTriple {
        y_bar: stats.denormalize_all(&triple.y_bar)?,
        y_upper: stats.denormalize_all(&triple.y_upper)?,
        y_lower: stats.denormalize_all(&triple.y_lower)?,
    })
}

/// Writes `sample_id,y_true,y_bar,y_l,y_u`. `y_true` is left empty when unknown.
pub fn write_predictions<W: std::io::Write>(triple: &PiTriple, y_true: Option<&[f64]>, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["sample_id", "y_true", "y_bar", "y_l", "y_u"])?;
    for i in 0..triple.len() {
        wtr.write_record([
            i.to_string(),
            y_true.map(|y| y[i].to_string()).unwrap_or_default(),
            triple.y_bar[i].to_string(),
            triple.y_lower[i].to_string(),
            triple.y_upper[i].to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<predictions writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use ndarray::array;

    fn nets(dropout: f64) -> (MlpModel, MlpModel) {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let f = MlpModel::new(&[2, 16, 16, 1], Activation::Relu, dropout, &mut rng).unwrap();
        let g = MlpModel::new(&[2, 16, 16, 2], Activation::Relu, dropout, &mut rng).unwrap();
        (f, g)
    }

    fn inputs() -> Array2<f64> {
        array![[0.1, -0.3], [1.2, 0.4], [-0.7, 0.9]]
    }

    #[test]
    fn no_dropout_equals_single_deterministic_pass() {
        let (f, g) = nets(0.0);
        let x = inputs();
        let t = mc_aggregate(&f, &g, x.view(), 17, 3).unwrap();
        let expect = PiTriple::from_outputs(&f.predict(x.view()).unwrap(), &g.predict(x.view()).unwrap());
        for (a, b) in t.y_upper.iter().zip(&expect.y_upper) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in t.y_bar.iter().zip(&expect.y_bar) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn one_pass_equals_seeded_sample() {
        let (f, g) = nets(0.3);
        let x = inputs();
        let t = mc_aggregate(&f, &g, x.view(), 1, 8).unwrap();
        let mut rng = pass_rng(8, 0);
        let p = f.sample(x.view(), &mut rng).unwrap();
        let b = g.sample(x.view(), &mut rng).unwrap();
        assert_eq!(t, PiTriple::from_outputs(&p, &b));
    }

    #[test]
    fn zero_passes_rejected() {
        let (f, g) = nets(0.1);
        assert!(matches!(mc_aggregate(&f, &g, inputs().view(), 0, 1), Err(Error::Config(_))));
    }

    #[test]
    fn aggregation_is_deterministic() {
        let (f, g) = nets(0.2);
        let x = inputs();
        assert_eq!(
            mc_aggregate(&f, &g, x.view(), 25, 4).unwrap(),
            mc_aggregate(&f, &g, x.view(), 25, 4).unwrap()
        );
    }

    #[test]
    fn mcdropout_pi_half_widths() {
        let (f, _) = nets(0.0);
        let x = inputs();
        let t = mcdropout_pi(&f, x.view(), 10, 1.0, 0.05, 0).unwrap();
        for i in 0..t.len() {
            assert!((t.y_upper[i] - t.y_bar[i] - 1.96).abs() < 1e-12);
            assert!((t.y_bar[i] - t.y_lower[i] - 1.96).abs() < 1e-12);
        }
        let t = mcdropout_pi(&f, x.view(), 10, 0.0, 0.05, 0).unwrap();
        for i in 0..t.len() {
            assert!((t.y_upper[i] - t.y_bar[i]).abs() < 1e-7);
            assert!((t.y_bar[i] - t.y_lower[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn mcdropout_pi_is_symmetric() {
        let (f, _) = nets(0.3);
        let t = mcdropout_pi(&f, inputs().view(), 50, 0.2, 0.1, 5).unwrap();
        for i in 0..t.len() {
            let up = t.y_upper[i] - t.y_bar[i];
            let down = t.y_bar[i] - t.y_lower[i];
            assert!((up - down).abs() < 1e-12);
        }
    }

    #[test]
    fn z_critical_general_tau() {
        assert_eq!(z_critical(0.05).unwrap(), 1.96);
        assert!((z_critical(0.1).unwrap() - 1.644_853_6).abs() < 1e-6);
        assert!(z_critical(0.0).is_err());
    }

    #[test]
    fn denormalize_examples() {
        let t = PiTriple {
            y_bar: vec![0.5],
            y_upper: vec![0.7],
            y_lower: vec![0.1],
        };
        assert_eq!(denormalize_triple(&t, &TargetStats::IDENTITY).unwrap(), t);
        let d = denormalize_triple(&t, &TargetStats { min: 0.0, max: 10.0 }).unwrap();
        assert_eq!(d.y_bar, vec![5.0]);
        assert!(denormalize_triple(&t, &TargetStats { min: 2.0, max: 2.0 }).is_err());
    }

    #[test]
    fn prediction_file_layout() {
        let t = PiTriple {
            y_bar: vec![1.5],
            y_upper: vec![2.0],
            y_lower: vec![1.0],
        };
        let mut buf = Vec::new();
        write_predictions(&t, Some(&[1.25]), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "sample_id,y_true,y_bar,y_l,y_u\n0,1.25,1.5,1,2\n");
    }
}

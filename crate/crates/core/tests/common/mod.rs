//! Oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use dualaqd::nn::{Activation, MlpModel};
use dualaqd::objectives::{self, BatchPiOutputs, QdHyperparams};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Relative tolerance away from kinks.
pub const GRAD_TOL: f64 = 1e-6;
/// Relative tolerance when some kink lies within [`NEAR_KINK`] of the evaluation point.
pub const GRAD_TOL_NEAR_KINK: f64 = 1e-5;
pub const NEAR_KINK: f64 = 1e-2;
/// Closer than this, a finite difference may straddle the kink; the case is redrawn.
pub const REJECT_KINK: f64 = 1e-4;
/// Denominator floor for the relative error, so gradients that are zero up to
/// round-off are compared absolutely (central differences carry ~eps·|loss|/h of noise).
pub const REL_FLOOR: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// A fixed random linear functional of the outputs: pure backprop.
    Linear,
    Mse,
    DualAqd,
    Qd,
    QdPlus,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Linear, Family::Mse, Family::DualAqd, Family::Qd, Family::QdPlus];

    fn outputs(self) -> usize {
        match self {
            Family::Linear => 2,
            Family::Mse => 1,
            Family::DualAqd | Family::Qd => 2,
            Family::QdPlus => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCase {
    pub family: Family,
    pub seed: u64,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub kink_distance: f64,
}

impl GradCase {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tolerance
    }
}

struct Problem {
    x: Array2<f64>,
    y: Vec<f64>,
    y_hat: Vec<f64>,
    weights: Array2<f64>,
    lambda: f64,
    hp: QdHyperparams,
}

fn column(out: &Array2<f64>, c: usize) -> Vec<f64> {
    out.column(c).to_vec()
}

/// Loss value and dLoss/dOutput.
fn loss(family: Family, p: &Problem, out: &Array2<f64>) -> (f64, Array2<f64>) {
    let n = out.nrows();
    let mut g = Array2::zeros(out.raw_dim());
    let value = match family {
        Family::Linear => {
            g.assign(&p.weights);
            (out * &p.weights).sum()
        }
        Family::Mse => {
            let l = objectives::mse_loss(&column(out, 0), &p.y).unwrap();
            g.column_mut(0).assign(&ndarray::Array1::from(l.grad));
            l.value
        }
        Family::DualAqd => {
            let (lo, up) = (column(out, 0), column(out, 1));
            let b = BatchPiOutputs::new(&p.y, &p.y_hat, &up, &lo).unwrap();
            let l = objectives::dualaqd_loss(&b, p.lambda).unwrap();
            for i in 0..n {
                g[[i, 0]] = l.grad_lower[i];
                g[[i, 1]] = l.grad_upper[i];
            }
            l.terms.total
        }
        Family::Qd | Family::QdPlus => {
            let (lo, up) = (column(out, 0), column(out, 1));
            let point = if family == Family::QdPlus {
                column(out, 2)
            } else {
                lo.iter().zip(&up).map(|(a, b)| 0.5 * (a + b)).collect()
            };
            let b = BatchPiOutputs::new(&p.y, &point, &up, &lo).unwrap();
            let l = if family == Family::Qd {
                objectives::qd_loss(&b, &p.hp).unwrap()
            } else {
                objectives::qdplus_loss(&b, &p.hp).unwrap()
            };
            for i in 0..n {
                g[[i, 0]] = l.grad_lower[i];
                g[[i, 1]] = l.grad_upper[i];
                if let Some(gp) = &l.grad_point {
                    g[[i, 2]] = gp[i];
                }
            }
            l.value
        }
    };
    (value, g)
}

/// Distance from the evaluation point to the nearest non-differentiable point.
fn kink_distance(family: Family, model: &MlpModel, p: &Problem, out: &Array2<f64>) -> f64 {
    let (_, trace) = model.forward(p.x.view(), None).unwrap();
    let mut d = f64::INFINITY;
    if model.activation() == Activation::Relu {
        for z in &trace.pre_activations {
            d = z.iter().fold(d, |m, v| m.min(v.abs()));
        }
    }
    let n = out.nrows();
    for i in 0..n {
        match family {
            Family::DualAqd | Family::Qd => {
                d = d.min((out[[i, 0]] - p.y[i]).abs()).min((out[[i, 1]] - p.y[i]).abs());
            }
            Family::QdPlus => {
                d = d.min((out[[i, 0]] - p.y[i]).abs()).min((out[[i, 1]] - p.y[i]).abs());
                d = d.min((out[[i, 2]] - out[[i, 0]]).abs()).min((out[[i, 2]] - out[[i, 1]]).abs());
            }
            _ => {}
        }
    }
    d
}

fn setup(family: Family, seed: u64) -> (MlpModel, Problem) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let act = if rng.random_bool(0.5) { Activation::Relu } else { Activation::Tanh };
    let dims = [3, 6, 5, family.outputs()];
    let model = MlpModel::new(&dims, act, 0.0, &mut rng).unwrap();
    let n = 8;
    let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y_hat = y.iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
    let weights = Array2::from_shape_fn((n, family.outputs()), |_| rng.random_range(-1.0..1.0));
    let hp = QdHyperparams {
        lambda1: rng.random_range(0.0..1.0),
        lambda2: rng.random_range(0.0..1.0),
        xi_qd: rng.random_range(0.1..2.0),
        // a gentler sigmoid keeps third derivatives, and so finite-difference truncation, small
        soften_s: rng.random_range(5.0..20.0),
        delta: rng.random_range(0.01..0.1),
        ..QdHyperparams::default()
    };
    let problem = Problem {
        x,
        y,
        y_hat,
        weights,
        lambda: rng.random_range(0.1..3.0),
        hp,
    };
    (model, problem)
}

fn loss_at(family: Family, model: &MlpModel, p: &Problem) -> f64 {
    let out = model.predict(p.x.view()).unwrap();
    loss(family, p, &out).0
}

/// One finite-difference comparison over every parameter. `None` when the
/// drawn point sits too close to a kink.
pub fn grad_case(family: Family, seed: u64) -> Option<GradCase> {
    grad_case_with_step(family, seed, FD_STEP)
}

pub fn grad_case_with_step(family: Family, seed: u64, step: f64) -> Option<GradCase> {
    let (mut model, p) = setup(family, seed);
    let (out, trace) = model.forward(p.x.view(), None).unwrap();
    let kd = kink_distance(family, &model, &p, &out);
    if kd < REJECT_KINK {
        return None;
    }
    let (_, g_out) = loss(family, &p, &out);
    let analytic = model.backward(&trace, g_out.view()).unwrap().to_flat();
    let theta = model.parameters();
    let mut max_rel: f64 = 0.0;
    for k in 0..theta.len() {
        let mut t = theta.clone();
        t[k] = theta[k] + step;
        model.set_parameters(&t).unwrap();
        let plus = loss_at(family, &model, &p);
        t[k] = theta[k] - step;
        model.set_parameters(&t).unwrap();
        let minus = loss_at(family, &model, &p);
        let numeric = (plus - minus) / (2.0 * step);
        let denom = analytic[k].abs().max(numeric.abs()).max(REL_FLOOR);
        max_rel = max_rel.max((analytic[k] - numeric).abs() / denom);
    }
    model.set_parameters(&theta).unwrap();
    Some(GradCase {
        family,
        seed,
        max_rel_err: max_rel,
        tolerance: if kd < NEAR_KINK { GRAD_TOL_NEAR_KINK } else { GRAD_TOL },
        kink_distance: kd,
    })
}

/// `per_family` accepted cases for each loss family.
pub fn gradient_suite(per_family: usize) -> Vec<GradCase> {
    let mut cases = Vec::new();
    for (f_idx, family) in Family::ALL.into_iter().enumerate() {
        let mut seed = 1000 * f_idx as u64;
        let mut got = 0;
        while got < per_family {
            if let Some(c) = grad_case(family, seed) {
                cases.push(c);
                got += 1;
            }
            seed += 1;
        }
    }
    cases
}

/// Forward pass by explicit loops, no ndarray products.
pub fn naive_forward(model: &MlpModel, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let layers = model.layers();
    let mut rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    for (k, layer) in layers.iter().enumerate() {
        let last = k + 1 == layers.len();
        rows = rows
            .iter()
            .map(|a| {
                (0..layer.out_dim())
                    .map(|j| {
                        let mut z = layer.biases[j];
                        for (i, ai) in a.iter().enumerate() {
                            z += ai * layer.weights[[i, j]];
                        }
                        match (last, model.activation()) {
                            (true, _) | (false, Activation::Identity) => z,
                            (false, Activation::Relu) => z.max(0.0),
                            (false, Activation::Tanh) => z.tanh(),
                        }
                    })
                    .collect()
            })
            .collect();
    }
    let cols = rows.first().map_or(0, Vec::len);
    Array2::from_shape_vec((rows.len(), cols), rows.concat()).unwrap()
}

/// Largest absolute difference between `model.predict` and the loop oracle over random inputs.
pub fn forward_oracle_gap(cases: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..cases as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let act = [Activation::Relu, Activation::Tanh, Activation::Identity][seed as usize % 3];
        let depth = rng.random_range(1..4);
        let mut dims = vec![rng.random_range(1..6)];
        for _ in 0..depth {
            dims.push(rng.random_range(1..20));
        }
        dims.push(rng.random_range(1..4));
        let model = MlpModel::new(&dims, act, 0.1, &mut rng).unwrap();
        let x = Array2::from_shape_fn((rng.random_range(1..12), dims[0]), |_| rng.random_range(-3.0..3.0));
        let fast = model.predict(x.view()).unwrap();
        let slow = naive_forward(&model, x.view());
        worst = fast.iter().zip(slow.iter()).fold(worst, |m, (a, b)| m.max((a - b).abs()));
    }
    worst
}

/// Fraction of `draws` generator samples strictly inside their ideal bounds.
pub fn ideal_coverage(draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inside = 0usize;
    for _ in 0..draws {
        let x = rng.random_range(-5.0..5.0);
        let y = dualaqd::data::sample_target(x, &mut rng);
        let (u, l) = dualaqd::data::ideal_bounds(x);
        if l < y && y < u {
            inside += 1;
        }
    }
    inside as f64 / draws as f64
}

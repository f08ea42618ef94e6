//! Compares backpropagated gradients of the interval loss with central
//! finite differences on a small random network.
//!
//! cargo run --example gradient_check

use dualaqd::nn::{Activation, MlpModel};
use dualaqd::objectives::{dualaqd_loss, BatchPiOutputs};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loss(model: &MlpModel, x: &Array2<f64>, y: &[f64], y_hat: &[f64], lambda: f64) -> (f64, Array2<f64>) {
    let out = model.predict(x.view()).unwrap();
    let (lo, up) = (out.column(0).to_vec(), out.column(1).to_vec());
    let batch = BatchPiOutputs::new(y, y_hat, &up, &lo).unwrap();
    let l = dualaqd_loss(&batch, lambda).unwrap();
    let mut g = Array2::zeros(out.raw_dim());
    for i in 0..y.len() {
        g[[i, 0]] = l.grad_lower[i];
        g[[i, 1]] = l.grad_upper[i];
    }
    (l.terms.total, g)
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut model = MlpModel::new(&[2, 8, 8, 2], Activation::Tanh, 0.0, &mut rng).unwrap();
    let x = Array2::from_shape_fn((6, 2), |_| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y_hat: Vec<f64> = y.iter().map(|v| v + rng.random_range(-0.2..0.2)).collect();
    let lambda = 1.5;

    let (_, g_out) = loss(&model, &x, &y, &y_hat, lambda);
    let (_, trace) = model.forward(x.view(), None).unwrap();
    let analytic = model.backward(&trace, g_out.view()).unwrap().to_flat();

    let theta = model.parameters();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..theta.len() {
        let mut t = theta.clone();
        t[k] += h;
        model.set_parameters(&t).unwrap();
        let plus = loss(&model, &x, &y, &y_hat, lambda).0;
        t[k] -= 2.0 * h;
        model.set_parameters(&t).unwrap();
        let minus = loss(&model, &x, &y, &y_hat, lambda).0;
        let numeric = (plus - minus) / (2.0 * h);
        worst = worst.max((analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(1e-2));
    }
    println!("{} parameters, worst relative error {worst:.2e}", theta.len());
}

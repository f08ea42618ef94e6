//! Gaussian intervals from a single dropout network: the spread of repeated
//! dropout passes plus the held-out squared error as noise variance.
//!
//! cargo run --release --example mc_dropout_pi

use dualaqd::data::{assign_folds, generate_synthetic, split_fold, FoldScheme, SyntheticSpec};
use dualaqd::inference::{denormalize_triple, mc_moments, mcdropout_pi, z_critical};
use dualaqd::metrics;
use dualaqd::train::{train_point_network, TrainConfig};

fn main() -> dualaqd::Result<()> {
    let data = generate_synthetic(&SyntheticSpec::default())?;
    let fold = &assign_folds(data.len(), FoldScheme::KFold { k: 2 }, 3)?[0];
    let split = split_fold(&data, fold)?;
    let cfg = TrainConfig {
        point_epochs: 150,
        ..TrainConfig::default()
    };
    let f = train_point_network(&split, &cfg)?;
    let noise = f.val_mse[f.best_epoch - 1];
    println!("z = {:.4}, noise variance (normalized) = {noise:.5}", z_critical(cfg.tau)?);

    let (_, model_var) = mc_moments(&f.model, split.val_x.view(), cfg.mc_passes, 11)?;
    let mean_var = model_var.iter().sum::<f64>() / model_var.len() as f64;
    println!("mean model variance (normalized) = {mean_var:.5}");

    let triple = mcdropout_pi(&f.model, split.val_x.view(), cfg.mc_passes, noise, cfg.tau, 11)?;
    let triple = denormalize_triple(&triple, &split.stats.target)?;
    let y = split.val_y_original();
    println!(
        "PICP {:.3}  MPIW {:.3}  PI_delta {:.3}",
        metrics::picp(&y, &triple.y_bar, &triple.y_upper, &triple.y_lower),
        metrics::mpiw(&triple.y_upper, &triple.y_lower),
        metrics::pi_delta(&triple.y_upper, &triple.y_lower, split.val_ideal.as_ref())?,
    );
    Ok(())
}

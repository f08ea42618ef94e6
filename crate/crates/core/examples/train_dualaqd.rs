//! Trains the point network and its companion interval network on one split,
//! then shows how the adaptive coefficient moved and which epoch was kept.
//!
//! cargo run --release --example train_dualaqd -- [epochs]

use dualaqd::data::{assign_folds, generate_synthetic, split_fold, FoldScheme, SyntheticSpec};
use dualaqd::inference::{denormalize_triple, mc_aggregate};
use dualaqd::metrics;
use dualaqd::train::{train_pi_network, train_point_network, TrainConfig};

fn main() -> dualaqd::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(150);
    let data = generate_synthetic(&SyntheticSpec::default())?;
    let fold = &assign_folds(data.len(), FoldScheme::KFold { k: 2 }, 0)?[0];
    let split = split_fold(&data, fold)?;
    let cfg = TrainConfig {
        max_epochs: epochs,
        point_epochs: epochs,
        ..TrainConfig::default()
    };

    let f = train_point_network(&split, &cfg)?;
    println!("point network: best epoch {} of {epochs}", f.best_epoch);

    let pi = train_pi_network(&split, Some(&f.model), &cfg, cfg.seed)?;
    for e in pi.lambda_trace.entries.iter().step_by((epochs / 10).max(1)) {
        println!("epoch {:>4}  train PICP {:.3}  lambda {:.4}", e.epoch, e.picp_train, e.lambda);
    }
    let sel = pi.selected.expect("at least one epoch ran");
    println!("kept epoch {} (val PICP {:.3}, MPIW {:.3})", sel.epoch, sel.picp_val, sel.mpiw_val);

    // MC-Dropout over both networks, back in original units
    let triple = mc_aggregate(&f.model, &pi.model, split.val_x.view(), cfg.mc_passes, 1)?;
    let triple = denormalize_triple(&triple, &split.stats.target)?;
    let y = split.val_y_original();
    println!(
        "validation: PICP {:.3}  MPIW {:.3}  MSE {:.3}  PI_delta {:.3}",
        metrics::picp(&y, &triple.y_bar, &triple.y_upper, &triple.y_lower),
        metrics::mpiw(&triple.y_upper, &triple.y_lower),
        metrics::mse(&triple.y_bar, &y),
        metrics::pi_delta(&triple.y_upper, &triple.y_lower, split.val_ideal.as_ref())?,
    );
    Ok(())
}

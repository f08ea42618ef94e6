//! Scores each candidate learning rate for the adaptive coefficient and keeps
//! the one whose mean (PICP, MPIW) dominates.
//!
//! cargo run --release --example alpha_grid_search

use dualaqd::bench::DEFAULT_ALPHA_GRID;
use dualaqd::data::{generate_synthetic, FoldScheme, SyntheticSpec};
use dualaqd::train::{grid_search_alpha, TrainConfig};

fn main() -> dualaqd::Result<()> {
    let data = generate_synthetic(&SyntheticSpec::default())?;
    let cfg = TrainConfig {
        max_epochs: 80,
        point_epochs: 80,
        hidden_layers: vec![50, 50],
        mc_passes: 30,
        ..TrainConfig::default()
    };
    let grid = grid_search_alpha(&data, &cfg, FoldScheme::KFold { k: 2 }, &DEFAULT_ALPHA_GRID)?;
    for row in &grid.rows {
        println!("alpha {:<6} PICP {:.4}  MPIW {:.3}", row.alpha, row.report.picp.mean, row.report.mpiw.mean);
    }
    println!("best alpha: {}", grid.best_alpha);
    Ok(())
}

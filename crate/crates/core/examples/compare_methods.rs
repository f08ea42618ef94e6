//! Cross-validates every method on the same folds and prints a table plus a
//! paired t-test of interval widths against the companion-network method.
//!
//! cargo run --release --example compare_methods -- [epochs]

use dualaqd::data::{generate_synthetic, FoldScheme, SyntheticSpec};
use dualaqd::metrics::paired_t_test;
use dualaqd::train::{cross_validate, LossKind, TrainConfig};

fn main() -> dualaqd::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let data = generate_synthetic(&SyntheticSpec::default())?;
    let scheme = FoldScheme::RepeatedTwoFold { repeats: 2 };
    let base = TrainConfig {
        max_epochs: epochs,
        point_epochs: epochs,
        ensemble_size: 3,
        ..TrainConfig::default()
    };

    let runs = [
        ("dualaqd", base.clone()),
        ("dualaqd_nobs", TrainConfig { batch_sorting: false, ..base.clone() }),
        ("qd", TrainConfig { loss_kind: LossKind::Qd, ..base.clone() }),
        ("qdplus", TrainConfig { loss_kind: LossKind::QdPlus, ..base.clone() }),
        ("mcdropout_pi", TrainConfig { loss_kind: LossKind::McDropoutPi, ..base.clone() }),
    ];
    let mut reports = Vec::new();
    println!("{:<14} {:>8} {:>8} {:>8} {:>9}", "method", "PICP", "MPIW", "MSE", "PI_delta");
    for (name, cfg) in runs {
        let cv = cross_validate(&data, &cfg, scheme)?;
        let r = &cv.report;
        println!(
            "{name:<14} {:>8.4} {:>8.3} {:>8.3} {:>9.3}",
            r.picp.mean,
            r.mpiw.mean,
            r.mse.mean,
            r.pi_delta.map_or(f64::NAN, |d| d.mean)
        );
        reports.push((name, cv));
    }

    let widths = |i: usize| reports[i].1.folds.iter().map(|f| f.metrics.mpiw).collect::<Vec<_>>();
    for i in 1..reports.len() {
        let t = paired_t_test(&widths(0), &widths(i), 0.05)?;
        println!("dualaqd vs {:<13} t = {:>7.2}  p = {:.3}", reports[i].0, t.t_statistic, t.p_value);
    }
    Ok(())
}

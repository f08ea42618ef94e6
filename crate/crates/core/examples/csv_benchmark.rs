//! Runs the k-fold protocol on a user CSV: features are z-scored and the
//! target min-max scaled with statistics from each training fold only.
//!
//! cargo run --release --example csv_benchmark -- data.csv target [epochs]
//!
//! Without arguments a small two-feature dataset is generated first.

use std::path::PathBuf;

use dualaqd::data::{load_csv, CsvSchema, FoldScheme};
use dualaqd::train::{cross_validate, TrainConfig};
use rand::{Rng, SeedableRng};

fn demo_csv() -> std::io::Result<PathBuf> {
    let path = std::env::temp_dir().join("dualaqd_demo.csv");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut text = String::from("a,b,constant,y\n");
    for _ in 0..400 {
        let (a, b): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(0.0..1.0));
        let y = a * a + 3.0 * b + rng.random_range(-0.5..0.5) * (1.0 + b);
        text.push_str(&format!("{a},{b},7,{y}\n"));
    }
    std::fs::write(&path, text)?;
    Ok(path)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let (path, target) = match args.get(1) {
        Some(p) => (PathBuf::from(p), args.get(2).cloned().unwrap_or_else(|| "y".into())),
        None => (demo_csv()?, "y".into()),
    };
    let epochs = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(60);

    let data = load_csv(&path, &CsvSchema::with_target(target))?;
    println!("{} rows, features {:?}", data.len(), data.feature_names);

    let cfg = TrainConfig {
        max_epochs: epochs,
        point_epochs: epochs,
        mc_passes: 50,
        ..TrainConfig::default()
    };
    let cv = cross_validate(&data, &cfg, FoldScheme::KFold { k: 10 })?;
    for f in &cv.folds {
        println!("fold {:>2}: PICP {:.3}  MPIW {:.3}", f.fold_index, f.metrics.picp, f.metrics.mpiw);
    }
    let floor = 1.0 - cfg.tau - 0.02;
    println!(
        "mean PICP {:.3} (floor {floor:.2}), mean MPIW {:.3}",
        cv.report.picp.mean, cv.report.mpiw.mean
    );
    Ok(())
}

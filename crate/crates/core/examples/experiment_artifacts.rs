//! Drives the benchmark layer directly: writes a dataset, runs one method and
//! lists the artifacts that land in the output directory.
//!
//! cargo run --release --example experiment_artifacts -- [out_dir]

use std::path::PathBuf;

use dualaqd::bench::{self, ExperimentConfig, Setting};

fn main() -> dualaqd::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "dualaqd_out".into()));
    let overrides = [
        Setting::new("example", "max_epochs", "40"),
        Setting::new("example", "point_epochs", "40"),
        Setting::new("example", "cv", "kfold:2"),
        Setting::new("example", "n_points", "300"),
    ];
    let cfg = ExperimentConfig::load(None, &overrides)?;
    let data = out.join("synthetic.csv");
    bench::cmd_synth(&cfg.synthetic, &data)?;

    let manifest = bench::cmd_run(&cfg, &data, &out.join("run"))?;
    print!("{}", bench::format_summary(&manifest));
    for name in &manifest.artifacts {
        println!("  {}", out.join("run").join(name).display());
    }
    Ok(())
}

//! Generates the noisy sinusoid, checks how often samples land inside the
//! analytic 95% bounds and writes the dataset to a CSV.
//!
//! cargo run --example synthetic_data -- [out.csv]

use dualaqd::data::{generate_synthetic, save_csv, SyntheticSpec};

fn main() -> dualaqd::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synthetic.csv".into());
    let spec = SyntheticSpec::default();
    let data = generate_synthetic(&spec)?;
    let bounds = data.ideal_bounds.as_ref().expect("synthetic data carries its bounds");

    let inside = (0..data.len())
        .filter(|&i| bounds.lower[i] < data.targets[i] && data.targets[i] < bounds.upper[i])
        .count();
    let widths: f64 = bounds.upper.iter().zip(&bounds.lower).map(|(u, l)| u - l).sum();
    println!("{} points on [{}, {}]", data.len(), spec.x_min, spec.x_max);
    println!("inside ideal bounds: {:.1}%", 100.0 * inside as f64 / data.len() as f64);
    println!("mean ideal width:    {:.3}", widths / data.len() as f64);

    save_csv(&data, std::path::Path::new(&out))?;
    println!("wrote {out}");
    Ok(())
}

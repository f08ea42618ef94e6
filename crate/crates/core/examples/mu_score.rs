//! Collapses width and coverage into one number per method. Widths are
//! normalized by the widest method before scoring, lower is better.
//!
//! cargo run --example mu_score

use dualaqd::metrics::{mu_curve, mu_scores};

fn main() {
    let rows = [("A", 43.45, 0.949), ("B", 50.17, 0.937), ("C", 73.09, 0.956), ("D", 47.18, 0.944)];
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.1, r.2)).collect();
    let widest = pairs.iter().map(|p| p.0).fold(0.0, f64::max);

    for ((name, w, p), mu) in rows.iter().zip(mu_scores(&pairs)) {
        println!("{name}: MPIW {w:>6.2}  PICP {p:.3}  mu {mu:.3}");
    }

    // how the score trades width against coverage as the weight moves
    let curve = mu_curve(rows[0].1, rows[0].2, widest, 5);
    for (o, v) in curve.omegas.iter().zip(&curve.mu_values) {
        println!("omega {o:.2}: {v:.3}");
    }
    println!("integral {:.3}", curve.mu_integral);
}

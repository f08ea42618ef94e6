//! Prediction intervals for neural-network regression.
//!
//! A point network `f` is trained on MSE; a second network `g`, initialized
//! from `f`'s hidden layers, learns lower and upper bounds with a loss that
//! trades interval width against a coverage penalty whose weight adapts every
//! epoch. Monte Carlo dropout averages both networks at inference. QD-Ens,
//! QD+ and MC-Dropout intervals are available as baselines.
//!
//! ```no_run
//! use dualaqd::data::{generate_synthetic, FoldScheme, SyntheticSpec};
//! use dualaqd::train::{cross_validate, TrainConfig};
//!
//! let data = generate_synthetic(&SyntheticSpec::default())?;
//! let cv = cross_validate(&data, &TrainConfig::default(), FoldScheme::RepeatedTwoFold { repeats: 5 })?;
//! println!("PICP {}  MPIW {}", cv.report.picp, cv.report.mpiw);
//! # Ok::<(), dualaqd::Error>(())
//! ```

pub mod bench;
pub mod data;
mod error;
pub mod inference;
pub mod metrics;
pub mod nn;
pub mod objectives;
pub mod train;

pub use error::{Error, Result};

/// Derives an independent 64-bit seed for job `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    seed ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}

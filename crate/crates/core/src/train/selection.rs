//! Dominance ordering over per-epoch validation snapshots.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// PICP values closer than this are treated as equal.
pub const PICP_TIE_TOLERANCE: f64 = 1e-9;

/// Validation performance of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub epoch: usize,
    pub picp_val: f64,
    /// Mean width in original target units.
    pub mpiw_val: f64,
}

impl SolutionRecord {
    pub fn new(epoch: usize, picp_val: f64, mpiw_val: f64) -> Self {
        SolutionRecord {
            epoch,
            picp_val,
            mpiw_val,
        }
    }
}

fn meets_target(r: &SolutionRecord, tau: f64) -> bool {
    r.picp_val >= (1.0 - tau) - PICP_TIE_TOLERANCE
}

/// True when `a` is strictly preferred over `b`.
///
/// Meeting the coverage target `1 - tau` comes first. Among solutions that
/// meet it the narrower one wins; among solutions that miss it the higher
/// coverage wins, with ties broken by width.
pub fn dominates(a: &SolutionRecord, b: &SolutionRecord, tau: f64) -> bool {
    match (meets_target(a, tau), meets_target(b, tau)) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.mpiw_val < b.mpiw_val,
        (false, false) => {
            if (a.picp_val - b.picp_val).abs() <= PICP_TIE_TOLERANCE {
                a.mpiw_val < b.mpiw_val
            } else {
                a.picp_val > b.picp_val
            }
        }
    }
}

/// The best record; the earliest one wins among equals.
pub fn select_solution(records: &[SolutionRecord], tau: f64) -> Result<SolutionRecord> {
    let (first, rest) = records
        .split_first()
        .ok_or_else(|| Error::Contract("select_solution needs at least one record".into()))?;
    Ok(rest
        .iter()
        .fold(*first, |best, r| if dominates(r, &best, tau) { *r } else { best }))
}

//! Fair-sampling losses: each detection is dropped independently of its
//! outcome.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{tags, RngStream};
use crate::trial::TrialRecord;

/// Per-arm detection probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyConfig {
    pub eta_a: f64,
    pub eta_b: f64,
}

impl EfficiencyConfig {
    pub fn new(eta_a: f64, eta_b: f64) -> Result<Self> {
        for (what, v) in [("eta_a", eta_a), ("eta_b", eta_b)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain { what, value: v, domain: "[0, 1]" });
            }
        }
        Ok(Self { eta_a, eta_b })
    }

    pub fn symmetric(eta: f64) -> Result<Self> {
        Self::new(eta, eta)
    }
}

/// Replaces each detected outcome by ∅ with probability 1 − η of its arm.
/// Draws are keyed by trial index, so the result does not depend on how
/// the log is split or ordered.
pub fn apply_detection(log: &[TrialRecord], cfg: &EfficiencyConfig, seed: u64) -> Vec<TrialRecord> {
    let stream = RngStream::new(seed, tags::DETECTION);
    crate::par::map_slice(log, |r| {
        let mut rng = stream.at(r.trial_index).rng();
        let (ua, ub): (f64, f64) = (rng.gen(), rng.gen());
        let mut out = r.clone();
        if ua >= cfg.eta_a {
            out.x = None;
        }
        if ub >= cfg.eta_b {
            out.y = None;
        }
        out
    })
}

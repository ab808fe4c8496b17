//! Trial generation: setting draws plus model samples, keyed by trial index.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::models::PreparedModel;
use crate::rng::{tags, RngStream};
use crate::trial::{CountsTable, TrialRecord};

/// How the settings of each trial are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingPolicy {
    /// Independent uniform draws per party.
    #[default]
    Uniform,
    /// Cycles through the k·l cells in row-major order. Gives equal counts
    /// per cell, but the settings are predictable.
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub policy: SettingPolicy,
    /// Keep hidden-state traces in the records.
    #[serde(default)]
    pub trace: bool,
}

impl SimConfig {
    pub fn new(n_trials: u64, seed: u64) -> Self {
        Self { n_trials, seed, policy: SettingPolicy::Uniform, trace: false }
    }

    pub fn with_policy(mut self, policy: SettingPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_trace(mut self, trace: bool) -> Self {
        self.trace = trace;
        self
    }
}

/// 1-based settings of trial `t`.
pub fn draw_settings(policy: SettingPolicy, k: usize, l: usize, seed: u64, t: u64) -> (usize, usize) {
    match policy {
        SettingPolicy::Uniform => {
            let mut rng = RngStream::new(seed, tags::SETTINGS).at(t).rng();
            (rng.gen_range(1..=k), rng.gen_range(1..=l))
        }
        SettingPolicy::RoundRobin => {
            let c = (t % (k * l) as u64) as usize;
            (c / l + 1, c % l + 1)
        }
    }
}

/// Trial `t` of a run.
pub fn simulate_one(model: &PreparedModel, cfg: &SimConfig, t: u64) -> TrialRecord {
    let (a, b) = draw_settings(cfg.policy, model.k(), model.l(), cfg.seed, t);
    let s = model.sample(a, b, &mut RngStream::new(cfg.seed, tags::MODEL).at(t).rng());
    let mut r = TrialRecord::new(t, a, b, s.x, s.y);
    if cfg.trace {
        r.hidden = s.hidden;
    }
    r
}

/// The full log of a run, in trial order.
pub fn simulate(model: &PreparedModel, cfg: &SimConfig) -> Vec<TrialRecord> {
    crate::par::map_indexed(cfg.n_trials, |t| simulate_one(model, cfg, t))
}

/// Tallies a run without materializing the log.
pub fn simulate_counts(model: &PreparedModel, cfg: &SimConfig) -> CountsTable {
    let (k, l) = (model.k(), model.l());
    crate::par::fold_indexed(
        cfg.n_trials,
        || CountsTable::zeros(k, l),
        |mut acc, t| {
            acc.add_unchecked(&simulate_one(model, cfg, t));
            acc
        },
        |a, b| a.merge(&b).expect("shards share one grid"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{chsh_optimal_settings, ModelKind, ModelSpec};
    use crate::trial::tally_slice;

    fn singlet() -> PreparedModel {
        let (a, b) = chsh_optimal_settings();
        ModelSpec::new(ModelKind::Singlet, a, b).unwrap().prepare().unwrap()
    }

    #[test]
    fn deterministic_and_order_free() {
        let m = singlet();
        let cfg = SimConfig::new(5000, 11);
        let log = simulate(&m, &cfg);
        assert_eq!(log, simulate(&m, &cfg));
        let rev: Vec<_> = (0..5000).rev().map(|t| simulate_one(&m, &cfg, t)).collect();
        assert_eq!(log, rev.into_iter().rev().collect::<Vec<_>>());
        assert_eq!(simulate_counts(&m, &cfg), tally_slice(&log, 2, 2).unwrap());
    }

    #[test]
    fn round_robin_balances_cells() {
        let m = singlet();
        let c = simulate_counts(&m, &SimConfig::new(4000, 1).with_policy(SettingPolicy::RoundRobin));
        for i in 1..=2 {
            for j in 1..=2 {
                assert_eq!(c.cell(i, j).emitted, 1000);
            }
        }
    }

    #[test]
    fn uniform_settings_cover_grid() {
        let mut seen = [[0u32; 3]; 3];
        for t in 0..3000 {
            let (a, b) = draw_settings(SettingPolicy::Uniform, 3, 3, 2, t);
            seen[a - 1][b - 1] += 1;
        }
        assert!(seen.iter().flatten().all(|&n| n > 250));
    }
}

//! Local strategies with memory of earlier trials.
//!
//! Before each trial a strategy fixes both response tables from what is
//! already in the past: earlier settings and outcomes of both stations
//! (which could have been exchanged at light speed between trials) and
//! fresh shared randomness. The current settings are drawn afterwards, so
//! a plan can never depend on them.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{LocalPlan, Strategy};
use crate::rng::{tags, RngStream};
use crate::sim::{draw_settings, SettingPolicy};
use crate::stats::ChshSelection;
use crate::trial::{Outcome, TrialRecord};

/// Information a strategy declares it uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Input {
    SharedRandomness,
    PastSettings,
    PastOutcomes,
    /// The other station's setting in the current trial. Never allowed.
    OtherCurrentSetting,
}

pub trait MemoryStrategy: Send {
    fn name(&self) -> String;

    fn inputs(&self) -> Vec<Input>;

    /// Response tables for the next trial, given all earlier trials.
    fn plan(&mut self, past: &[TrialRecord], shared: &mut ChaCha8Rng, k: usize, l: usize) -> LocalPlan;
}

/// A memoryless strategy; behaves exactly like the corresponding
/// automaton model.
pub struct Memoryless(pub Strategy);

impl MemoryStrategy for Memoryless {
    fn name(&self) -> String {
        format!("memoryless:{}", self.0)
    }

    fn inputs(&self) -> Vec<Input> {
        vec![Input::SharedRandomness]
    }

    fn plan(&mut self, _past: &[TrialRecord], shared: &mut ChaCha8Rng, k: usize, l: usize) -> LocalPlan {
        self.0.draw(shared, k, l)
    }
}

/// Tables that win every cell of `sel` except cell `lose`, the two of
/// them related by a global flip. Other keys answer +1.
fn losing_only_at(sel: &ChshSelection, lose: usize, k: usize, l: usize) -> [LocalPlan; 2] {
    let mut found = Vec::with_capacity(2);
    for bits in 0u8..16 {
        let v: [i8; 4] = std::array::from_fn(|b| if bits >> (3 - b) & 1 == 0 { 1 } else { -1 });
        // v = (x_p, x_r, y_q, y_s)
        let prods = [v[0] * v[2], v[0] * v[3], v[1] * v[2], v[1] * v[3]];
        let wins: Vec<bool> = (0..4).map(|m| prods[m] * sel.signs[m] == 1).collect();
        if (0..4).all(|m| wins[m] == (m != lose)) {
            let mut p = LocalPlan::constant(k, l, Outcome::Plus);
            p.alice[sel.p - 1] = Outcome::from_sign(v[0] > 0);
            p.alice[sel.r - 1] = Outcome::from_sign(v[1] > 0);
            p.bob[sel.q - 1] = Outcome::from_sign(v[2] > 0);
            p.bob[sel.s - 1] = Outcome::from_sign(v[3] > 0);
            found.push(p);
        }
    }
    let b = found.pop().expect("two tables lose at exactly one cell");
    let a = found.pop().expect("two tables lose at exactly one cell");
    [a, b]
}

/// Outcome-feedback exploiter. Every trial it sacrifices the cell that has
/// been played most often so far. Losses then pile up in the fullest cells,
/// where each costs the least in the per-cell ratio estimates, so the
/// naive CHSH estimate drifts above 2 although every trial is won with
/// probability exactly 3/4.
pub struct CountSteering {
    sel: ChshSelection,
    counts: [u64; 4],
    seen: usize,
}

impl CountSteering {
    pub fn new(sel: ChshSelection) -> Self {
        Self { sel, counts: [0; 4], seen: 0 }
    }
}

impl MemoryStrategy for CountSteering {
    fn name(&self) -> String {
        "count-steering".into()
    }

    fn inputs(&self) -> Vec<Input> {
        vec![Input::SharedRandomness, Input::PastSettings, Input::PastOutcomes]
    }

    fn plan(&mut self, past: &[TrialRecord], shared: &mut ChaCha8Rng, k: usize, l: usize) -> LocalPlan {
        for r in &past[self.seen.min(past.len())..] {
            if r.product().is_some() {
                if let Some(m) = self.sel.cells().iter().position(|&c| c == (r.a, r.b)) {
                    self.counts[m] += 1;
                }
            }
        }
        self.seen = past.len();
        let top = *self.counts.iter().max().unwrap();
        let ties: Vec<usize> = (0..4).filter(|&m| self.counts[m] == top).collect();
        let lose = ties[shared.gen_range(0..ties.len())];
        losing_only_at(&self.sel, lose, k, l)[shared.gen_range(0..2)].clone()
    }
}

/// Settings-pattern exploiter. If the recent settings repeat with some
/// period up to 16, it predicts the next pair and sacrifices a different
/// cell; otherwise it sacrifices a uniformly random cell.
pub struct SettingsPattern {
    sel: ChshSelection,
}

impl SettingsPattern {
    pub fn new(sel: ChshSelection) -> Self {
        Self { sel }
    }

    fn predict(past: &[TrialRecord]) -> Option<(usize, usize)> {
        const MAX_PERIOD: usize = 16;
        const CHECK: usize = 64;
        if past.len() < CHECK {
            return None;
        }
        let tail = &past[past.len() - CHECK..];
        (1..=MAX_PERIOD)
            .find(|&p| (p..CHECK).all(|i| (tail[i].a, tail[i].b) == (tail[i - p].a, tail[i - p].b)))
            .map(|p| (tail[CHECK - p].a, tail[CHECK - p].b))
    }
}

impl MemoryStrategy for SettingsPattern {
    fn name(&self) -> String {
        "settings-pattern".into()
    }

    fn inputs(&self) -> Vec<Input> {
        vec![Input::SharedRandomness, Input::PastSettings]
    }

    fn plan(&mut self, past: &[TrialRecord], shared: &mut ChaCha8Rng, k: usize, l: usize) -> LocalPlan {
        let target = Self::predict(past).and_then(|(a, b)| self.sel.cells().iter().position(|&c| c == (a, b)));
        let lose = match target {
            Some(m) => (m + 1 + shared.gen_range(0..3)) % 4,
            None => shared.gen_range(0..4),
        };
        losing_only_at(&self.sel, lose, k, l)[shared.gen_range(0..2)].clone()
    }
}

/// A strategy wrapped for sequential simulation.
pub struct MemoryAutomaton {
    strategy: Box<dyn MemoryStrategy>,
    k: usize,
    l: usize,
}

/// Admits a strategy after checking its declared inputs.
pub fn memory_adversary(strategy: Box<dyn MemoryStrategy>, k: usize, l: usize) -> Result<MemoryAutomaton> {
    if strategy.inputs().contains(&Input::OtherCurrentSetting) {
        return Err(Error::NonLocal(format!("{} reads the other station's current setting", strategy.name())));
    }
    if k == 0 || l == 0 {
        return Err(Error::InvalidModel("empty setting grid".into()));
    }
    Ok(MemoryAutomaton { strategy, k, l })
}

impl MemoryAutomaton {
    pub fn name(&self) -> String {
        self.strategy.name()
    }

    /// Runs `n` trials in order. Shared randomness and settings come from
    /// the same streams as [`crate::sim::simulate`], so a memoryless
    /// strategy reproduces the automaton model's log exactly.
    pub fn run(&mut self, n: u64, seed: u64, policy: SettingPolicy) -> Result<Vec<TrialRecord>> {
        let model = RngStream::new(seed, tags::MODEL);
        let mut log: Vec<TrialRecord> = Vec::with_capacity(n as usize);
        for t in 0..n {
            let plan = self.strategy.plan(&log, &mut model.at(t).rng(), self.k, self.l);
            if plan.alice.len() != self.k || plan.bob.len() != self.l {
                return Err(Error::Protocol { trial: t, detail: "plan does not cover the setting grid".into() });
            }
            let (a, b) = draw_settings(policy, self.k, self.l, seed, t);
            log.push(TrialRecord::new(t, a, b, Some(plan.alice[a - 1]), Some(plan.bob[b - 1])));
        }
        Ok(log)
    }
}

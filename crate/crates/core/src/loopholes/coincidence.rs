//! Pairing of one-sided, timestamped detections into trials.

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{tags, RngStream};
use crate::trial::{Outcome, TrialRecord};

/// One detection at one station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub setting: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// Events pair when `floor(t / window)` agrees.
    FixedSlots,
    /// Greedy earliest pairing of events at most `window` apart.
    MovingWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceConfig {
    pub window: f64,
    pub pairing: Pairing,
}

impl CoincidenceConfig {
    pub fn new(window: f64, pairing: Pairing) -> Result<Self> {
        if !(window > 0.0) || !window.is_finite() {
            return Err(Error::Domain { what: "window", value: window, domain: "> 0" });
        }
        Ok(Self { window, pairing })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceResult {
    pub log: Vec<TrialRecord>,
    /// Pairings made while another candidate was also in reach.
    pub ambiguous: u64,
    pub unpaired_a: u64,
    pub unpaired_b: u64,
}

fn check_sorted(events: &[Event], side: &str) -> Result<()> {
    if let Some(i) = events.windows(2).position(|w| w[1].t < w[0].t) {
        return Err(Error::InvalidModel(format!("{side} timestamps decrease at event {}", i + 1)));
    }
    Ok(())
}

fn record(idx: u64, a: &Event, b: &Event) -> TrialRecord {
    let mut r = TrialRecord::new(idx, a.setting, b.setting, Some(a.outcome), Some(b.outcome));
    r.t_a = Some(a.t);
    r.t_b = Some(b.t);
    r
}

/// Pairs two nondecreasing event streams using timestamps only.
pub fn apply_coincidence(stream_a: &[Event], stream_b: &[Event], cfg: &CoincidenceConfig) -> Result<CoincidenceResult> {
    check_sorted(stream_a, "alice")?;
    check_sorted(stream_b, "bob")?;
    let w = cfg.window;
    let mut out = CoincidenceResult { log: Vec::new(), ambiguous: 0, unpaired_a: 0, unpaired_b: 0 };
    let (mut i, mut j) = (0, 0);
    match cfg.pairing {
        Pairing::FixedSlots => {
            let slot = |e: &Event| (e.t / w).floor() as i64;
            while i < stream_a.len() && j < stream_b.len() {
                let (sa, sb) = (slot(&stream_a[i]), slot(&stream_b[j]));
                if sa < sb {
                    out.unpaired_a += 1;
                    i += 1;
                } else if sb < sa {
                    out.unpaired_b += 1;
                    j += 1;
                } else {
                    out.log.push(record(out.log.len() as u64, &stream_a[i], &stream_b[j]));
                    i += 1;
                    j += 1;
                    // Extra events in the same slot cannot be assigned.
                    while i < stream_a.len() && slot(&stream_a[i]) == sa {
                        out.ambiguous += 1;
                        out.unpaired_a += 1;
                        i += 1;
                    }
                    while j < stream_b.len() && slot(&stream_b[j]) == sa {
                        out.ambiguous += 1;
                        out.unpaired_b += 1;
                        j += 1;
                    }
                }
            }
        }
        Pairing::MovingWindow => {
            while i < stream_a.len() && j < stream_b.len() {
                let (a, b) = (&stream_a[i], &stream_b[j]);
                let d = b.t - a.t;
                if d > w {
                    out.unpaired_a += 1;
                    i += 1;
                } else if d < -w {
                    out.unpaired_b += 1;
                    j += 1;
                } else {
                    let rival_b = stream_b.get(j + 1).is_some_and(|n| (n.t - a.t).abs() <= w);
                    let rival_a = stream_a.get(i + 1).is_some_and(|n| (n.t - b.t).abs() <= w);
                    if rival_a || rival_b {
                        out.ambiguous += 1;
                    }
                    out.log.push(record(out.log.len() as u64, a, b));
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    out.unpaired_a += (stream_a.len() - i) as u64;
    out.unpaired_b += (stream_b.len() - j) as u64;
    Ok(out)
}

/// Turns a log into two event streams: trial `t` is emitted at
/// `t · period`, and each detection arrives after an independent
/// exponential delay with mean `jitter_mean` (zero means no delay).
/// Streams are returned sorted by arrival time.
pub fn emit_events(log: &[TrialRecord], period: f64, jitter_mean: f64, seed: u64) -> Result<(Vec<Event>, Vec<Event>)> {
    if !(period > 0.0) {
        return Err(Error::Domain { what: "period", value: period, domain: "> 0" });
    }
    if !(jitter_mean >= 0.0) {
        return Err(Error::Domain { what: "jitter mean", value: jitter_mean, domain: ">= 0" });
    }
    let exp = (jitter_mean > 0.0).then(|| Exp::new(1.0 / jitter_mean).expect("positive rate"));
    let stream = RngStream::new(seed, tags::JITTER);
    let (mut ea, mut eb) = (Vec::new(), Vec::new());
    for r in log {
        let mut rng = stream.at(r.trial_index).rng();
        let mut delay = || exp.map_or(0.0, |d| d.sample(&mut rng));
        let t0 = r.trial_index as f64 * period;
        let (da, db) = (delay(), delay());
        if let Some(x) = r.x {
            ea.push(Event { t: t0 + da, setting: r.a, outcome: x });
        }
        if let Some(y) = r.y {
            eb.push(Event { t: t0 + db, setting: r.b, outcome: y });
        }
    }
    ea.sort_by(|p, q| p.t.total_cmp(&q.t));
    eb.sort_by(|p, q| p.t.total_cmp(&q.t));
    Ok((ea, eb))
}

//! Two-party CHSH challenge with locality enforced by message passing.
//!
//! A referee thread and two party threads talk only over channels. Per
//! trial the referee sends both parties the same SHARE payload, then each
//! party its own SETTING, waits for both ANSWERs and finally sends both a
//! VERDICT revealing the finished trial. A party therefore never holds the
//! other party's current setting while it answers.

mod zoo;

use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

pub use zoo::{party_from_id, strategy_zoo, PartyIds, ZooEntry, PARTY_IDS};

use crate::error::{Error, Result};
use crate::rng::{tags, RngStream};
use crate::stats::{chsh_statistic, martingale_pvalue, ChshSelection, TestReport};
use crate::trial::{correlations, tally_slice, Outcome, Party, TrialRecord};

/// Bytes in each SHARE payload.
pub const SHARE_BYTES: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Message {
    Share {
        trial: u64,
        party: Party,
        payload: Vec<u8>,
    },
    Setting {
        trial: u64,
        party: Party,
        setting: usize,
        /// The other party's setting. Only ever set in cheat mode.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        leak: Option<usize>,
    },
    Answer {
        trial: u64,
        party: Party,
        outcome: Outcome,
    },
    Verdict {
        trial: u64,
        party: Party,
        record: TrialRecord,
    },
}

impl Message {
    pub fn trial(&self) -> u64 {
        match self {
            Message::Share { trial, .. }
            | Message::Setting { trial, .. }
            | Message::Answer { trial, .. }
            | Message::Verdict { trial, .. } => *trial,
        }
    }

    pub fn party(&self) -> Party {
        match self {
            Message::Share { party, .. }
            | Message::Setting { party, .. }
            | Message::Answer { party, .. }
            | Message::Verdict { party, .. } => *party,
        }
    }
}

/// One side of the challenge.
pub trait PartyAutomaton: Send {
    fn name(&self) -> String;

    /// Receives the trial's shared payload before any setting exists.
    fn init(&mut self, trial: u64, shared: &[u8]);

    /// Answers the party's own setting. `leaked` is the other party's
    /// setting and is `None` unless the referee runs in cheat mode.
    fn respond(&mut self, setting: usize, leaked: Option<usize>) -> Outcome;

    /// Sees the finished trial after both answers are in.
    fn learn(&mut self, _record: &TrialRecord) {}
}

/// Deliberate referee misbehaviour, for testing the protocol checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fault {
    /// Send SETTING before SHARE at the given trial.
    SettingBeforeShare { trial: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefereeConfig {
    pub n_trials: u64,
    pub seed: u64,
    pub sel: ChshSelection,
    /// Keep every message in memory for the transcript.
    #[serde(default)]
    pub keep_transcript: bool,
    /// Leak each party the other's setting. Breaks locality on purpose;
    /// only for showing that the harness can tell the difference.
    #[serde(default)]
    pub cheat: bool,
    #[serde(default)]
    pub fault: Option<Fault>,
}

impl RefereeConfig {
    pub fn new(n_trials: u64, seed: u64) -> Self {
        Self { n_trials, seed, sel: ChshSelection::standard(), keep_transcript: false, cheat: false, fault: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeResult {
    /// Ratio-estimator CHSH value over coincidences, when all four cells
    /// were played.
    pub chsh: Option<f64>,
    pub report: TestReport,
    pub log: Vec<TrialRecord>,
    pub transcript: Vec<Message>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Share,
    Setting,
    Verdict,
}

fn violation(trial: u64, detail: impl Into<String>) -> Error {
    Error::Protocol { trial, detail: detail.into() }
}

fn party_loop(role: Party, mut auto: Box<dyn PartyAutomaton>, rx: Receiver<Message>, tx: Sender<Result<Message>>) {
    let mut phase = Phase::Share;
    let mut next = 0u64;
    for msg in rx {
        let t = msg.trial();
        if msg.party() != role || t != next {
            let _ =
                tx.send(Err(violation(t, format!("{role:?} got a message addressed to {:?}/trial {t}", msg.party()))));
            return;
        }
        match (phase, msg) {
            (Phase::Share, Message::Share { payload, .. }) => {
                auto.init(t, &payload);
                phase = Phase::Setting;
            }
            (Phase::Setting, Message::Setting { setting, leak, .. }) => {
                let outcome = auto.respond(setting, leak);
                if tx.send(Ok(Message::Answer { trial: t, party: role, outcome })).is_err() {
                    return;
                }
                phase = Phase::Verdict;
            }
            (Phase::Verdict, Message::Verdict { record, .. }) => {
                auto.learn(&record);
                phase = Phase::Share;
                next += 1;
            }
            (_, m) => {
                let kind = serde_json::to_value(&m)
                    .ok()
                    .and_then(|v| v["kind"].as_str().map(String::from))
                    .unwrap_or_default();
                let _ = tx.send(Err(violation(t, format!("{role:?} received {kind} out of order"))));
                return;
            }
        }
    }
}

/// Plays `cfg.n_trials` rounds between two automata on separate threads.
/// Settings are uniform and independent over the selection's keys.
pub fn run_challenge(
    alice: Box<dyn PartyAutomaton>,
    bob: Box<dyn PartyAutomaton>,
    cfg: &RefereeConfig,
) -> Result<ChallengeResult> {
    let sel = cfg.sel;
    let (to_a, rx_a) = channel::<Message>();
    let (to_b, rx_b) = channel::<Message>();
    let (reply_tx, replies) = channel::<Result<Message>>();
    let ra = reply_tx.clone();
    let ha = thread::spawn(move || party_loop(Party::Alice, alice, rx_a, ra));
    let hb = thread::spawn(move || party_loop(Party::Bob, bob, rx_b, reply_tx));

    let mut transcript = Vec::new();
    let mut log = Vec::with_capacity(cfg.n_trials as usize);
    let source = RngStream::new(cfg.seed, tags::SOURCE);
    let referee = RngStream::new(cfg.seed, tags::REFEREE);
    let outcome = (|| -> Result<()> {
        for t in 0..cfg.n_trials {
            let mut send = |m: Message| -> Result<()> {
                let ch = if m.party() == Party::Alice { &to_a } else { &to_b };
                if cfg.keep_transcript {
                    transcript.push(m.clone());
                }
                ch.send(m).map_err(|_| violation(t, "party hung up"))
            };
            let mut payload = vec![0u8; SHARE_BYTES];
            source.at(t).rng().fill_bytes(&mut payload);
            let mut rng = referee.at(t).rng();
            let a = if rng.gen::<bool>() { sel.p } else { sel.r };
            let b = if rng.gen::<bool>() { sel.q } else { sel.s };
            let leak = |v: usize| cfg.cheat.then_some(v);
            let shares =
                [Party::Alice, Party::Bob].map(|party| Message::Share { trial: t, party, payload: payload.clone() });
            let settings = [
                Message::Setting { trial: t, party: Party::Alice, setting: a, leak: leak(b) },
                Message::Setting { trial: t, party: Party::Bob, setting: b, leak: leak(a) },
            ];
            if cfg.fault == Some(Fault::SettingBeforeShare { trial: t }) {
                settings.into_iter().chain(shares).try_for_each(&mut send)?;
            } else {
                shares.into_iter().chain(settings).try_for_each(&mut send)?;
            }
            let mut answers: [Option<Outcome>; 2] = [None, None];
            for _ in 0..2 {
                let m = replies.recv().map_err(|_| violation(t, "party hung up"))??;
                match m {
                    Message::Answer { trial, party, outcome } if trial == t => {
                        let slot = &mut answers[usize::from(party == Party::Bob)];
                        if slot.replace(outcome).is_some() {
                            return Err(violation(t, format!("{party:?} answered twice")));
                        }
                        if cfg.keep_transcript {
                            transcript.push(Message::Answer { trial, party, outcome });
                        }
                    }
                    other => return Err(violation(t, format!("unexpected reply {other:?}"))),
                }
            }
            let record = TrialRecord::new(t, a, b, answers[0], answers[1]);
            for party in [Party::Alice, Party::Bob] {
                let m = Message::Verdict { trial: t, party, record: record.clone() };
                let ch = if party == Party::Alice { &to_a } else { &to_b };
                if cfg.keep_transcript {
                    transcript.push(m.clone());
                }
                ch.send(m).map_err(|_| violation(t, "party hung up"))?;
            }
            log.push(record);
        }
        Ok(())
    })();
    drop(to_a);
    drop(to_b);
    let joined = [ha.join(), hb.join()];
    outcome?;
    if joined.iter().any(|j| j.is_err()) {
        return Err(violation(cfg.n_trials, "party thread panicked"));
    }
    let k = sel.p.max(sel.r);
    let l = sel.q.max(sel.s);
    let chsh = chsh_statistic(&correlations(&tally_slice(&log, k, l)?), &sel).ok();
    let report = martingale_pvalue(&log, &sel)?;
    Ok(ChallengeResult { chsh, report, log, transcript })
}

/// Checks a transcript for locality: per party and trial the messages run
/// SHARE, SETTING, ANSWER, VERDICT; no SETTING carries the other party's
/// setting; and no VERDICT (the first moment a party may learn the other
/// setting) precedes both answers of its trial.
pub fn audit_transcript(transcript: &[Message]) -> Result<()> {
    use std::collections::HashMap;
    let mut phase: HashMap<(u64, Party), u8> = HashMap::new();
    let mut answered: HashMap<u64, u8> = HashMap::new();
    for m in transcript {
        let (t, p) = (m.trial(), m.party());
        let step = phase.entry((t, p)).or_insert(0);
        let want = match m {
            Message::Share { .. } => 0,
            Message::Setting { leak, .. } => {
                if leak.is_some() {
                    return Err(violation(t, format!("{p:?} was sent the other party's setting")));
                }
                1
            }
            Message::Answer { .. } => {
                *answered.entry(t).or_insert(0) += 1;
                2
            }
            Message::Verdict { .. } => {
                if answered.get(&t).copied().unwrap_or(0) < 2 {
                    return Err(violation(t, "verdict before both answers"));
                }
                3
            }
        };
        if *step != want {
            return Err(violation(t, format!("{p:?} message out of order")));
        }
        *step += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_answers_give_two() {
        let (a, b) =
            (party_from_id("constant:+", Party::Alice).unwrap(), party_from_id("constant:+", Party::Bob).unwrap());
        let mut cfg = RefereeConfig::new(2000, 1);
        cfg.keep_transcript = true;
        let r = run_challenge(a, b, &cfg).unwrap();
        assert_eq!(r.chsh, Some(2.0));
        assert_eq!(r.report.p_value, 1.0);
        assert_eq!(r.transcript.len(), 2000 * 8);
        audit_transcript(&r.transcript).unwrap();
    }

    #[test]
    fn cheat_mode_reaches_tsirelson() {
        let mut cfg = RefereeConfig::new(40_000, 2);
        cfg.cheat = true;
        cfg.keep_transcript = true;
        let r = run_challenge(
            party_from_id("quantum-cheat", Party::Alice).unwrap(),
            party_from_id("quantum-cheat", Party::Bob).unwrap(),
            &cfg,
        )
        .unwrap();
        let s = r.chsh.unwrap();
        // Four cells of ~10⁴ trials: σ ≈ √(4 · 0.5 / 10⁴).
        assert!((s - 2.0 * 2f64.sqrt()).abs() < 3.0 * (2.0f64 / 1e4).sqrt(), "{s}");
        assert!(r.report.p_value < 1e-10);
        assert!(audit_transcript(&r.transcript).is_err());
    }

    #[test]
    fn honest_cheat_strategy_is_local() {
        let r = run_challenge(
            party_from_id("quantum-cheat", Party::Alice).unwrap(),
            party_from_id("quantum-cheat", Party::Bob).unwrap(),
            &RefereeConfig::new(10_000, 3),
        )
        .unwrap();
        assert!(r.report.p_value > 1e-3);
    }

    #[test]
    fn misordered_referee_is_caught() {
        let mut cfg = RefereeConfig::new(100, 4);
        cfg.fault = Some(Fault::SettingBeforeShare { trial: 17 });
        let err = run_challenge(
            party_from_id("shared-bits", Party::Alice).unwrap(),
            party_from_id("shared-bits", Party::Bob).unwrap(),
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Protocol { trial: 17, .. }), "{err}");
    }

    #[test]
    fn audit_flags_reordering() {
        let mut cfg = RefereeConfig::new(5, 5);
        cfg.keep_transcript = true;
        let r = run_challenge(
            party_from_id("sign-lhv", Party::Alice).unwrap(),
            party_from_id("sign-lhv", Party::Bob).unwrap(),
            &cfg,
        )
        .unwrap();
        let mut t = r.transcript.clone();
        t.swap(0, 2);
        assert!(audit_transcript(&t).is_err());
        let json: Vec<String> = r.transcript.iter().map(|m| serde_json::to_string(m).unwrap()).collect();
        assert!(json[0].starts_with(r#"{"kind":"SHARE","trial":0,"party":"Alice""#), "{}", json[0]);
    }

    #[test]
    fn replay_is_deterministic() {
        let run = || {
            run_challenge(
                party_from_id("memory:count-steering", Party::Alice).unwrap(),
                party_from_id("memory:count-steering", Party::Bob).unwrap(),
                &RefereeConfig::new(500, 9),
            )
            .unwrap()
            .log
        };
        assert_eq!(run(), run());
    }
}

//! Memoryless local strategies: per trial, a shared hidden draw fixes a
//! response table for each party before any setting is known.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trial::Outcome;

/// Response tables for one trial: `alice[i-1]` is Alice's answer to key `a_i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LocalPlan {
    pub alice: Vec<Outcome>,
    pub bob: Vec<Outcome>,
}

impl LocalPlan {
    pub fn constant(k: usize, l: usize, o: Outcome) -> Self {
        Self { alice: vec![o; k], bob: vec![o; l] }
    }
}

/// The eight deterministic 2 × 2 strategies that reach S = 2 on
/// `E11 + E12 + E21 − E22`, as (x1, x2, y1, y2).
pub fn chsh_optimal_tables() -> Vec<[i8; 4]> {
    let mut out = Vec::new();
    for bits in 0u8..16 {
        let v: [i8; 4] = std::array::from_fn(|b| if bits >> (3 - b) & 1 == 0 { 1 } else { -1 });
        let s = v[0] * v[2] + v[0] * v[3] + v[1] * v[2] - v[1] * v[3];
        if s == 2 {
            out.push(v);
        }
    }
    out
}

/// A named memoryless strategy. Textual ids:
/// `det:<alice>/<bob>` with one `+`/`-` per key (e.g. `det:+-/++`),
/// `shared-coins`, `chsh-optimal`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    /// Fixed tables, no hidden randomness.
    Deterministic { alice: Vec<Outcome>, bob: Vec<Outcome> },
    /// Every answer is an independent fair coin, shared between the parties
    /// only through the draw itself.
    SharedCoins,
    /// Uniform mixture of the eight deterministic CHSH-optimal tables on keys
    /// 1 and 2; higher keys answer +1.
    ChshOptimal,
}

fn parse_signs(s: &str) -> Result<Vec<Outcome>> {
    s.chars()
        .map(|c| match c {
            '+' => Ok(Outcome::Plus),
            '-' => Ok(Outcome::Minus),
            other => Err(Error::InvalidModel(format!("bad sign '{other}' in strategy table"))),
        })
        .collect()
}

fn signs(v: &[Outcome]) -> String {
    v.iter().map(|o| if *o == Outcome::Plus { '+' } else { '-' }).collect()
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared-coins" => Ok(Strategy::SharedCoins),
            "chsh-optimal" => Ok(Strategy::ChshOptimal),
            _ => {
                let body =
                    s.strip_prefix("det:").ok_or_else(|| Error::InvalidModel(format!("unknown strategy '{s}'")))?;
                let (a, b) = body
                    .split_once('/')
                    .ok_or_else(|| Error::InvalidModel(format!("strategy '{s}' needs alice/bob tables")))?;
                let (alice, bob) = (parse_signs(a)?, parse_signs(b)?);
                if alice.is_empty() || bob.is_empty() {
                    return Err(Error::InvalidModel(format!("strategy '{s}' has an empty table")));
                }
                Ok(Strategy::Deterministic { alice, bob })
            }
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Deterministic { alice, bob } => write!(f, "det:{}/{}", signs(alice), signs(bob)),
            Strategy::SharedCoins => f.write_str("shared-coins"),
            Strategy::ChshOptimal => f.write_str("chsh-optimal"),
        }
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.to_string()
    }
}

impl Strategy {
    pub fn check_grid(&self, k: usize, l: usize) -> Result<()> {
        if let Strategy::Deterministic { alice, bob } = self {
            if alice.len() != k || bob.len() != l {
                return Err(Error::InvalidModel(format!(
                    "strategy tables are {}x{}, grid is {k}x{l}",
                    alice.len(),
                    bob.len()
                )));
            }
        }
        Ok(())
    }

    /// Draws this trial's response tables.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, k: usize, l: usize) -> LocalPlan {
        match self {
            Strategy::Deterministic { alice, bob } => LocalPlan { alice: alice.clone(), bob: bob.clone() },
            Strategy::SharedCoins => LocalPlan {
                alice: (0..k).map(|_| Outcome::from_sign(rng.gen())).collect(),
                bob: (0..l).map(|_| Outcome::from_sign(rng.gen())).collect(),
            },
            Strategy::ChshOptimal => {
                let tables = chsh_optimal_tables();
                let t = tables[rng.gen_range(0..tables.len())];
                plan_from_quad(t, k, l)
            }
        }
    }

    /// The exact law of the response tables, when it is small enough to list.
    pub fn support(&self, k: usize, l: usize) -> Option<Vec<(f64, LocalPlan)>> {
        match self {
            Strategy::Deterministic { alice, bob } => {
                Some(vec![(1.0, LocalPlan { alice: alice.clone(), bob: bob.clone() })])
            }
            Strategy::SharedCoins => {
                let bits = k + l;
                if bits > 16 {
                    return None;
                }
                let w = 1.0 / (1u64 << bits) as f64;
                Some(
                    (0u32..1 << bits)
                        .map(|m| {
                            let o = |b: usize| Outcome::from_sign(m >> b & 1 == 0);
                            (w, LocalPlan { alice: (0..k).map(o).collect(), bob: (k..k + l).map(o).collect() })
                        })
                        .collect(),
                )
            }
            Strategy::ChshOptimal => {
                let tables = chsh_optimal_tables();
                let w = 1.0 / tables.len() as f64;
                Some(tables.into_iter().map(|t| (w, plan_from_quad(t, k, l))).collect())
            }
        }
    }

    /// Exact E(XY | a_i, b_j).
    pub fn correlation(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        match self.support(k, l) {
            Some(s) => s.iter().map(|(w, p)| w * f64::from(p.alice[i - 1].value() * p.bob[j - 1].value())).sum(),
            // Independent shared coins are uncorrelated.
            None => 0.0,
        }
    }
}

fn plan_from_quad(t: [i8; 4], k: usize, l: usize) -> LocalPlan {
    let mut plan = LocalPlan::constant(k, l, Outcome::Plus);
    let o = |v: i8| Outcome::from_sign(v > 0);
    if k >= 1 {
        plan.alice[0] = o(t[0]);
    }
    if k >= 2 {
        plan.alice[1] = o(t[1]);
    }
    if l >= 1 {
        plan.bob[0] = o(t[2]);
    }
    if l >= 2 {
        plan.bob[1] = o(t[3]);
    }
    plan
}

/// All 2^k response tables for one party.
pub fn all_tables(k: usize) -> Vec<Vec<Outcome>> {
    (0u32..1 << k).map(|m| (0..k).map(|b| Outcome::from_sign(m >> (k - 1 - b) & 1 == 0)).collect()).collect()
}

//! Party automata for the challenge, addressed by textual ids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PartyAutomaton;
use crate::direction::{angle_between, sample_direction, Direction};
use crate::error::{Error, Result};
use crate::loopholes::{CountSteering, MemoryStrategy, Memoryless, SettingsPattern};
use crate::models::{all_tables, chsh_optimal_settings, chsh_optimal_tables, LocalPlan, Strategy};
use crate::stats::ChshSelection;
use crate::trial::{Outcome, Party, TrialRecord};

/// Party ids accepted by [`party_from_id`]. `table:` takes one sign per
/// key, e.g. `table:+-`.
pub const PARTY_IDS: [&str; 13] = [
    "constant:+",
    "constant:-",
    "table:<signs>",
    "mix:<hex mask>",
    "sign-lhv:<degrees>",
    "shared-bits",
    "independent-bits",
    "optimal-mix",
    "sign-lhv",
    "memory:count-steering",
    "memory:settings-pattern",
    "memory:optimal-mix",
    "quantum-cheat",
];

fn shared_rng(payload: &[u8]) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    let n = payload.len().min(32);
    seed[..n].copy_from_slice(&payload[..n]);
    ChaCha8Rng::from_seed(seed)
}

fn sign(v: bool) -> Outcome {
    Outcome::from_sign(v)
}

struct Table(Vec<Outcome>);

impl PartyAutomaton for Table {
    fn name(&self) -> String {
        format!("table:{}", self.0.iter().map(|o| if *o == Outcome::Plus { '+' } else { '-' }).collect::<String>())
    }
    fn init(&mut self, _: u64, _: &[u8]) {}
    fn respond(&mut self, setting: usize, _: Option<usize>) -> Outcome {
        self.0.get(setting - 1).copied().unwrap_or(Outcome::Plus)
    }
}

/// Answers bit `setting − 1` of a payload byte; both parties read the same
/// byte unless `independent`.
struct Bits {
    role: Party,
    independent: bool,
    byte: u8,
}

impl PartyAutomaton for Bits {
    fn name(&self) -> String {
        if self.independent { "independent-bits" } else { "shared-bits" }.into()
    }
    fn init(&mut self, _: u64, shared: &[u8]) {
        let i = usize::from(self.independent && self.role == Party::Bob);
        self.byte = shared[i];
    }
    fn respond(&mut self, setting: usize, _: Option<usize>) -> Outcome {
        sign(self.byte >> ((setting - 1) % 8) & 1 == 0)
    }
}

/// Uniform mixture of the eight CHSH-optimal deterministic tables.
struct OptimalMix {
    role: Party,
    table: [i8; 4],
}

impl PartyAutomaton for OptimalMix {
    fn name(&self) -> String {
        "optimal-mix".into()
    }
    fn init(&mut self, _: u64, shared: &[u8]) {
        let t = chsh_optimal_tables();
        self.table = t[shared_rng(shared).gen_range(0..t.len())];
    }
    fn respond(&mut self, setting: usize, _: Option<usize>) -> Outcome {
        let off = if self.role == Party::Alice { 0 } else { 2 };
        sign(self.table[off + (setting - 1).min(1)] > 0)
    }
}

/// Shared λ picks one of the 16 deterministic table pairs uniformly from
/// those whose bit is set in `mask`; pair `i` gives Alice table `i / 4`
/// and Bob table `i % 4`.
struct Mix {
    role: Party,
    mask: u16,
    table: Vec<Outcome>,
}

impl PartyAutomaton for Mix {
    fn name(&self) -> String {
        format!("mix:{:04x}", self.mask)
    }
    fn init(&mut self, _: u64, shared: &[u8]) {
        let pairs: Vec<usize> = (0..16).filter(|i| self.mask >> i & 1 == 1).collect();
        let i = pairs[shared_rng(shared).gen_range(0..pairs.len())];
        let t = all_tables(2);
        self.table = t[if self.role == Party::Alice { i / 4 } else { i % 4 }].clone();
    }
    fn respond(&mut self, setting: usize, _: Option<usize>) -> Outcome {
        self.table[(setting - 1).min(1)]
    }
}

/// Shared hidden spin φ on the circle; Alice answers sign(a·φ), Bob
/// sign(−b·φ), with the keys at the singlet-optimal angles.
struct SignLhv {
    role: Party,
    offset_deg: f64,
    keys: Vec<Direction>,
    phi: Option<Direction>,
}

impl SignLhv {
    fn new(role: Party, offset_deg: f64) -> Self {
        let (a, b) = chsh_optimal_settings();
        let keys = if role == Party::Alice { a } else { b };
        let off = offset_deg.to_radians();
        let keys = keys.iter().map(|k| Direction::from_angle(k.coords()[1].atan2(k.coords()[0]) + off)).collect();
        Self { role, offset_deg, keys, phi: None }
    }
}

impl PartyAutomaton for SignLhv {
    fn name(&self) -> String {
        if self.offset_deg == 0.0 {
            "sign-lhv".into()
        } else {
            format!("sign-lhv:{}", self.offset_deg)
        }
    }
    fn init(&mut self, _: u64, shared: &[u8]) {
        self.phi = Some(sample_direction(1, &mut shared_rng(shared)));
    }
    fn respond(&mut self, setting: usize, _: Option<usize>) -> Outcome {
        let phi = self.phi.as_ref().expect("init precedes respond");
        let key = &self.keys[(setting - 1).min(self.keys.len() - 1)];
        let d = key.dot(phi).unwrap_or(0.0);
        sign(if self.role == Party::Alice { d >= 0.0 } else { -d >= 0.0 })
    }
}

/// Both parties run identical copies of a memory strategy; the shared
/// payload and the verdicts of earlier trials keep the copies in step.
struct Memory {
    role: Party,
    strategy: Box<dyn MemoryStrategy>,
    past: Vec<TrialRecord>,
    plan: Option<LocalPlan>,
}

impl PartyAutomaton for Memory {
    fn name(&self) -> String {
        format!("memory:{}", self.strategy.name())
    }
    fn init(&mut self, _: u64, shared: &[u8]) {
        self.plan = Some(self.strategy.plan(&self.past, &mut shared_rng(shared), 2, 2));
    }
    fn respond(&mut self, setting: usize, _: Option<usize>) -> Outcome {
        let p = self.plan.as_ref().expect("init precedes respond");
        let side = if self.role == Party::Alice { &p.alice } else { &p.bob };
        side[(setting - 1).min(side.len() - 1)]
    }
    fn learn(&mut self, record: &TrialRecord) {
        self.past.push(record.clone());
    }
}

/// Samples singlet statistics at the optimal angles. Needs the other
/// party's setting to do so; without it, Bob copies Alice's shared bit.
struct QuantumCheat {
    role: Party,
    x: Outcome,
    u: f64,
}

impl PartyAutomaton for QuantumCheat {
    fn name(&self) -> String {
        "quantum-cheat".into()
    }
    fn init(&mut self, _: u64, shared: &[u8]) {
        let mut rng = shared_rng(shared);
        self.x = sign(rng.gen());
        self.u = rng.gen();
    }
    fn respond(&mut self, setting: usize, leaked: Option<usize>) -> Outcome {
        match (self.role, leaked) {
            (Party::Alice, _) => self.x,
            (Party::Bob, None) => self.x,
            (Party::Bob, Some(a)) => {
                let (ka, kb) = chsh_optimal_settings();
                let ang = angle_between(&ka[(a - 1).min(1)], &kb[(setting - 1).min(1)]).unwrap_or(0.0);
                let e = -ang.cos();
                if self.u < (1.0 + e) / 2.0 {
                    self.x
                } else {
                    self.x.flip()
                }
            }
        }
    }
}

fn parse_signs(s: &str) -> Result<Vec<Outcome>> {
    s.chars()
        .map(|c| match c {
            '+' => Ok(Outcome::Plus),
            '-' => Ok(Outcome::Minus),
            _ => Err(Error::InvalidModel(format!("bad sign '{c}' in table"))),
        })
        .collect()
}

/// Builds one party from its id (see [`PARTY_IDS`]).
pub fn party_from_id(id: &str, role: Party) -> Result<Box<dyn PartyAutomaton>> {
    let sel = ChshSelection::standard();
    let memory = |strategy: Box<dyn MemoryStrategy>| -> Box<dyn PartyAutomaton> {
        Box::new(Memory { role, strategy, past: Vec::new(), plan: None })
    };
    Ok(match id {
        "constant:+" => Box::new(Table(vec![Outcome::Plus; 2])),
        "constant:-" => Box::new(Table(vec![Outcome::Minus; 2])),
        "shared-bits" => Box::new(Bits { role, independent: false, byte: 0 }),
        "independent-bits" => Box::new(Bits { role, independent: true, byte: 0 }),
        "optimal-mix" => Box::new(OptimalMix { role, table: [1; 4] }),
        "sign-lhv" => Box::new(SignLhv::new(role, 0.0)),
        "memory:count-steering" => memory(Box::new(CountSteering::new(sel))),
        "memory:settings-pattern" => memory(Box::new(SettingsPattern::new(sel))),
        "memory:optimal-mix" => memory(Box::new(Memoryless(Strategy::ChshOptimal))),
        "quantum-cheat" => Box::new(QuantumCheat { role, x: Outcome::Plus, u: 0.0 }),
        other => match other.split_once(':') {
            Some(("table", signs)) if !signs.is_empty() => Box::new(Table(parse_signs(signs)?)),
            Some(("mix", hex)) => match u16::from_str_radix(hex, 16) {
                Ok(mask) if mask != 0 => Box::new(Mix { role, mask, table: Vec::new() }),
                _ => return Err(Error::InvalidModel(format!("bad mix mask '{hex}'"))),
            },
            Some(("sign-lhv", deg)) => match deg.parse::<f64>() {
                Ok(d) if d.is_finite() => Box::new(SignLhv::new(role, d)),
                _ => return Err(Error::InvalidModel(format!("bad sign-lhv offset '{deg}'"))),
            },
            _ => {
                return Err(Error::InvalidModel(format!(
                    "unknown party strategy '{other}'; expected one of {}",
                    PARTY_IDS.join(", ")
                )))
            }
        },
    })
}

/// Alice's and Bob's strategy ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyIds {
    pub alice: String,
    pub bob: String,
}

/// One pairing in the zoo.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZooEntry {
    #[serde(flatten)]
    pub ids: PartyIds,
}

impl ZooEntry {
    fn new(alice: impl Into<String>, bob: impl Into<String>) -> Self {
        Self { ids: PartyIds { alice: alice.into(), bob: bob.into() } }
    }

    pub fn build(&self) -> Result<(Box<dyn PartyAutomaton>, Box<dyn PartyAutomaton>)> {
        Ok((party_from_id(&self.ids.alice, Party::Alice)?, party_from_id(&self.ids.bob, Party::Bob)?))
    }

    pub fn id(&self) -> String {
        format!("{}|{}", self.ids.alice, self.ids.bob)
    }
}

/// Every local strategy pairing shipped with the harness: all 16
/// deterministic table pairs, shared-λ mixtures over them, shared-spin and
/// shared-bit strategies and memory strategies. The cheat strategy is not
/// included.
pub fn strategy_zoo() -> Vec<ZooEntry> {
    let tables: Vec<String> = all_tables(2)
        .iter()
        .map(|t| format!("table:{}", t.iter().map(|o| if *o == Outcome::Plus { '+' } else { '-' }).collect::<String>()))
        .collect();
    let mut zoo = Vec::new();
    for a in &tables {
        for b in &tables {
            zoo.push(ZooEntry::new(a.clone(), b.clone()));
        }
    }
    // Mixtures over every two pairs, three families of three, and a few
    // larger sets.
    let mut masks = std::collections::BTreeSet::new();
    for i in 0..16u32 {
        for j in i + 1..16 {
            masks.insert(1u16 << i | 1 << j);
        }
        for (d1, d2) in [(1, 4), (5, 10), (3, 7)] {
            masks.insert(1u16 << i | 1 << ((i + d1) % 16) | 1 << ((i + d2) % 16));
        }
    }
    masks.extend([0xffffu16, 0x9669, 0x6996, 0x0f0f, 0x3c3c, 0x8421]);
    for mask in masks {
        let id = format!("mix:{mask:04x}");
        zoo.push(ZooEntry::new(id.clone(), id));
    }
    for deg in [15, 30, 45, 60, 75, 90, 120, 150] {
        let id = format!("sign-lhv:{deg}");
        zoo.push(ZooEntry::new(id.clone(), id));
    }
    let shared = ["shared-bits", "independent-bits", "optimal-mix", "sign-lhv"];
    for s in shared {
        zoo.push(ZooEntry::new(s, s));
    }
    zoo.push(ZooEntry::new("sign-lhv", "shared-bits"));
    zoo.push(ZooEntry::new("optimal-mix", "sign-lhv"));
    for m in ["memory:count-steering", "memory:settings-pattern", "memory:optimal-mix"] {
        zoo.push(ZooEntry::new(m, m));
    }
    zoo
}

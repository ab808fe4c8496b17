//! Outcome models: exact correlations and per-trial samplers.

mod automaton;
mod counterfactual;
mod eberhard;

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use automaton::{all_tables, chsh_optimal_tables, LocalPlan, Strategy};
pub use counterfactual::{counterfactual_extension, JointLaw4};
pub use eberhard::{eberhard_probs, OutcomeDist};

use crate::direction::{angle_between, sample_direction, uniform_direction, Direction};
use crate::error::{Error, Result};
use crate::geometry::{cdf_h, eta_from_angle, loop_separation, Closeness};
use crate::rng::RngStream;
use crate::trial::{HiddenTrace, Outcome};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Spin-½ singlet: E = −cos∠(a, b), fair marginals.
    Singlet,
    /// Maximally entangled photon pair: E = cos 2∠(a, b).
    PhotonPair,
    /// Partially entangled photons with symmetric detection efficiency.
    /// Settings must be points on the circle (polarizer angles).
    Eberhard {
        r: f64,
        #[serde(default = "one")]
        efficiency: f64,
    },
    /// Shared random spin φ; X = sign(a·φ), Y = sign(−b·φ).
    SignLhv,
    /// Loop-of-four construction over weights H_n(η).
    LoopOfFour {
        n: usize,
        #[serde(default)]
        closeness: Closeness,
    },
    /// Bipartite-graph model: E = 1 − H_n(η), sampled with fair marginals.
    NsphereGraph {
        n: usize,
        #[serde(default)]
        closeness: Closeness,
    },
    /// A memoryless local automaton.
    Automaton { strategy: Strategy },
}

/// A model plus the key directions of both parties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub settings_alice: Vec<Direction>,
    pub settings_bob: Vec<Direction>,
}

/// Hidden coordinates of one loop-of-four trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopState {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
}

impl LoopState {
    /// True when (λ_A, λ_B) lies on the rectangle fixed by β:
    /// λ_A + λ_B ∈ {β, 4 − β} or |λ_A − λ_B| = β.
    pub fn on_rectangle(&self, tol: f64) -> bool {
        let s = self.lambda_a + self.lambda_b;
        let d = (self.lambda_a - self.lambda_b).abs();
        (s - self.beta).abs() <= tol || (s - (4.0 - self.beta)).abs() <= tol || (d - self.beta).abs() <= tol
    }
}

/// Step response of a fluid-level gauge: +1 for levels in [0, 1], −1 above.
pub fn gauge(level: f64) -> Outcome {
    Outcome::from_sign(level <= 1.0)
}

/// Places A at 0 and B at `beta`, reads both gauges for hidden point `lambda`.
pub fn loop_outcomes(beta: f64, lambda: f64) -> (Outcome, Outcome, LoopState) {
    let lambda_a = loop_separation(0.0, lambda);
    let lambda_b = loop_separation(beta, lambda);
    let st = LoopState { alpha: 0.0, beta, lambda, lambda_a, lambda_b };
    (gauge(lambda_a), gauge(lambda_b), st)
}

impl ModelSpec {
    pub fn new(kind: ModelKind, settings_alice: Vec<Direction>, settings_bob: Vec<Direction>) -> Result<Self> {
        let m = Self { kind, settings_alice, settings_bob };
        m.validate()?;
        Ok(m)
    }

    pub fn k(&self) -> usize {
        self.settings_alice.len()
    }

    pub fn l(&self) -> usize {
        self.settings_bob.len()
    }

    /// Sphere dimension shared by all key directions.
    pub fn dim(&self) -> usize {
        self.settings_alice.first().map(Direction::dim).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.settings_alice.is_empty() || self.settings_bob.is_empty() {
            return Err(Error::InvalidModel("each party needs at least one key".into()));
        }
        let d = self.dim();
        if let Some(bad) = self.settings_alice.iter().chain(&self.settings_bob).find(|x| x.dim() != d) {
            return Err(Error::DimensionMismatch(d, bad.dim()));
        }
        match &self.kind {
            ModelKind::Eberhard { r, efficiency } => {
                if !(0.0..=1.0).contains(r) {
                    return Err(Error::InvalidModel(format!("eberhard r = {r} outside [0, 1]")));
                }
                if !(0.0..=1.0).contains(efficiency) {
                    return Err(Error::InvalidModel(format!("efficiency {efficiency} outside [0, 1]")));
                }
                if d != 1 {
                    return Err(Error::InvalidModel(
                        "eberhard settings must be polarizer angles (circle points)".into(),
                    ));
                }
            }
            ModelKind::LoopOfFour { n, .. } | ModelKind::NsphereGraph { n, .. } => {
                if *n == 0 {
                    return Err(Error::InvalidModel("sphere dimension must be >= 1".into()));
                }
                if *n != d {
                    return Err(Error::InvalidModel(format!(
                        "model dimension n = {n} but keys live on the {d}-sphere"
                    )));
                }
            }
            ModelKind::Automaton { strategy } => strategy.check_grid(self.k(), self.l())?,
            _ => {}
        }
        Ok(())
    }

    fn check_indices(&self, i: usize, j: usize) -> Result<()> {
        use crate::trial::{Party, SettingLabel};
        SettingLabel { party: Party::Alice, index: i }.check(0, self.k())?;
        SettingLabel { party: Party::Bob, index: j }.check(0, self.l())
    }

    fn angle(&self, i: usize, j: usize) -> Result<f64> {
        angle_between(&self.settings_alice[i - 1], &self.settings_bob[j - 1])
    }

    fn polarizers(&self, i: usize, j: usize) -> (f64, f64) {
        let a = self.settings_alice[i - 1].coords();
        let b = self.settings_bob[j - 1].coords();
        (a[1].atan2(a[0]), b[1].atan2(b[0]))
    }

    /// Exact E(XY | a_i, b_j), over coincidences.
    pub fn correlation_exact(&self, i: usize, j: usize) -> Result<f64> {
        Ok(self.exact_cell(i, j)?.0)
    }

    /// Exact (E, P(X=+1), P(Y=+1)) for a setting pair, conditional on
    /// coincidence.
    pub fn exact_cell(&self, i: usize, j: usize) -> Result<(f64, f64, f64)> {
        self.check_indices(i, j)?;
        Ok(match &self.kind {
            ModelKind::Singlet => (-self.angle(i, j)?.cos(), 0.5, 0.5),
            ModelKind::PhotonPair => ((2.0 * self.angle(i, j)?).cos(), 0.5, 0.5),
            ModelKind::SignLhv => (2.0 * self.angle(i, j)? / PI - 1.0, 0.5, 0.5),
            ModelKind::LoopOfFour { n, closeness } | ModelKind::NsphereGraph { n, closeness } => {
                let eta = eta_from_angle(self.angle(i, j)?, *closeness);
                (1.0 - cdf_h(eta, *n)?, 0.5, 0.5)
            }
            ModelKind::Eberhard { r, .. } => {
                let (a, b) = self.polarizers(i, j);
                let d = eberhard_probs(*r, a, b, 1.0)?;
                (d.correlation().unwrap_or(0.0), d.alice(Outcome::Plus), d.bob(Outcome::Plus))
            }
            ModelKind::Automaton { strategy } => {
                let (k, l) = (self.k(), self.l());
                let e = strategy.correlation(i, j, k, l);
                match strategy.support(k, l) {
                    Some(sup) => {
                        let px = sup.iter().filter(|(_, p)| p.alice[i - 1] == Outcome::Plus).map(|(w, _)| w).sum();
                        let py = sup.iter().filter(|(_, p)| p.bob[j - 1] == Outcome::Plus).map(|(w, _)| w).sum();
                        (e, px, py)
                    }
                    None => (e, 0.5, 0.5),
                }
            }
        })
    }

    /// Exact law over {+, −, ∅}² at a setting pair. Only Eberhard models
    /// lose detections; for the rest the ±1 law follows from E and the two
    /// marginals.
    pub fn outcome_dist(&self, i: usize, j: usize) -> Result<OutcomeDist> {
        if let ModelKind::Eberhard { r, efficiency } = &self.kind {
            self.check_indices(i, j)?;
            let (a, b) = self.polarizers(i, j);
            return eberhard_probs(*r, a, b, *efficiency);
        }
        let (e, px, py) = self.exact_cell(i, j)?;
        let (mx, my) = (2.0 * px - 1.0, 2.0 * py - 1.0);
        let mut p = [[0.0; 3]; 3];
        for (si, x) in [1.0, -1.0].into_iter().enumerate() {
            for (sj, y) in [1.0, -1.0].into_iter().enumerate() {
                p[si][sj] = (1.0 + x * mx + y * my + x * y * e) / 4.0;
            }
        }
        Ok(OutcomeDist { p })
    }

    /// Precomputes per-cell constants for fast sampling.
    pub fn prepare(&self) -> Result<PreparedModel> {
        self.validate()?;
        let (k, l) = (self.k(), self.l());
        let mut cells = Vec::with_capacity(k * l);
        for i in 1..=k {
            for j in 1..=l {
                cells.push(match &self.kind {
                    ModelKind::Singlet | ModelKind::PhotonPair | ModelKind::NsphereGraph { .. } => {
                        CellLaw::Binary { e: self.correlation_exact(i, j)? }
                    }
                    ModelKind::LoopOfFour { n, closeness } => {
                        let eta = eta_from_angle(self.angle(i, j)?, *closeness);
                        CellLaw::Loop { beta: cdf_h(eta, *n)? }
                    }
                    ModelKind::Eberhard { r, efficiency } => {
                        let (a, b) = self.polarizers(i, j);
                        CellLaw::Table(eberhard_probs(*r, a, b, *efficiency)?)
                    }
                    ModelKind::SignLhv | ModelKind::Automaton { .. } => CellLaw::Local,
                });
            }
        }
        Ok(PreparedModel { spec: self.clone(), cells })
    }
}

#[derive(Debug, Clone)]
enum CellLaw {
    /// Fair marginals, P(x, y) = (1 + x·y·E)/4.
    Binary {
        e: f64,
    },
    Loop {
        beta: f64,
    },
    Table(OutcomeDist),
    /// Deterministic responses to a shared hidden draw.
    Local,
}

/// One sampled trial outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Option<Outcome>,
    pub y: Option<Outcome>,
    pub hidden: Option<HiddenTrace>,
}

/// A validated model with cached per-cell laws.
#[derive(Debug, Clone)]
pub struct PreparedModel {
    spec: ModelSpec,
    cells: Vec<CellLaw>,
}

impl PreparedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn k(&self) -> usize {
        self.spec.k()
    }

    pub fn l(&self) -> usize {
        self.spec.l()
    }

    /// For loop-of-four models, the B coordinate β = H_n(η) of a cell.
    pub fn loop_beta(&self, i: usize, j: usize) -> Option<f64> {
        match self.cells[(i - 1) * self.l() + (j - 1)] {
            CellLaw::Loop { beta } => Some(beta),
            _ => None,
        }
    }

    /// Draws one trial at keys (a_i, b_j). Pure in `(self, i, j, rng state)`.
    pub fn sample<R: Rng + ?Sized>(&self, i: usize, j: usize, rng: &mut R) -> Sample {
        let law = &self.cells[(i - 1) * self.l() + (j - 1)];
        match law {
            CellLaw::Binary { e } => {
                let x = Outcome::from_sign(rng.gen::<bool>());
                let same = rng.gen::<f64>() < (1.0 + e) / 2.0;
                Sample { x: Some(x), y: Some(if same { x } else { x.flip() }), hidden: None }
            }
            CellLaw::Loop { beta } => {
                let lambda = 4.0 * rng.gen::<f64>();
                let (x, y, st) = loop_outcomes(*beta, lambda);
                Sample { x: Some(x), y: Some(y), hidden: Some(HiddenTrace::Loop(st)) }
            }
            CellLaw::Table(d) => {
                let (x, y) = d.draw(rng.gen());
                Sample { x, y, hidden: None }
            }
            CellLaw::Local => match &self.spec.kind {
                ModelKind::SignLhv => {
                    let phi = sample_direction(self.spec.dim(), rng);
                    let a = &self.spec.settings_alice[i - 1];
                    let b = &self.spec.settings_bob[j - 1];
                    let x = Outcome::from_sign(a.dot(&phi).unwrap_or(0.0) >= 0.0);
                    let y = Outcome::from_sign(-b.dot(&phi).unwrap_or(0.0) >= 0.0);
                    Sample { x: Some(x), y: Some(y), hidden: Some(HiddenTrace::Spin { coords: phi.coords().to_vec() }) }
                }
                ModelKind::Automaton { strategy } => {
                    let plan = strategy.draw(rng, self.k(), self.l());
                    Sample { x: Some(plan.alice[i - 1]), y: Some(plan.bob[j - 1]), hidden: None }
                }
                _ => unreachable!("only local models use CellLaw::Local"),
            },
        }
    }
}

/// Draws one trial keyed by a stream position.
pub fn sample_trial(model: &PreparedModel, i: usize, j: usize, stream: &RngStream) -> Result<Sample> {
    model.spec.check_indices(i, j)?;
    Ok(model.sample(i, j, &mut stream.rng()))
}

/// k + l independent uniform key directions on the n-sphere.
pub fn carol_keys(n: usize, k: usize, l: usize, stream: RngStream) -> Result<(Vec<Direction>, Vec<Direction>)> {
    if k < 2 || l < 2 {
        return Err(Error::InvalidModel(format!("need k, l >= 2, got {k}, {l}")));
    }
    let draw = |c: usize| uniform_direction(n, &stream.at(c as u64));
    let alice = (0..k).map(draw).collect::<Result<Vec<_>>>()?;
    let bob = (k..k + l).map(draw).collect::<Result<Vec<_>>>()?;
    Ok((alice, bob))
}

/// Random keys closed under antipodes: the second half of each party's
/// list is the antipodes of the first half, so every row and column of
/// correlations sums to zero. Requires even k and l.
pub fn balanced_keys(n: usize, k: usize, l: usize, stream: RngStream) -> Result<(Vec<Direction>, Vec<Direction>)> {
    if !k.is_multiple_of(2) || !l.is_multiple_of(2) {
        return Err(Error::InvalidModel("balanced keys need even k and l".into()));
    }
    let (a, b) = carol_keys(n, (k / 2).max(2), (l / 2).max(2), stream)?;
    let close = |mut v: Vec<Direction>, half: usize| {
        v.truncate(half);
        let anti: Vec<Direction> = v.iter().map(Direction::antipode).collect();
        v.extend(anti);
        v
    };
    Ok((close(a, k / 2), close(b, l / 2)))
}

/// Alice at 0° and 90°, Bob at 225° and 135°: singlet correlations reach 2√2
/// on E11 + E12 + E21 − E22.
pub fn chsh_optimal_settings() -> (Vec<Direction>, Vec<Direction>) {
    (
        vec![Direction::from_degrees(0.0), Direction::from_degrees(90.0)],
        vec![Direction::from_degrees(225.0), Direction::from_degrees(135.0)],
    )
}

/// Aspect's polarizer angles a = 0°, a' = 45°, b = 22.5°, b' = 67.5°.
pub fn aspect_settings() -> (Vec<Direction>, Vec<Direction>) {
    (
        vec![Direction::from_degrees(0.0), Direction::from_degrees(45.0)],
        vec![Direction::from_degrees(22.5), Direction::from_degrees(67.5)],
    )
}

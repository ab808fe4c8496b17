//! Joint law of the four potential outcomes (X1, X2, Y1, Y2) of a
//! deterministic local model, built by enumerating its hidden variable.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ModelKind, ModelSpec};
use crate::direction::sample_direction;
use crate::error::{Error, Result};
use crate::rng::{tags, RngStream};
use crate::trial::Outcome;

/// Probabilities over {−1,+1}^4. Atom index bits, high to low:
/// x1, x2, y1, y2, with a set bit meaning −1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointLaw4 {
    weights: [f64; 16],
}

fn atom_values(idx: usize) -> [i8; 4] {
    std::array::from_fn(|b| if idx >> (3 - b) & 1 == 0 { 1 } else { -1 })
}

fn atom_index(v: [Outcome; 4]) -> usize {
    v.iter().fold(0, |acc, o| acc << 1 | usize::from(*o == Outcome::Minus))
}

/// Cells in order (1,1), (1,2), (2,1), (2,2) as (Alice slot, Bob slot).
const CELLS: [(usize, usize); 4] = [(0, 2), (0, 3), (1, 2), (1, 3)];

impl JointLaw4 {
    /// Normalizes nonnegative weights into a law.
    pub fn from_weights(weights: [f64; 16]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidModel("joint law weights must be finite and nonnegative".into()));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Empty("joint law"));
        }
        Ok(Self { weights })
    }

    fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn prob(&self, x1: Outcome, x2: Outcome, y1: Outcome, y2: Outcome) -> f64 {
        self.weights[atom_index([x1, x2, y1, y2])] / self.total()
    }

    /// All 16 atoms with their probabilities.
    pub fn atoms(&self) -> Vec<([i8; 4], f64)> {
        let t = self.total();
        (0..16).map(|i| (atom_values(i), self.weights[i] / t)).collect()
    }

    /// E(X_i Y_j) for i, j ∈ {1, 2}.
    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        let s: f64 = (0..16)
            .map(|idx| {
                let v = atom_values(idx);
                self.weights[idx] * f64::from(v[i - 1] * v[1 + j])
            })
            .sum();
        s / self.total()
    }

    /// P(X_i = +1).
    pub fn marginal_x(&self, i: usize) -> f64 {
        (0..16).filter(|idx| atom_values(*idx)[i - 1] == 1).map(|idx| self.weights[idx]).sum::<f64>() / self.total()
    }

    pub fn marginal_y(&self, j: usize) -> f64 {
        (0..16).filter(|idx| atom_values(*idx)[1 + j] == 1).map(|idx| self.weights[idx]).sum::<f64>() / self.total()
    }

    /// The eight one-sided CHSH values. Entry `m` (m < 4) negates cell `m`
    /// of (11, 12, 21, 22); entry `4 + m` is its negative.
    ///
    /// Each atom scores exactly ±2, so a value is computed as
    /// 2(A − B)/(A + B) from the masses on the two scores; with
    /// monotone rounding this can never leave [−2, 2].
    pub fn chsh_values(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        for m in 0..4 {
            let (mut plus, mut minus) = (0.0, 0.0);
            for idx in 0..16 {
                let v = atom_values(idx);
                let s: i8 =
                    CELLS.iter().enumerate().map(|(c, &(a, b))| if c == m { -v[a] * v[b] } else { v[a] * v[b] }).sum();
                debug_assert!(s == 2 || s == -2);
                if s > 0 {
                    plus += self.weights[idx];
                } else {
                    minus += self.weights[idx];
                }
            }
            out[m] = 2.0 * ((plus - minus) / (plus + minus));
            out[4 + m] = -out[m];
        }
        out
    }
}

/// Joint law of (X_{i1}, X_{i2}, Y_{j1}, Y_{j2}) for a deterministic local
/// model. `keys` is `[i1, i2, j1, j2]` (1-based).
///
/// SignLhv on the circle is partitioned exactly into arcs; on higher
/// spheres `n_grid` hidden spins are drawn from a fixed oracle stream.
/// Automata are enumerated over their listed support, or sampled
/// `n_grid` times when the support is too large to list.
pub fn counterfactual_extension(model: &ModelSpec, keys: [usize; 4], n_grid: usize) -> Result<JointLaw4> {
    model.validate()?;
    model.check_indices(keys[0], keys[2])?;
    model.check_indices(keys[1], keys[3])?;
    let a = [&model.settings_alice[keys[0] - 1], &model.settings_alice[keys[1] - 1]];
    let b = [&model.settings_bob[keys[2] - 1], &model.settings_bob[keys[3] - 1]];
    let mut w = [0.0; 16];
    match &model.kind {
        ModelKind::SignLhv => {
            let respond = |phi: &[f64]| -> [Outcome; 4] {
                let dot = |d: &crate::direction::Direction| d.coords().iter().zip(phi).map(|(p, q)| p * q).sum::<f64>();
                [
                    Outcome::from_sign(dot(a[0]) >= 0.0),
                    Outcome::from_sign(dot(a[1]) >= 0.0),
                    Outcome::from_sign(-dot(b[0]) >= 0.0),
                    Outcome::from_sign(-dot(b[1]) >= 0.0),
                ]
            };
            if model.dim() == 1 {
                // Responses only change where φ is orthogonal to a key.
                let mut cuts: Vec<f64> = a
                    .iter()
                    .chain(b.iter())
                    .flat_map(|d| {
                        let t = d.coords()[1].atan2(d.coords()[0]);
                        [t + PI / 2.0, t - PI / 2.0]
                    })
                    .map(crate::direction::wrap_two_pi)
                    .collect();
                cuts.sort_by(f64::total_cmp);
                cuts.push(cuts[0] + 2.0 * PI);
                for win in cuts.windows(2) {
                    let len = win[1] - win[0];
                    if len <= 0.0 {
                        continue;
                    }
                    let mid = 0.5 * (win[0] + win[1]);
                    w[atom_index(respond(&[mid.cos(), mid.sin()]))] += len;
                }
            } else {
                if n_grid == 0 {
                    return Err(Error::Empty("n_grid"));
                }
                let base = RngStream::new(0, tags::ORACLE);
                for t in 0..n_grid as u64 {
                    let phi = sample_direction(model.dim(), &mut base.at(t).rng());
                    w[atom_index(respond(phi.coords()))] += 1.0;
                }
            }
        }
        ModelKind::Automaton { strategy } => {
            let pick = |p: &super::LocalPlan| {
                [p.alice[keys[0] - 1], p.alice[keys[1] - 1], p.bob[keys[2] - 1], p.bob[keys[3] - 1]]
            };
            match strategy.support(model.k(), model.l()) {
                Some(sup) => sup.iter().for_each(|(p, plan)| w[atom_index(pick(plan))] += p),
                None => {
                    if n_grid == 0 {
                        return Err(Error::Empty("n_grid"));
                    }
                    let base = RngStream::new(0, tags::ORACLE);
                    for t in 0..n_grid as u64 {
                        let plan = strategy.draw(&mut base.at(t).rng(), model.k(), model.l());
                        w[atom_index(pick(&plan))] += 1.0;
                    }
                }
            }
        }
        other => {
            return Err(Error::InvalidModel(format!(
                "counterfactual extension needs a deterministic local model, got {}",
                serde_json::to_value(other).ok().and_then(|v| v["kind"].as_str().map(String::from)).unwrap_or_default()
            )))
        }
    }
    JointLaw4::from_weights(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direction::Direction;
    use crate::models::{all_tables, carol_keys, chsh_optimal_settings, Strategy};

    #[test]
    fn atom_encoding_roundtrip() {
        for idx in 0..16 {
            let v = atom_values(idx).map(|s| Outcome::from_sign(s > 0));
            assert_eq!(atom_index(v), idx);
        }
    }

    #[test]
    fn sign_lhv_circle_exact() {
        for deg in [0.0, 17.0, 45.0, 90.0, 133.0] {
            let a = vec![Direction::from_degrees(0.0), Direction::from_degrees(deg)];
            let b = vec![Direction::from_degrees(0.0), Direction::from_degrees(200.0)];
            let m = ModelSpec::new(ModelKind::SignLhv, a, b).unwrap();
            let law = counterfactual_extension(&m, [1, 2, 1, 2], 0).unwrap();
            for i in 1..=2 {
                for j in 1..=2 {
                    assert!((law.correlation(i, j) - m.correlation_exact(i, j).unwrap()).abs() < 1e-12);
                }
                assert!((law.marginal_x(i) - 0.5).abs() < 1e-12);
            }
            // Equal keys ⇒ X1 = −Y1.
            let anti: f64 = law.atoms().iter().filter(|(v, _)| v[0] == -v[2]).map(|(_, p)| p).sum();
            assert!((anti - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sign_lhv_sphere_sampled() {
        let (a, b) = carol_keys(2, 2, 2, RngStream::new(5, tags::KEYS)).unwrap();
        let m = ModelSpec::new(ModelKind::SignLhv, a, b).unwrap();
        let n = 200_000;
        let law = counterfactual_extension(&m, [1, 2, 1, 2], n).unwrap();
        for i in 1..=2 {
            for j in 1..=2 {
                assert!((law.correlation(i, j) - m.correlation_exact(i, j).unwrap()).abs() < 4.0 / (n as f64).sqrt());
            }
        }
        assert!(law.chsh_values().iter().all(|s| s.abs() <= 2.0));
    }

    #[test]
    fn deterministic_tables_are_bounded() {
        let (a, b) = chsh_optimal_settings();
        for ta in all_tables(2) {
            for tb in all_tables(2) {
                let strategy = Strategy::Deterministic { alice: ta.clone(), bob: tb };
                let m = ModelSpec::new(ModelKind::Automaton { strategy }, a.clone(), b.clone()).unwrap();
                let law = counterfactual_extension(&m, [1, 2, 1, 2], 0).unwrap();
                let total: f64 = law.atoms().iter().map(|(_, p)| p).sum();
                assert!((total - 1.0).abs() < 1e-15);
                assert!(law.chsh_values().iter().all(|s| (-2.0..=2.0).contains(s)));
            }
        }
    }

    #[test]
    fn uniform_random_table_is_a_law() {
        let (a, b) = chsh_optimal_settings();
        let m = ModelSpec::new(ModelKind::Automaton { strategy: Strategy::SharedCoins }, a, b).unwrap();
        let law = counterfactual_extension(&m, [1, 2, 1, 2], 0).unwrap();
        assert!(law.atoms().iter().all(|(_, p)| (*p - 1.0 / 16.0).abs() < 1e-15));
    }

    #[test]
    fn quantum_models_are_rejected() {
        let (a, b) = chsh_optimal_settings();
        let m = ModelSpec::new(ModelKind::Singlet, a, b).unwrap();
        assert!(counterfactual_extension(&m, [1, 2, 1, 2], 100).is_err());
    }

    #[test]
    fn optimal_mixture_saturates_bound() {
        let (a, b) = chsh_optimal_settings();
        let m = ModelSpec::new(ModelKind::Automaton { strategy: Strategy::ChshOptimal }, a, b).unwrap();
        let law = counterfactual_extension(&m, [1, 2, 1, 2], 0).unwrap();
        assert_eq!(law.chsh_values()[3], 2.0);
    }
}

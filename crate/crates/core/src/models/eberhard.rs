//! Polarization-entangled pairs in the state (|HV⟩ + r|VH⟩)/√(1+r²),
//! measured by single polarizers with symmetric detection efficiency.
//!
//! Bob's analyzer angle is measured in a mirrored frame (from V toward H),
//! as seen by a counter-propagating beam. With that convention the
//! maximally entangled case r = 1 gives E = cos 2(α − β), the same law as
//! [`crate::models::ModelKind::PhotonPair`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trial::Outcome;

/// Joint law over {+, −, ∅} × {+, −, ∅}; index 0 = +, 1 = −, 2 = ∅.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDist {
    pub p: [[f64; 3]; 3],
}

fn slot(o: Option<Outcome>) -> usize {
    match o {
        Some(Outcome::Plus) => 0,
        Some(Outcome::Minus) => 1,
        None => 2,
    }
}

const SLOTS: [Option<Outcome>; 3] = [Some(Outcome::Plus), Some(Outcome::Minus), None];

impl OutcomeDist {
    pub fn prob(&self, x: Option<Outcome>, y: Option<Outcome>) -> f64 {
        self.p[slot(x)][slot(y)]
    }

    pub fn total(&self) -> f64 {
        self.p.iter().flatten().sum()
    }

    /// P(Alice detects `x`), Bob in any state.
    pub fn alice(&self, x: Outcome) -> f64 {
        self.p[slot(Some(x))].iter().sum()
    }

    pub fn bob(&self, y: Outcome) -> f64 {
        (0..3).map(|i| self.p[i][slot(Some(y))]).sum()
    }

    /// E(XY) over coincidences; `None` if coincidences are impossible.
    pub fn correlation(&self) -> Option<f64> {
        let c: f64 = self.p[0][0] + self.p[0][1] + self.p[1][0] + self.p[1][1];
        (c > 0.0).then(|| (self.p[0][0] + self.p[1][1] - self.p[0][1] - self.p[1][0]) / c)
    }

    /// Inverse-CDF draw from a uniform deviate in [0, 1).
    pub fn draw(&self, u: f64) -> (Option<Outcome>, Option<Outcome>) {
        let mut acc = 0.0;
        for (i, x) in SLOTS.iter().enumerate() {
            for (j, y) in SLOTS.iter().enumerate() {
                acc += self.p[i][j];
                if u < acc {
                    return (*x, *y);
                }
            }
        }
        (None, None)
    }
}

/// Amplitude for the pure outcome pair `(x, y)` before losses.
fn amplitude(r: f64, alpha: f64, beta: f64, x: Outcome, y: Outcome) -> f64 {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    // (H, V) components of each analyzer channel.
    let (uh, uv) = match x {
        Outcome::Plus => (ca, sa),
        Outcome::Minus => (-sa, ca),
    };
    let (vh, vv) = match y {
        Outcome::Plus => (sb, cb),
        Outcome::Minus => (cb, -sb),
    };
    (uh * vv + r * uv * vh) / (1.0 + r * r).sqrt()
}

/// Outcome law at analyzer angles `alpha`, `beta` (radians) when each
/// detection independently survives with probability `eff`.
pub fn eberhard_probs(r: f64, alpha: f64, beta: f64, eff: f64) -> Result<OutcomeDist> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain { what: "r", value: r, domain: "[0, 1]" });
    }
    if !(0.0..=1.0).contains(&eff) {
        return Err(Error::Domain { what: "efficiency", value: eff, domain: "[0, 1]" });
    }
    let mut q = [[0.0; 2]; 2];
    for (i, x) in [Outcome::Plus, Outcome::Minus].into_iter().enumerate() {
        for (j, y) in [Outcome::Plus, Outcome::Minus].into_iter().enumerate() {
            q[i][j] = amplitude(r, alpha, beta, x, y).powi(2);
        }
    }
    let miss = 1.0 - eff;
    let mut p = [[0.0; 3]; 3];
    for i in 0..2 {
        for j in 0..2 {
            p[i][j] = eff * eff * q[i][j];
        }
        p[i][2] = eff * miss * (q[i][0] + q[i][1]);
        p[2][i] = eff * miss * (q[0][i] + q[1][i]);
    }
    p[2][2] = miss * miss;
    Ok(OutcomeDist { p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;
    use Outcome::{Minus as M, Plus as P};

    /// Independent route: ⟨ψ| Π_x ⊗ Π_y |ψ⟩ with explicit 4 × 4 algebra.
    /// Basis order |HH⟩, |HV⟩, |VH⟩, |VV⟩; Bob's frame is the H↔V mirror of
    /// Alice's.
    fn oracle(r: f64, alpha: f64, beta: f64, x: Outcome, y: Outcome) -> f64 {
        let n = (1.0 + r * r).sqrt();
        let psi = [0.0, 1.0 / n, r / n, 0.0];
        let rot = |t: f64, o: Outcome| -> [f64; 2] {
            let base = match o {
                P => 0.0,
                M => PI / 2.0,
            };
            [(t + base).cos(), (t + base).sin()]
        };
        let a = rot(alpha, x);
        let b0 = rot(beta, y);
        let b = [b0[1], b0[0]];
        let proj = |v: [f64; 2]| [[v[0] * v[0], v[0] * v[1]], [v[1] * v[0], v[1] * v[1]]];
        let (pa, pb) = (proj(a), proj(b));
        let mut kron = [[0.0; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        kron[2 * i + k][2 * j + l] = pa[i][j] * pb[k][l];
                    }
                }
            }
        }
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                acc += psi[i] * kron[i][j] * psi[j];
            }
        }
        acc
    }

    #[test]
    fn matches_linear_algebra_oracle() {
        for &r in &[0.0, 0.1, 0.37, 1.0] {
            for &a in &[0.0, 0.3, 1.1, 2.9] {
                for &b in &[0.0, 0.7, 1.9, 3.1] {
                    let d = eberhard_probs(r, a, b, 1.0).unwrap();
                    for x in [P, M] {
                        for y in [P, M] {
                            assert_abs_diff_eq!(d.prob(Some(x), Some(y)), oracle(r, a, b, x, y), epsilon = 1e-14);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn maximal_entanglement_gives_cos_two_delta() {
        for &a in &[0.0, 0.4, 1.3] {
            for &b in &[0.0, 0.2, 2.2] {
                let d = eberhard_probs(1.0, a, b, 1.0).unwrap();
                assert_abs_diff_eq!(d.correlation().unwrap(), (2.0 * (a - b)).cos(), epsilon = 1e-12);
                assert_abs_diff_eq!(d.alice(P), 0.5, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_efficiency_is_all_missing() {
        let d = eberhard_probs(0.5, 0.2, 0.9, 0.0).unwrap();
        assert_eq!(d.prob(None, None), 1.0);
        assert_abs_diff_eq!(d.total(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn product_state_factorizes() {
        for &a in &[0.0, 0.5, 1.2] {
            for &b in &[0.1, 0.8, 2.5] {
                let d = eberhard_probs(0.0, a, b, 1.0).unwrap();
                let ex = d.alice(P) - d.alice(M);
                let ey = d.bob(P) - d.bob(M);
                assert_abs_diff_eq!(d.correlation().unwrap(), ex * ey, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sums_to_one_with_losses() {
        let d = eberhard_probs(0.3, 0.4, 1.0, 0.8).unwrap();
        assert_abs_diff_eq!(d.total(), 1.0, epsilon = 1e-14);
        let both: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| d.p[i][j]).sum();
        assert_abs_diff_eq!(both, 0.64, epsilon = 1e-14);
    }

    #[test]
    fn parameter_domain() {
        assert!(eberhard_probs(1.2, 0.0, 0.0, 1.0).is_err());
        assert!(eberhard_probs(0.5, 0.0, 0.0, -0.1).is_err());
    }
}

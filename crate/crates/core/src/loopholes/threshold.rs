//! Critical detection efficiency for the Clauser–Horne/Eberhard inequality
//! `S++ ≤ 0` with partially entangled photon pairs.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::eberhard_probs;
use crate::trial::Outcome;

/// Best S++ found and the polarizer angles (α, α′, β, β′) in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub value: f64,
    pub angles: [f64; 4],
}

/// Exact `S++` with every probability taken over emitted pairs.
pub fn ch_violation(r: f64, eta: f64, angles: [f64; 4]) -> Result<f64> {
    let [a, a2, b, b2] = angles;
    let d = |x: f64, y: f64| eberhard_probs(r, x, y, eta);
    let (ab, ab2, a2b, a2b2) = (d(a, b)?, d(a, b2)?, d(a2, b)?, d(a2, b2)?);
    let pp = |o: &crate::models::OutcomeDist| o.prob(Some(Outcome::Plus), Some(Outcome::Plus));
    Ok(pp(&ab) - pp(&ab2) + pp(&a2b) + pp(&a2b2) - a2b.alice(Outcome::Plus) - ab.bob(Outcome::Plus))
}

struct NegViolation {
    r: f64,
    eta: f64,
}

impl CostFunction for NegViolation {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        // S++ = η(ηQ − M); dividing by η keeps the scale fixed near the
        // threshold.
        Ok(-ch_violation(self.r, self.eta, [p[0], p[1], p[2], p[3]])? / self.eta)
    }
}

const SEEDS: usize = 6;

/// Maximizes `S++` over the four polarizer angles: a grid of step
/// `grid_deg` over [0°, 180°)⁴ seeds Nelder–Mead refinements from its best
/// points.
pub fn max_violation(r: f64, eta: f64, grid_deg: f64) -> Result<Violation> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain { what: "eta", value: eta, domain: "(0, 1]" });
    }
    if !(grid_deg > 0.0 && grid_deg <= 90.0) {
        return Err(Error::Domain { what: "grid step", value: grid_deg, domain: "(0, 90] degrees" });
    }
    eberhard_probs(r, 0.0, 0.0, eta)?;
    let steps = (180.0 / grid_deg).round().max(1.0) as u64;
    let h = std::f64::consts::PI / steps as f64;
    let at = |idx: u64| -> [f64; 4] { std::array::from_fn(|d| ((idx / steps.pow(d as u32)) % steps) as f64 * h) };
    let cost = NegViolation { r, eta };
    let mut scored: Vec<(f64, u64)> = crate::par::map_indexed(steps.pow(4), |idx| {
        let p = at(idx);
        (cost.cost(&p.to_vec()).unwrap_or(f64::INFINITY), idx)
    });
    scored.sort_by(|x, y| x.0.total_cmp(&y.0));
    let refine = |&(_, idx): &(f64, u64)| -> Violation {
        let start = at(idx).to_vec();
        let mut simplex = vec![start.clone()];
        for d in 0..4 {
            let mut v = start.clone();
            v[d] += 0.5 * h;
            simplex.push(v);
        }
        let best = NelderMead::new(simplex)
            .with_sd_tolerance(1e-14)
            .ok()
            .and_then(|s| Executor::new(NegViolation { r, eta }, s).configure(|st| st.max_iters(4000)).run().ok())
            .and_then(|res| res.state.best_param)
            .unwrap_or(start);
        let angles = [best[0], best[1], best[2], best[3]];
        Violation { value: ch_violation(r, eta, angles).unwrap_or(f64::NEG_INFINITY), angles }
    };
    let seeds = &scored[..SEEDS.min(scored.len())];
    let best = crate::par::map_slice(seeds, refine)
        .into_iter()
        .max_by(|x, y| x.value.total_cmp(&y.value))
        .expect("at least one seed");
    Ok(best)
}

/// Smallest symmetric efficiency at which some polarizer angles give
/// `S++ > 0`, by bisection to 1e−5 over η ∈ [1/2, 1].
pub fn efficiency_threshold(r: f64, grid_deg: f64) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain { what: "r", value: r, domain: "(0, 1]" });
    }
    let violated = |eta: f64| -> Result<bool> { Ok(max_violation(r, eta, grid_deg)?.value > 0.0) };
    if !violated(1.0)? {
        return Err(Error::InvalidModel(format!("no violation at unit efficiency for r = {r}")));
    }
    let (mut lo, mut hi) = (0.5, 1.0);
    while hi - lo > 1e-5 {
        let mid = 0.5 * (lo + hi);
        if violated(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `(η, max S++)` for each efficiency in `etas`.
pub fn threshold_scan(r: f64, etas: &[f64], grid_deg: f64) -> Result<Vec<(f64, f64)>> {
    crate::par::map_slice(etas, |&eta| Ok((eta, max_violation(r, eta, grid_deg)?.value))).into_iter().collect()
}

//! The CHSH game as a sequential test.
//!
//! Trial t scores a win when its setting pair is one of the selection's
//! four cells and `sign · x · y = +1`. With settings drawn uniformly and
//! independently of the past, any local model wins each trial with
//! probability at most 3/4 conditionally on the whole history, memory
//! included. The centered win count is then a supermartingale with bounded
//! increments, and the Azuma–Hoeffding inequality bounds its upper tail.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::chsh::ChshSelection;
use super::hypothesis::chi_square_independence;
use super::TestReport;
use crate::error::{Error, Result};
use crate::trial::TrialRecord;

/// Level below which a settings check raises a warning (two-sided 4σ).
const SETTINGS_ALARM: f64 = 6.3e-5;

/// (wins, selected trials). A selected trial without both detections is
/// a loss.
pub fn game_wins(log: &[TrialRecord], sel: &ChshSelection) -> (u64, u64) {
    let mut wins = 0;
    let mut n = 0;
    for r in log {
        if let Some(sign) = sel.sign_for(r.a, r.b) {
            n += 1;
            if r.product().map(|xy| xy * sign) == Some(1) {
                wins += 1;
            }
        }
    }
    (wins, n)
}

/// Empirical checks that settings look uniform and memoryless: per-party
/// balance between the two selected keys, and lag-1 dependence between
/// consecutive selected cells. Returns one message per failed check.
pub fn settings_uniformity(log: &[TrialRecord], sel: &ChshSelection) -> Vec<String> {
    let cells: Vec<usize> = log.iter().filter_map(|r| sel.cells().iter().position(|&c| c == (r.a, r.b))).collect();
    let mut warnings = Vec::new();
    let n = cells.len() as f64;
    if cells.len() < 2 {
        return warnings;
    }
    for (name, first) in [("alice", [0usize, 1]), ("bob", [0, 2])] {
        let hits = cells.iter().filter(|c| first.contains(c)).count() as f64;
        let z = (hits - n / 2.0).abs() / (n / 4.0).sqrt();
        let p = 2.0 * Normal::standard().sf(z);
        if p < SETTINGS_ALARM {
            warnings.push(format!("{name} settings unbalanced (p = {p:.3e})"));
        }
    }
    let pairs: Vec<Vec<usize>> = cells.windows(2).map(|w| vec![w[0], w[1]]).collect();
    if let Ok(rep) = chi_square_independence(&pairs, &[4, 4]) {
        if rep.p_value < SETTINGS_ALARM {
            warnings.push(format!("consecutive settings are dependent (p = {:.3e})", rep.p_value));
        }
    }
    warnings
}

/// `p = exp(−2N·max(0, ŵ − 3/4)²)` for the CHSH game score, with
/// `Ŝ = 8ŵ − 4` as the estimate.
pub fn martingale_pvalue(log: &[TrialRecord], sel: &ChshSelection) -> Result<TestReport> {
    let (wins, n) = game_wins(log, sel);
    if n == 0 {
        return Err(Error::Empty("no trials at the selected settings"));
    }
    let w = wins as f64 / n as f64;
    let excess = (w - 0.75).max(0.0);
    let ln_p = -2.0 * n as f64 * excess * excess;
    let mut rep = TestReport::new("martingale-chsh-game", w, 0.75, ln_p.exp(), n);
    rep.ln_p_value = Some(ln_p);
    rep.estimate = Some(8.0 * w - 4.0);
    rep.warnings = settings_uniformity(log, sel);
    Ok(rep)
}

/// The textbook i.i.d. test: Ŝ from per-cell ratio estimates, its
/// standard error from `Σ (1 − Ê²)/n_c`, one-sided at 5%.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaiveZ {
    pub s_hat: f64,
    pub se: f64,
    pub z: f64,
    pub reject: bool,
}

pub fn naive_z_test(log: &[TrialRecord], sel: &ChshSelection) -> Result<NaiveZ> {
    let mut sum = [0i64; 4];
    let mut cnt = [0u64; 4];
    for r in log {
        if let (Some(m), Some(xy)) = (sel.cells().iter().position(|&c| c == (r.a, r.b)), r.product()) {
            sum[m] += i64::from(xy);
            cnt[m] += 1;
        }
    }
    let mut s_hat = 0.0;
    let mut var = 0.0;
    for m in 0..4 {
        if cnt[m] == 0 {
            let (a, b) = sel.cells()[m];
            return Err(Error::MissingCell(a, b));
        }
        let e = sum[m] as f64 / cnt[m] as f64;
        s_hat += f64::from(sel.signs[m]) * e;
        var += (1.0 - e * e) / cnt[m] as f64;
    }
    let se = var.sqrt();
    let z = if se > 0.0 {
        (s_hat - 2.0) / se
    } else if s_hat > 2.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    Ok(NaiveZ { s_hat, se, z, reject: z > 1.6448536269514722 })
}

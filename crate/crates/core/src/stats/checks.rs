//! No-signalling and Fine representability checks on correlation tables.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::chsh::{all_chsh, ChshSelection};
use super::TestReport;
use crate::error::Result;
use crate::trial::{CorrelationTable, Party};

/// Rounding allowance on the CHSH bound for tables of exact values.
pub const FINE_SLACK: f64 = 1e-12;

fn normal_sf(z: f64) -> f64 {
    Normal::standard().sf(z)
}

/// Largest spread of one party's marginal across the other party's keys,
/// in pooled standard errors.
fn spread_z(corr: &CorrelationTable, party: Party) -> (f64, u64, usize) {
    let (rows, cols) = match party {
        Party::Alice => (corr.k, corr.l),
        Party::Bob => (corr.l, corr.k),
    };
    let mut worst: f64 = 0.0;
    let mut n_total = 0;
    for r in 1..=rows {
        let mut pts = Vec::with_capacity(cols);
        for c in 1..=cols {
            let (m, n) = match party {
                Party::Alice => (corr.marg_x(r, c), corr.n(r, c)),
                Party::Bob => (corr.marg_y(c, r), corr.n(c, r)),
            };
            n_total += n;
            if let Some(m) = m {
                pts.push((m, n.max(1) as f64));
            }
        }
        if pts.len() < 2 {
            continue;
        }
        let lo = pts.iter().copied().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
        let hi = pts.iter().copied().max_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
        let spread = hi.0 - lo.0;
        if spread == 0.0 {
            continue;
        }
        let pooled = (hi.0 * hi.1 + lo.0 * lo.1) / (hi.1 + lo.1);
        let se = (pooled * (1.0 - pooled) * (1.0 / hi.1 + 1.0 / lo.1)).sqrt();
        let z = if se > 0.0 { spread / se } else { f64::INFINITY };
        worst = worst.max(z);
    }
    (worst, n_total, rows)
}

/// Per party: the worst spread of its outcome marginal across the other
/// party's keys, in pooled standard errors. Passes below `tol_sigma`.
/// The p-value is the two-sided normal tail, Bonferroni-scaled by the
/// number of keys.
pub fn no_signalling_check(corr: &CorrelationTable, tol_sigma: f64) -> [TestReport; 2] {
    [Party::Alice, Party::Bob].map(|party| {
        let (z, n, rows) = spread_z(corr, party);
        let p = (2.0 * normal_sf(z) * rows as f64).min(1.0);
        let mut rep = TestReport::new(format!("no-signalling:{party:?}").to_lowercase(), z, tol_sigma, p, n);
        rep.pass = Some(z < tol_sigma);
        rep
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineVerdict {
    pub representable: bool,
    pub values: Vec<(ChshSelection, f64)>,
    pub violated: Vec<ChshSelection>,
}

/// Evaluates the eight one-sided CHSH inequalities on keys (p, q, r, s).
/// Given no-signalling, the table has a local hidden-variable model iff
/// none exceeds 2.
pub fn fine_lhv_check_at(corr: &CorrelationTable, p: usize, q: usize, r: usize, s: usize) -> Result<FineVerdict> {
    let values = all_chsh(corr, p, q, r, s)?;
    let violated: Vec<ChshSelection> = values.iter().filter(|(_, v)| *v > 2.0 + FINE_SLACK).map(|(s, _)| *s).collect();
    Ok(FineVerdict { representable: violated.is_empty(), values, violated })
}

/// [`fine_lhv_check_at`] on keys 1 and 2 of each party.
pub fn fine_lhv_check(corr: &CorrelationTable) -> Result<FineVerdict> {
    fine_lhv_check_at(corr, 1, 1, 2, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{chsh_optimal_settings, ModelKind, ModelSpec};

    fn exact(m: &ModelSpec, n: u64) -> CorrelationTable {
        CorrelationTable::from_exact(m.k(), m.l(), |i, j| m.exact_cell(i, j).unwrap(), n)
    }

    #[test]
    fn exact_tables_have_zero_spread() {
        let (a, b) = chsh_optimal_settings();
        let m = ModelSpec::new(ModelKind::Singlet, a, b).unwrap();
        for r in no_signalling_check(&exact(&m, 1000), 4.0) {
            assert_eq!(r.statistic, 0.0);
            assert_eq!(r.pass, Some(true));
        }
    }

    #[test]
    fn signalling_table_fails() {
        let t = CorrelationTable::from_exact(2, 2, |_, j| (0.0, if j == 1 { 0.4 } else { 0.6 }, 0.5), 100_000);
        let [a, b] = no_signalling_check(&t, 4.0);
        assert_eq!(a.pass, Some(false));
        assert!(a.p_value < 1e-10);
        assert_eq!(b.pass, Some(true));
    }

    #[test]
    fn fine_examples() {
        let (a, b) = chsh_optimal_settings();
        let singlet = ModelSpec::new(ModelKind::Singlet, a.clone(), b.clone()).unwrap();
        let v = fine_lhv_check(&exact(&singlet, 1)).unwrap();
        assert!(!v.representable);
        assert_eq!(v.violated, vec![ChshSelection::standard()]);

        let lhv = ModelSpec::new(ModelKind::SignLhv, a, b).unwrap();
        assert!(fine_lhv_check(&exact(&lhv, 1)).unwrap().representable);

        let zero = CorrelationTable::from_exact(2, 2, |_, _| (0.0, 0.5, 0.5), 1);
        assert!(fine_lhv_check(&zero).unwrap().representable);
    }
}

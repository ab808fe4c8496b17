//! CHSH and Clauser–Horne combinations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::trial::{CorrelationTable, CountsTable, Outcome};

/// Four setting pairs and their signs. Cells are ordered
/// `(p,q), (p,s), (r,q), (r,s)`. The signs multiply to −1, which leaves
/// exactly eight one-sided forms per quadruple of keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChshSelection {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub s: usize,
    pub signs: [i8; 4],
}

impl ChshSelection {
    pub fn new(p: usize, q: usize, r: usize, s: usize, signs: [i8; 4]) -> Result<Self> {
        if p == r || q == s {
            return Err(Error::InvalidModel(format!("selection needs p != r and q != s, got ({p},{q},{r},{s})")));
        }
        if p == 0 || q == 0 || r == 0 || s == 0 {
            return Err(Error::InvalidModel("setting indices are 1-based".into()));
        }
        if signs.iter().any(|v| v.abs() != 1) || signs.iter().product::<i8>() != -1 {
            return Err(Error::InvalidModel(format!("signs {signs:?} must be ±1 with product −1")));
        }
        Ok(Self { p, q, r, s, signs })
    }

    /// `E11 + E12 + E21 − E22` on keys 1 and 2.
    pub fn standard() -> Self {
        Self { p: 1, q: 1, r: 2, s: 2, signs: [1, 1, 1, -1] }
    }

    /// The selection with only cell `m` negated.
    pub fn with_negated(p: usize, q: usize, r: usize, s: usize, m: usize) -> Result<Self> {
        let mut signs = [1; 4];
        signs[m] = -1;
        Self::new(p, q, r, s, signs)
    }

    /// All eight one-sided forms: cell `m` negated (entries 0..4), then the
    /// negatives of those (entries 4..8).
    pub fn one_sided(p: usize, q: usize, r: usize, s: usize) -> Result<[Self; 8]> {
        let base: Vec<Self> = (0..4).map(|m| Self::with_negated(p, q, r, s, m)).collect::<Result<_>>()?;
        Ok(std::array::from_fn(|k| {
            let b = base[k % 4];
            if k < 4 {
                b
            } else {
                Self { signs: b.signs.map(|v| -v), ..b }
            }
        }))
    }

    pub fn cells(&self) -> [(usize, usize); 4] {
        [(self.p, self.q), (self.p, self.s), (self.r, self.q), (self.r, self.s)]
    }

    /// Sign of setting pair `(a, b)`, or `None` if it is not one of the four.
    pub fn sign_for(&self, a: usize, b: usize) -> Option<i8> {
        self.cells().iter().position(|&c| c == (a, b)).map(|m| self.signs[m])
    }
}

impl fmt::Display for ChshSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let signs: String = self.signs.iter().map(|v| if *v > 0 { '+' } else { '-' }).collect();
        write!(f, "({},{},{},{}):{signs}", self.p, self.q, self.r, self.s)
    }
}

/// Signed sum of the four correlations of `sel`.
pub fn chsh_statistic(corr: &CorrelationTable, sel: &ChshSelection) -> Result<f64> {
    let mut s = 0.0;
    for (m, (a, b)) in sel.cells().into_iter().enumerate() {
        if a > corr.k || b > corr.l {
            return Err(Error::MissingCell(a, b));
        }
        let e = corr.e(a, b).ok_or(Error::MissingCell(a, b))?;
        s += f64::from(sel.signs[m]) * e;
    }
    Ok(s)
}

/// Every one-sided form over keys (p, q, r, s).
pub fn all_chsh(corr: &CorrelationTable, p: usize, q: usize, r: usize, s: usize) -> Result<Vec<(ChshSelection, f64)>> {
    ChshSelection::one_sided(p, q, r, s)?.into_iter().map(|sel| Ok((sel, chsh_statistic(corr, &sel)?))).collect()
}

/// Keys of a Clauser–Horne combination: Alice's a, a′ and Bob's b, b′.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChQuad {
    pub a: usize,
    pub a_prime: usize,
    pub b: usize,
    pub b_prime: usize,
}

impl ChQuad {
    pub fn standard() -> Self {
        Self { a: 1, a_prime: 2, b: 1, b_prime: 2 }
    }

    /// The CHSH selection with the same sign pattern, negating (a, b′).
    pub fn chsh(&self) -> ChshSelection {
        ChshSelection { p: self.a, q: self.b, r: self.a_prime, s: self.b_prime, signs: [1, -1, 1, 1] }
    }
}

/// Signed fractions `sign · num / den` with integer parts, so that
/// identities between statistics can be checked in exact arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fractions(pub Vec<(i64, u64)>);

impl Fractions {
    pub fn value(&self) -> f64 {
        self.0.iter().map(|&(n, d)| n as f64 / d as f64).sum()
    }
}

fn emitted(counts: &CountsTable, i: usize, j: usize) -> Result<u64> {
    if i == 0 || j == 0 || i > counts.k || j > counts.l {
        return Err(Error::MissingCell(i, j));
    }
    match counts.cell(i, j).emitted {
        0 => Err(Error::ZeroDenominator("no trials emitted at a selected setting pair")),
        n => Ok(n),
    }
}

/// Terms of `S_xy = p_xy(a,b) − p_xy(a,b′) + p_xy(a′,b) + p_xy(a′,b′) − p_x(a′) − p_y(b)`.
/// Every probability is normalized by emitted trials, undetected ones
/// included. `p_x(a′)` pools Alice's detections over both of Bob's keys,
/// `p_y(b)` pools Bob's over both of Alice's.
pub fn ch_fractions(counts: &CountsTable, quad: &ChQuad, x: Outcome, y: Outcome) -> Result<Fractions> {
    let sel = quad.chsh();
    let mut terms = Vec::with_capacity(6);
    for (m, (i, j)) in sel.cells().into_iter().enumerate() {
        let n = emitted(counts, i, j)?;
        terms.push((i64::from(sel.signs[m]) * counts.cell(i, j).pair(x, y) as i64, n));
    }
    let (mut num, mut den) = (0, 0);
    for j in [quad.b, quad.b_prime] {
        den += emitted(counts, quad.a_prime, j)?;
        num += counts.cell(quad.a_prime, j).alice_detected(x);
    }
    terms.push((-(num as i64), den));
    let (mut num, mut den) = (0, 0);
    for i in [quad.a, quad.a_prime] {
        den += emitted(counts, i, quad.b)?;
        num += counts.cell(i, quad.b).bob_detected(y);
    }
    terms.push((-(num as i64), den));
    Ok(Fractions(terms))
}

pub fn ch_statistic(counts: &CountsTable, quad: &ChQuad, x: Outcome, y: Outcome) -> Result<f64> {
    Ok(ch_fractions(counts, quad, x, y)?.value())
}

/// CHSH value with each correlation normalized by emitted trials,
/// `[N(++) + N(−−) − N(+−) − N(−+)] / N_emitted`, as integer fractions.
/// With this normalization `S = S++ + S−− − S+− − S−+` holds exactly.
pub fn chsh_emission(counts: &CountsTable, sel: &ChshSelection) -> Result<Fractions> {
    let mut terms = Vec::with_capacity(4);
    for (m, (i, j)) in sel.cells().into_iter().enumerate() {
        let n = emitted(counts, i, j)?;
        let [[pp, pm], [mp, mm]] = counts.cell(i, j).pairs;
        let e = (pp + mm) as i64 - (pm + mp) as i64;
        terms.push((i64::from(sel.signs[m]) * e, n));
    }
    Ok(Fractions(terms))
}

/// Exact `S_xy` from a model's outcome law at each setting pair.
pub fn ch_exact(model: &ModelSpec, quad: &ChQuad, x: Outcome, y: Outcome) -> Result<f64> {
    let sel = quad.chsh();
    let mut s = 0.0;
    for (m, (i, j)) in sel.cells().into_iter().enumerate() {
        s += f64::from(sel.signs[m]) * model.outcome_dist(i, j)?.prob(Some(x), Some(y));
    }
    s -= model.outcome_dist(quad.a_prime, quad.b)?.alice(x);
    s -= model.outcome_dist(quad.a, quad.b)?.bob(y);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{aspect_settings, ModelKind};
    use crate::trial::{correlations, CellCounts};
    use Outcome::{Minus as M, Plus as P};

    fn table(es: [f64; 4]) -> CorrelationTable {
        CorrelationTable::from_exact(2, 2, |i, j| (es[(i - 1) * 2 + (j - 1)], 0.5, 0.5), 1)
    }

    #[test]
    fn chsh_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = chsh_statistic(&table([h, h, h, -h]), &ChshSelection::standard()).unwrap();
        assert!((s - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(chsh_statistic(&table([0.0; 4]), &ChshSelection::standard()).unwrap(), 0.0);
        assert_eq!(chsh_statistic(&table([1.0; 4]), &ChshSelection::standard()).unwrap(), 2.0);
    }

    #[test]
    fn selection_validation() {
        assert!(ChshSelection::new(1, 1, 1, 2, [1, 1, 1, -1]).is_err());
        assert!(ChshSelection::new(1, 1, 2, 2, [1, 1, 1, 1]).is_err());
        assert!(ChshSelection::new(1, 1, 2, 2, [-1, -1, 1, -1]).is_ok());
        let forms = ChshSelection::one_sided(1, 1, 2, 2).unwrap();
        let distinct: std::collections::HashSet<_> = forms.iter().map(|f| f.signs).collect();
        assert_eq!(distinct.len(), 8);
        assert_eq!(forms[3], ChshSelection::standard());
        assert_eq!(ChshSelection::standard().to_string(), "(1,1,2,2):+++-");
    }

    #[test]
    fn missing_cell() {
        let mut c = CountsTable::zeros(2, 2);
        c.cell_mut(1, 1).pairs = [[5, 0], [0, 5]];
        let corr = correlations(&c);
        assert!(matches!(chsh_statistic(&corr, &ChshSelection::standard()), Err(Error::MissingCell(1, 2))));
    }

    #[test]
    fn aspect_exact_value() {
        let (a, b) = aspect_settings();
        let m = ModelSpec::new(ModelKind::PhotonPair, a, b).unwrap();
        let s = ch_exact(&m, &ChQuad::standard(), P, P).unwrap();
        assert!((s - (2f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn product_state_respects_ch_bound() {
        let (a, b) = aspect_settings();
        for deg in [0.0, 10.0, 33.0, 71.0] {
            let mut aa = a.clone();
            aa[0] = crate::direction::Direction::from_degrees(deg);
            let m = ModelSpec::new(ModelKind::Eberhard { r: 0.0, efficiency: 1.0 }, aa, b.clone()).unwrap();
            for x in [P, M] {
                for y in [P, M] {
                    assert!(ch_exact(&m, &ChQuad::standard(), x, y).unwrap() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn ch_counts_small_table() {
        let mut t = CountsTable::zeros(2, 2);
        *t.cell_mut(1, 1) = CellCounts { pairs: [[4, 0], [0, 4]], single_a: [1, 0], single_b: [0, 1], emitted: 10 };
        *t.cell_mut(1, 2) = CellCounts { pairs: [[1, 3], [3, 1]], single_a: [0, 0], single_b: [0, 0], emitted: 10 };
        *t.cell_mut(2, 1) = CellCounts { pairs: [[4, 1], [1, 4]], single_a: [0, 0], single_b: [0, 0], emitted: 10 };
        *t.cell_mut(2, 2) = CellCounts { pairs: [[3, 1], [1, 3]], single_a: [2, 0], single_b: [0, 0], emitted: 10 };
        // p++: 4/10 − 1/10 + 4/10 + 3/10; p_A+(a′) = (5 + 6)/20; p_B+(b) = (4 + 5)/20.
        let want = 0.4 - 0.1 + 0.4 + 0.3 - 11.0 / 20.0 - 9.0 / 20.0;
        assert!((ch_statistic(&t, &ChQuad::standard(), P, P).unwrap() - want).abs() < 1e-15);
        let t0 = CountsTable::zeros(2, 2);
        assert!(ch_statistic(&t0, &ChQuad::standard(), P, P).is_err());
    }
}

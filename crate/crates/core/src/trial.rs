//! Trial records, tallies and correlation estimates.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::LoopState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

/// A key label `a_i` or `b_j`; `index` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SettingLabel {
    pub party: Party,
    pub index: usize,
}

impl SettingLabel {
    pub fn check(&self, trial: u64, max: usize) -> Result<()> {
        if self.index == 0 || self.index > max {
            return Err(Error::LabelOutOfGrid { trial, party: self.party, index: self.index, max });
        }
        Ok(())
    }
}

/// A detected binary outcome. No-detection is `None` at the use sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn from_sign(positive: bool) -> Self {
        if positive {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }

    fn slot(self) -> usize {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
        }
    }
}

impl TryFrom<i8> for Outcome {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            other => Err(format!("outcome must be -1 or 1, got {other}")),
        }
    }
}

impl From<Outcome> for i8 {
    fn from(o: Outcome) -> i8 {
        o.value()
    }
}

/// Debug-only trace of a model's hidden state. Never read by tallying.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HiddenTrace {
    Loop(LoopState),
    Spin { coords: Vec<f64> },
}

/// One trial. Serialized as one JSONL line:
/// `{"i":…,"a":…,"b":…,"x":-1|1|null,"y":…,"ta":…,"tb":…}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(rename = "i")]
    pub trial_index: u64,
    /// Alice's 1-based key index.
    pub a: usize,
    /// Bob's 1-based key index.
    pub b: usize,
    pub x: Option<Outcome>,
    pub y: Option<Outcome>,
    #[serde(rename = "ta", default, skip_serializing_if = "Option::is_none")]
    pub t_a: Option<f64>,
    #[serde(rename = "tb", default, skip_serializing_if = "Option::is_none")]
    pub t_b: Option<f64>,
    #[serde(rename = "h", default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<HiddenTrace>,
}

impl TrialRecord {
    pub fn new(trial_index: u64, a: usize, b: usize, x: Option<Outcome>, y: Option<Outcome>) -> Self {
        Self { trial_index, a, b, x, y, t_a: None, t_b: None, hidden: None }
    }

    pub fn alice(&self) -> SettingLabel {
        SettingLabel { party: Party::Alice, index: self.a }
    }

    pub fn bob(&self) -> SettingLabel {
        SettingLabel { party: Party::Bob, index: self.b }
    }

    /// x·y when both sides detected.
    pub fn product(&self) -> Option<i8> {
        Some(self.x?.value() * self.y?.value())
    }
}

/// Tallies for one setting pair `(a_i, b_j)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    /// Coincidences indexed `[x][y]`, slot 0 = +1, slot 1 = −1.
    pub pairs: [[u64; 2]; 2],
    /// Trials where only Alice detected, by her outcome.
    pub single_a: [u64; 2],
    /// Trials where only Bob detected, by his outcome.
    pub single_b: [u64; 2],
    /// Every trial emitted at this setting pair, detected or not.
    pub emitted: u64,
}

impl CellCounts {
    pub fn pair(&self, x: Outcome, y: Outcome) -> u64 {
        self.pairs[x.slot()][y.slot()]
    }

    pub fn coincidences(&self) -> u64 {
        self.pairs.iter().flatten().sum()
    }

    /// Alice detected `x`, Bob in any state.
    pub fn alice_detected(&self, x: Outcome) -> u64 {
        self.pairs[x.slot()].iter().sum::<u64>() + self.single_a[x.slot()]
    }

    /// Bob detected `y`, Alice in any state.
    pub fn bob_detected(&self, y: Outcome) -> u64 {
        self.pairs[0][y.slot()] + self.pairs[1][y.slot()] + self.single_b[y.slot()]
    }

    fn add(&mut self, o: &CellCounts) {
        for x in 0..2 {
            for y in 0..2 {
                self.pairs[x][y] += o.pairs[x][y];
            }
            self.single_a[x] += o.single_a[x];
            self.single_b[x] += o.single_b[x];
        }
        self.emitted += o.emitted;
    }
}

/// N(a_i, b_j, X, Y) over a k × l setting grid, plus singles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsTable {
    pub k: usize,
    pub l: usize,
    cells: Vec<CellCounts>,
}

impl CountsTable {
    pub fn zeros(k: usize, l: usize) -> Self {
        Self { k, l, cells: vec![CellCounts::default(); k * l] }
    }

    /// 1-based cell access.
    pub fn cell(&self, i: usize, j: usize) -> &CellCounts {
        &self.cells[(i - 1) * self.l + (j - 1)]
    }

    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut CellCounts {
        &mut self.cells[(i - 1) * self.l + (j - 1)]
    }

    pub fn n_emitted(&self) -> u64 {
        self.cells.iter().map(|c| c.emitted).sum()
    }

    pub fn total_coincidences(&self) -> u64 {
        self.cells.iter().map(|c| c.coincidences()).sum()
    }

    /// Adds one record without label checks; callers validate first.
    pub(crate) fn add_unchecked(&mut self, r: &TrialRecord) {
        let c = self.cell_mut(r.a, r.b);
        c.emitted += 1;
        match (r.x, r.y) {
            (Some(x), Some(y)) => c.pairs[x.slot()][y.slot()] += 1,
            (Some(x), None) => c.single_a[x.slot()] += 1,
            (None, Some(y)) => c.single_b[y.slot()] += 1,
            (None, None) => {}
        }
    }

    pub fn push(&mut self, r: &TrialRecord) -> Result<()> {
        r.alice().check(r.trial_index, self.k)?;
        r.bob().check(r.trial_index, self.l)?;
        self.add_unchecked(r);
        Ok(())
    }

    /// Pointwise sum; tables from disjoint shards of one log merge into the
    /// table of the whole log.
    pub fn merge(mut self, other: &CountsTable) -> Result<Self> {
        if self.k != other.k || self.l != other.l {
            return Err(Error::DimensionMismatch(self.k * self.l, other.k * other.l));
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.add(b);
        }
        Ok(self)
    }

    /// CSV with header `i,j,npp,npm,nmp,nmm,e`; `e` is empty for cells
    /// without coincidences.
    pub fn to_csv(&self) -> String {
        let corr = correlations(self);
        let mut out = String::from("i,j,npp,npm,nmp,nmm,e\n");
        for i in 1..=self.k {
            for j in 1..=self.l {
                let c = self.cell(i, j);
                let e = corr.e(i, j).map(|e| format!("{e:.12}")).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{i},{j},{},{},{},{},{e}",
                    c.pairs[0][0], c.pairs[0][1], c.pairs[1][0], c.pairs[1][1]
                );
            }
        }
        out
    }
}

/// Counts every record into a k × l table. Coincidences need both
/// detections; one-sided detections go to the singles.
pub fn tally<'a, I>(log: I, k: usize, l: usize) -> Result<CountsTable>
where
    I: IntoIterator<Item = &'a TrialRecord>,
{
    let mut t = CountsTable::zeros(k, l);
    for r in log {
        t.push(r)?;
    }
    Ok(t)
}

/// Sharded [`tally`]; same result in any schedule.
pub fn tally_slice(log: &[TrialRecord], k: usize, l: usize) -> Result<CountsTable> {
    if let Some(bad) = log.iter().find(|r| r.a == 0 || r.a > k || r.b == 0 || r.b > l) {
        bad.alice().check(bad.trial_index, k)?;
        bad.bob().check(bad.trial_index, l)?;
    }
    const CHUNK: usize = 1 << 14;
    let chunks: Vec<&[TrialRecord]> = log.chunks(CHUNK).collect();
    let parts = crate::par::map_slice(&chunks, |chunk| {
        let mut t = CountsTable::zeros(k, l);
        chunk.iter().for_each(|r| t.add_unchecked(r));
        t
    });
    parts.into_iter().try_fold(CountsTable::zeros(k, l), |acc, p| acc.merge(&p))
}

/// Estimated E_ab(XY) and marginals per setting pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub k: usize,
    pub l: usize,
    e: Vec<Option<f64>>,
    marg_x: Vec<Option<f64>>,
    marg_y: Vec<Option<f64>>,
    n: Vec<u64>,
}

impl CorrelationTable {
    /// A table of exact values with a nominal sample size per cell.
    pub fn from_exact(k: usize, l: usize, f: impl Fn(usize, usize) -> (f64, f64, f64), n: u64) -> Self {
        let mut e = Vec::with_capacity(k * l);
        let mut mx = Vec::with_capacity(k * l);
        let mut my = Vec::with_capacity(k * l);
        for i in 1..=k {
            for j in 1..=l {
                let (c, x, y) = f(i, j);
                e.push(Some(c));
                mx.push(Some(x));
                my.push(Some(y));
            }
        }
        Self { k, l, e, marg_x: mx, marg_y: my, n: vec![n; k * l] }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        (i - 1) * self.l + (j - 1)
    }

    pub fn e(&self, i: usize, j: usize) -> Option<f64> {
        self.e[self.idx(i, j)]
    }

    /// P(X = +1 | a_i, b_j) among coincidences.
    pub fn marg_x(&self, i: usize, j: usize) -> Option<f64> {
        self.marg_x[self.idx(i, j)]
    }

    pub fn marg_y(&self, i: usize, j: usize) -> Option<f64> {
        self.marg_y[self.idx(i, j)]
    }

    pub fn n(&self, i: usize, j: usize) -> u64 {
        self.n[self.idx(i, j)]
    }

    pub fn present_values(&self) -> Vec<f64> {
        self.e.iter().flatten().copied().collect()
    }
}

/// e = [N(+,+) + N(−,−) − N(+,−) − N(−,+)] / n over coincidences.
pub fn correlations(counts: &CountsTable) -> CorrelationTable {
    let mut e = Vec::with_capacity(counts.k * counts.l);
    let mut mx = Vec::with_capacity(e.capacity());
    let mut my = Vec::with_capacity(e.capacity());
    let mut ns = Vec::with_capacity(e.capacity());
    for i in 1..=counts.k {
        for j in 1..=counts.l {
            let c = counts.cell(i, j);
            let n = c.coincidences();
            ns.push(n);
            if n == 0 {
                e.push(None);
                mx.push(None);
                my.push(None);
                continue;
            }
            let [[pp, pm], [mp, mm]] = c.pairs;
            let nf = n as f64;
            e.push(Some(((pp + mm) as f64 - (pm + mp) as f64) / nf));
            mx.push(Some((pp + pm) as f64 / nf));
            my.push(Some((pp + mp) as f64 / nf));
        }
    }
    CorrelationTable { k: counts.k, l: counts.l, e, marg_x: mx, marg_y: my, n: ns }
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write>(mut w: W, log: &[TrialRecord]) -> Result<()> {
    for r in log {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a JSONL log; blank lines are skipped, malformed lines are errors
/// carrying their 1-based line number.
pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrialRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: n + 1, detail: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

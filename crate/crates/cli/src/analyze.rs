use std::io::BufRead;

use bellkit::nogo::Message;
use bellkit::stats::{
    all_chsh, ch_statistic, chsh_emission, fine_lhv_check_at, independence_tests, martingale_pvalue, naive_z_test,
    no_signalling_check, Arity, ChQuad, ChshSelection, NaiveZ, TestReport,
};
use bellkit::trial::{correlations, tally_slice, Party};
use bellkit::{Error, Outcome, TrialRecord};
use serde::Serialize;

/// Reads a trial log. Lines carrying a `kind` field are harness messages;
/// of those only Alice's VERDICTs are kept, so a `nogo` transcript reads
/// as the log of its trials.
pub fn read_log<R: BufRead>(r: R) -> bellkit::Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |e: serde_json::Error| Error::Parse { line: n + 1, detail: e.to_string() };
        let v: serde_json::Value = serde_json::from_str(&line).map_err(bad)?;
        if v.get("kind").is_some() {
            if let Message::Verdict { party: Party::Alice, record, .. } = serde_json::from_value(v).map_err(bad)? {
                out.push(record);
            }
        } else {
            out.push(serde_json::from_value(v).map_err(bad)?);
        }
    }
    Ok(out)
}

#[derive(Serialize)]
pub struct Cell {
    i: usize,
    j: usize,
    emitted: u64,
    coincidences: u64,
    e: Option<f64>,
    p_x_plus: Option<f64>,
    p_y_plus: Option<f64>,
}

#[derive(Serialize)]
pub struct ChshValue {
    selection: String,
    value: f64,
}

#[derive(Serialize)]
pub struct ChValue {
    signature: String,
    value: f64,
}

#[derive(Serialize)]
pub struct Report {
    n_trials: usize,
    k: usize,
    l: usize,
    correlations: Vec<Cell>,
    chsh: Vec<ChshValue>,
    /// CHSH normalized by emitted trials; equals S++ + S−− − S+− − S−+.
    chsh_emitted: Option<f64>,
    ch: Vec<ChValue>,
    lhv_representable: Option<bool>,
    nosignalling: Vec<TestReport>,
    martingale_p: Option<f64>,
    martingale: Option<TestReport>,
    naive_z: Option<NaiveZ>,
    tests: Vec<TestReport>,
    notes: Vec<String>,
}

pub fn analyze(log: &[TrialRecord], sel: ChshSelection, arity: Arity) -> bellkit::Result<Report> {
    if log.is_empty() {
        return Err(Error::Empty("log has no trials"));
    }
    let k = log.iter().map(|r| r.a).max().unwrap_or(0).max(sel.p).max(sel.r);
    let l = log.iter().map(|r| r.b).max().unwrap_or(0).max(sel.q).max(sel.s);
    let counts = tally_slice(log, k, l)?;
    if counts.total_coincidences() == 0 {
        return Err(Error::Empty("log has no coincidences"));
    }
    let corr = correlations(&counts);
    let mut notes = Vec::new();
    let mut cells = Vec::new();
    for i in 1..=k {
        for j in 1..=l {
            let c = counts.cell(i, j);
            cells.push(Cell {
                i,
                j,
                emitted: c.emitted,
                coincidences: c.coincidences(),
                e: corr.e(i, j),
                p_x_plus: corr.marg_x(i, j),
                p_y_plus: corr.marg_y(i, j),
            });
        }
    }
    let mut note = |what: &str, e: Error| notes.push(format!("{what}: {e}"));

    let chsh = match all_chsh(&corr, sel.p, sel.q, sel.r, sel.s) {
        Ok(v) => v.into_iter().map(|(s, value)| ChshValue { selection: s.to_string(), value }).collect(),
        Err(e) => {
            note("chsh", e);
            Vec::new()
        }
    };
    let quad = ChQuad { a: sel.p, a_prime: sel.r, b: sel.q, b_prime: sel.s };
    let chsh_emitted = match chsh_emission(&counts, &quad.chsh()) {
        Ok(f) => Some(f.value()),
        Err(e) => {
            note("chsh_emitted", e);
            None
        }
    };
    let mut ch = Vec::new();
    for (x, xs) in [(Outcome::Plus, '+'), (Outcome::Minus, '-')] {
        for (y, ys) in [(Outcome::Plus, '+'), (Outcome::Minus, '-')] {
            match ch_statistic(&counts, &quad, x, y) {
                Ok(value) => ch.push(ChValue { signature: format!("S{xs}{ys}"), value }),
                Err(e) => {
                    note("ch", e);
                    break;
                }
            }
        }
    }
    let lhv_representable = fine_lhv_check_at(&corr, sel.p, sel.q, sel.r, sel.s).ok().map(|v| v.representable);
    let martingale = martingale_pvalue(log, &sel).map_err(|e| note("martingale", e)).ok();
    let naive_z = naive_z_test(log, &sel).map_err(|e| note("naive_z", e)).ok();
    let tests = independence_tests(log, k, l, arity).map_err(|e| note("independence", e)).ok().unwrap_or_default();
    Ok(Report {
        n_trials: log.len(),
        k,
        l,
        correlations: cells,
        chsh,
        chsh_emitted,
        ch,
        lhv_representable,
        nosignalling: no_signalling_check(&corr, 4.0).to_vec(),
        martingale_p: martingale.as_ref().map(|m| m.p_value),
        martingale,
        naive_z,
        tests,
        notes,
    })
}

/// Counts table CSV for `--format csv`.
pub fn counts_csv(log: &[TrialRecord]) -> bellkit::Result<String> {
    if log.is_empty() {
        return Err(Error::Empty("log has no trials"));
    }
    let k = log.iter().map(|r| r.a).max().unwrap_or(1);
    let l = log.iter().map(|r| r.b).max().unwrap_or(1);
    Ok(tally_slice(log, k, l)?.to_csv())
}

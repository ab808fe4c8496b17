//! Goodness-of-fit tests: Kolmogorov–Smirnov against a uniform law and
//! chi-square tests of mutual independence on (A, B, X, Y).

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::TestReport;
use crate::error::{Error, Result};
use crate::trial::TrialRecord;

/// Survival function of the Kolmogorov distribution, P(K > λ).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series, fast for small λ.
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let t = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { t } else { -t };
        if t < 1e-300 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS test against Uniform[lo, hi] with the asymptotic
/// p-value (Stephens' small-sample scaling of the statistic).
pub fn ks_uniformity(values: &[f64], lo: f64, hi: f64) -> Result<TestReport> {
    if values.is_empty() {
        return Err(Error::Empty("ks values"));
    }
    if values.len() < 20 {
        return Err(Error::TooFew { what: "ks values", need: 20, got: values.len() });
    }
    if !(hi > lo) {
        return Err(Error::Domain { what: "ks support width", value: hi - lo, domain: "> 0" });
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    let p = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
    Ok(TestReport::new("ks-uniform", d, 0.0, p, v.len() as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variable {
    A,
    B,
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arity {
    Pair,
    Triple,
    Quad,
}

impl Arity {
    pub fn size(self) -> usize {
        match self {
            Arity::Pair => 2,
            Arity::Triple => 3,
            Arity::Quad => 4,
        }
    }
}

/// Pearson chi-square test that the coordinates of `samples` are mutually
/// independent. `levels[v]` is the number of values coordinate `v` takes.
/// Cells with expected count below 5 are pooled into one bin, which costs
/// degrees of freedom accordingly.
pub fn chi_square_independence(samples: &[Vec<usize>], levels: &[usize]) -> Result<TestReport> {
    if samples.is_empty() {
        return Err(Error::Empty("independence samples"));
    }
    let m = levels.len();
    let n = samples.len() as f64;
    let mut marg: Vec<Vec<f64>> = levels.iter().map(|&l| vec![0.0; l]).collect();
    let size: usize = levels.iter().product();
    let mut joint = vec![0.0; size];
    for s in samples {
        let mut idx = 0;
        for v in 0..m {
            marg[v][s[v]] += 1.0;
            idx = idx * levels[v] + s[v];
        }
        joint[idx] += 1.0;
    }
    let used: Vec<usize> = marg.iter().map(|mv| mv.iter().filter(|c| **c > 0.0).count()).collect();
    let mut chi2 = 0.0;
    let (mut pool_obs, mut pool_exp, mut pooled) = (0.0, 0.0, 0usize);
    let mut cells = 0usize;
    let mut smallest: Option<(f64, f64)> = None;
    for (idx, obs) in joint.iter().enumerate() {
        let mut rem = idx;
        let mut e = n;
        for v in (0..m).rev() {
            e *= marg[v][rem % levels[v]] / n;
            rem /= levels[v];
        }
        if e == 0.0 {
            continue;
        }
        cells += 1;
        if e < 5.0 {
            pool_obs += obs;
            pool_exp += e;
            pooled += 1;
        } else {
            chi2 += (obs - e).powi(2) / e;
            if smallest.is_none_or(|(_, se)| e < se) {
                smallest = Some((*obs, e));
            }
        }
    }
    let mut lost = pooled.saturating_sub(1);
    if pooled > 0 {
        match smallest {
            // Still sparse: fold the pool into the smallest regular cell.
            Some((o, e)) if pool_exp < 5.0 => {
                chi2 -= (o - e).powi(2) / e;
                chi2 += (o + pool_obs - e - pool_exp).powi(2) / (e + pool_exp);
                lost += 1;
            }
            _ => chi2 += (pool_obs - pool_exp).powi(2) / pool_exp,
        }
    }
    let full_df = cells as i64 - used.iter().map(|&u| u as i64).sum::<i64>() + (m as i64 - 1);
    let df = full_df - lost as i64;
    if df <= 0 {
        let mut rep = TestReport::new("chi2-independence", chi2, 0.0, 1.0, samples.len() as u64);
        rep.warnings.push("no degrees of freedom left after pooling".into());
        return Ok(rep);
    }
    let p = ChiSquared::new(df as f64).map(|d| d.sf(chi2)).unwrap_or(f64::NAN);
    let mut rep = TestReport::new("chi2-independence", chi2, df as f64, p, samples.len() as u64);
    if pooled > 0 {
        rep.warnings.push(format!("{pooled} sparse cells pooled"));
    }
    Ok(rep)
}

fn subsets(size: usize) -> Vec<Vec<Variable>> {
    let all = [Variable::A, Variable::B, Variable::X, Variable::Y];
    (0u8..16)
        .filter(|m| m.count_ones() as usize == size)
        .map(|m| (0..4).filter(|b| m >> (3 - b) & 1 == 1).map(|b| all[b]).collect())
        .collect()
}

/// Mutual-independence tests on every subset of (A, B, X, Y) of the given
/// size, over the trials where both sides detected.
pub fn independence_tests(log: &[TrialRecord], k: usize, l: usize, arity: Arity) -> Result<Vec<TestReport>> {
    let rows: Vec<[usize; 4]> = log
        .iter()
        .filter_map(|r| {
            let (x, y) = (r.x?, r.y?);
            Some([r.a - 1, r.b - 1, usize::from(x.value() < 0), usize::from(y.value() < 0)])
        })
        .collect();
    if rows.iter().any(|r| r[0] >= k || r[1] >= l) {
        return Err(Error::InvalidModel(format!("log has settings outside the {k}x{l} grid")));
    }
    let lv = [k, l, 2, 2];
    subsets(arity.size())
        .into_iter()
        .map(|vars| {
            let pos: Vec<usize> = vars.iter().map(|v| *v as usize).collect();
            let samples: Vec<Vec<usize>> = rows.iter().map(|r| pos.iter().map(|&p| r[p]).collect()).collect();
            let levels: Vec<usize> = pos.iter().map(|&p| lv[p]).collect();
            let mut rep = chi_square_independence(&samples, &levels)?;
            let names: Vec<String> = vars.iter().map(|v| format!("{v:?}")).collect();
            rep.method = format!("chi2-independence:{}", names.join(","));
            Ok(rep)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{tags, RngStream};
    use crate::trial::Outcome;
    use rand::Rng;

    #[test]
    fn kolmogorov_reference_values() {
        // Q(λ) at standard critical points.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(1.9495) - 0.001).abs() < 1e-4);
        // Both branches agree where they meet.
        let a = kolmogorov_sf(1.18 - 1e-9);
        let b = kolmogorov_sf(1.18 + 1e-9);
        assert!((a - b).abs() < 1e-7);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_examples() {
        let grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniformity(&grid, 0.0, 1.0).unwrap().p_value > 0.999);
        let flat = vec![0.3; 100];
        assert!(ks_uniformity(&flat, 0.0, 1.0).unwrap().p_value < 1e-10);
        assert!(ks_uniformity(&[], 0.0, 1.0).is_err());
        assert!(ks_uniformity(&[0.5; 10], 0.0, 1.0).is_err());
    }

    #[test]
    fn ks_null_is_calibrated() {
        let mut rejects = 0;
        for run in 0..400u64 {
            let mut rng = RngStream::new(run, tags::ORACLE).rng();
            let v: Vec<f64> = (0..200).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            if ks_uniformity(&v, -1.0, 1.0).unwrap().p_value < 0.05 {
                rejects += 1;
            }
        }
        // 5% ± 3σ of 400 draws.
        assert!(rejects < 20 + 14, "{rejects}");
    }

    fn synthetic(n: u64, dependent: bool) -> Vec<TrialRecord> {
        (0..n)
            .map(|t| {
                let mut rng = RngStream::new(9, tags::ORACLE).at(t).rng();
                let x = Outcome::from_sign(rng.gen());
                let y = if dependent { x } else { Outcome::from_sign(rng.gen()) };
                TrialRecord::new(t, rng.gen_range(1..=3), rng.gen_range(1..=3), Some(x), Some(y))
            })
            .collect()
    }

    #[test]
    fn independent_log_passes_everything() {
        let log = synthetic(20_000, false);
        for arity in [Arity::Pair, Arity::Triple, Arity::Quad] {
            for r in independence_tests(&log, 3, 3, arity).unwrap() {
                assert!(r.p_value > 1e-3, "{r:?}");
            }
        }
    }

    #[test]
    fn copied_outcome_rejects_xy_pair() {
        let log = synthetic(2000, true);
        let reps = independence_tests(&log, 3, 3, Arity::Pair).unwrap();
        let xy = reps.iter().find(|r| r.method.ends_with("X,Y")).unwrap();
        assert!(xy.p_value < 1e-10);
        assert_eq!(reps.len(), 6);
        assert_eq!(independence_tests(&log, 3, 3, Arity::Triple).unwrap().len(), 4);
    }

    #[test]
    fn pooling_keeps_dof_positive() {
        let samples: Vec<Vec<usize>> = (0..30).map(|i| vec![i % 3, (i / 3) % 2]).collect();
        let r = chi_square_independence(&samples, &[3, 2]).unwrap();
        assert!((0.0..=1.0).contains(&r.p_value));
    }
}

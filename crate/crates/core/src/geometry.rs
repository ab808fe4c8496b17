//! Hyperspherical cap geometry and the dimension-parameterized CHSH curve.
//!
//! `H_n(γ)` is twice the fraction of the n-sphere lying within angular
//! radius γ of a point. Using it as the weight of a setting pair turns the
//! CHSH expression into `S_n(γ) = 2 − 3·H_n(γ) + H_n(3γ)`, whose peak at
//! γ = π/4 is 2 for the circle, 2√2 for the ordinary sphere, and tends to 4
//! as n grows.

use std::f64::consts::PI;

use argmin::core::{CostFunction, Executor};
use argmin::solver::goldensectionsearch::GoldenSectionSearch;
use serde::{Deserialize, Serialize};

use crate::direction::{angle_between, wrap_two_pi, Direction};
use crate::error::{Error, Result};

/// Dimensions tabulated by [`table1`].
pub const TABLE1_DIMENSIONS: [usize; 12] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 20];

/// Circumference of the loop carrying the points A, B and Λ.
pub const LOOP_LENGTH: f64 = 4.0;

fn check_gamma(gamma: f64) -> Result<()> {
    // A few ulps of slack for values such as 3·(π/3).
    if !(-1e-15..=PI + 1e-12).contains(&gamma) || gamma.is_nan() {
        return Err(Error::Domain { what: "gamma", value: gamma, domain: "[0, pi]" });
    }
    Ok(())
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain { what: "sphere dimension", value: 0.0, domain: ">= 1" });
    }
    Ok(())
}

/// `I(γ, n) = ∫₀^γ sin^{n−1}θ dθ` by the integration-by-parts recursion
/// from the bases `γ` (n = 1) and `1 − cos γ` (n = 2).
pub fn cap_integral(gamma: f64, n: usize) -> Result<f64> {
    check_gamma(gamma)?;
    check_dim(n)?;
    let gamma = gamma.clamp(0.0, PI);
    let (s, c) = gamma.sin_cos();
    let mut m = if n % 2 == 1 { 1 } else { 2 };
    let mut acc = if m == 1 { gamma } else { 1.0 - c };
    while m < n {
        m += 2;
        let mf = m as f64;
        acc = -s.powi(m as i32 - 2) * c / (mf - 1.0) + (mf - 2.0) / (mf - 1.0) * acc;
    }
    Ok(acc)
}

/// `H_n(γ) = 2·I(γ, n) / I(π, n)`, a CDF scaled to [0, 2].
pub fn cdf_h(gamma: f64, n: usize) -> Result<f64> {
    let num = cap_integral(gamma, n)?;
    let den = cap_integral(PI, n)?;
    Ok((2.0 * num / den).clamp(0.0, 2.0))
}

/// The explicit forms of `H_n` for n = 1..=4; `None` otherwise.
pub fn closed_form_h(gamma: f64, n: usize) -> Option<f64> {
    let (s, c) = gamma.sin_cos();
    match n {
        1 => Some(2.0 / PI * gamma),
        2 => Some(1.0 - c),
        3 => Some(2.0 / PI * (gamma - s * c)),
        4 => Some(1.0 - c - 0.5 * s * s * c),
        _ => None,
    }
}

/// How the angle between two setting directions maps to a closeness angle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closeness {
    /// Spin-½ singlet: η = π − ∠(u, v).
    #[default]
    Singlet,
    /// Polarization: η = 2∠(u, v) reflected into [0, π], so that
    /// `1 − H_2(η) = cos 2∠`.
    Photon,
}

/// Closeness angle η(u, v) ∈ [0, π].
pub fn closeness_eta(u: &Direction, v: &Direction, convention: Closeness) -> Result<f64> {
    let angle = angle_between(u, v)?;
    Ok(eta_from_angle(angle, convention))
}

pub fn eta_from_angle(angle: f64, convention: Closeness) -> f64 {
    match convention {
        Closeness::Singlet => PI - angle,
        Closeness::Photon => fold_circle(2.0 * angle),
    }
}

/// Reduces an arc length on a great circle to the angle it subtends, in [0, π].
fn fold_circle(theta: f64) -> f64 {
    let t = wrap_two_pi(theta);
    if t > PI {
        2.0 * PI - t
    } else {
        t
    }
}

/// `S_n(γ) = 2 − 3·H_n(γ) + H_n(3γ)` for γ ∈ [0, π]. When 3γ leaves
/// [0, π] it is folded back onto the circle (θ ↦ 2π − θ, then mod 2π).
pub fn s_curve(gamma: f64, n: usize) -> Result<f64> {
    check_gamma(gamma)?;
    let g = gamma.clamp(0.0, PI);
    Ok(2.0 - 3.0 * cdf_h(g, n)? + cdf_h(fold_circle(3.0 * g), n)?)
}

/// Peak of `S_n`: (π/4, S_n(π/4)).
pub fn s_max(n: usize) -> Result<(f64, f64)> {
    let g = PI / 4.0;
    Ok((g, s_curve(g, n)?))
}

struct NegS(usize);

impl CostFunction for NegS {
    type Param = f64;
    type Output = f64;
    fn cost(&self, g: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok(-s_curve(*g, self.0)?)
    }
}

/// Locates the maximum of `S_n` on [0, π/3] numerically: a 64-point grid
/// brackets the peak, golden-section search refines it. Returns (γ*, S).
pub fn search_s_max(n: usize) -> Result<(f64, f64)> {
    check_dim(n)?;
    let hi = PI / 3.0;
    let grid = 64;
    let step = hi / grid as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..=grid {
        let v = s_curve(i as f64 * step, n)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let lo_b = best.0.saturating_sub(1) as f64 * step;
    let hi_b = ((best.0 + 1).min(grid)) as f64 * step;
    let init = best.0 as f64 * step;
    let solver = GoldenSectionSearch::new(lo_b, hi_b)
        .and_then(|s| s.with_tolerance(1e-12))
        .map_err(|e| Error::InvalidModel(e.to_string()))?;
    let res = Executor::new(NegS(n), solver)
        .configure(|st| st.param(init).max_iters(500))
        .run()
        .map_err(|e| Error::InvalidModel(e.to_string()))?;
    let g = res.state.best_param.unwrap_or(init);
    Ok((g, s_curve(g, n)?))
}

/// Rows `(n, S_n(π/4))` for the tabulated dimensions.
pub fn table1() -> Vec<(usize, f64)> {
    TABLE1_DIMENSIONS.iter().map(|&n| (n, s_max(n).expect("tabulated dimensions are valid").1)).collect()
}

/// Shortest arc between loop coordinates μ and ν on a loop of length 4.
/// Coordinates outside [0, 4) are reduced first.
pub fn loop_separation(mu: f64, nu: f64) -> f64 {
    let d = (nu.rem_euclid(LOOP_LENGTH) - mu.rem_euclid(LOOP_LENGTH)).abs();
    d.min(LOOP_LENGTH - d)
}

/// Edge weight of the bipartite-graph model: `H_n(η(u, v))`, singlet
/// convention.
pub fn graph_weight(u: &Direction, v: &Direction, n: usize) -> Result<f64> {
    cdf_h(closeness_eta(u, v, Closeness::Singlet)?, n)
}

/// `S = 2 − w_pq − w_rq − w_rs + w_ps` for arbitrary weights in [0, 2].
pub fn graph_chsh(w_pq: f64, w_rq: f64, w_rs: f64, w_ps: f64) -> f64 {
    2.0 - w_pq - w_rq - w_rs + w_ps
}

/// Evenly spaced samples of a curve for plotting.
pub fn sample_curve(lo: f64, hi: f64, points: usize, f: impl Fn(f64) -> Result<f64>) -> Result<Vec<(f64, f64)>> {
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            Ok((x, f(x)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn cap_integral_bases() {
        assert_abs_diff_eq!(cap_integral(PI, 1).unwrap(), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(cap_integral(PI, 2).unwrap(), 2.0, epsilon = 1e-15);
        // −½ sin γ cos γ + ½ γ at γ = π/2.
        assert_abs_diff_eq!(cap_integral(PI / 2.0, 3).unwrap(), PI / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn cap_integral_matches_quadrature() {
        // Composite Simpson, independent of the recursion.
        fn simpson(g: f64, n: usize) -> f64 {
            let m = 20_000;
            let h = g / m as f64;
            let f = |t: f64| t.sin().powi(n as i32 - 1);
            let mut s = f(0.0) + f(g);
            for i in 1..m {
                s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        }
        for n in 1..=9 {
            for g in [0.1, 0.7, 1.3, 2.2, 3.0] {
                assert_abs_diff_eq!(cap_integral(g, n).unwrap(), simpson(g, n), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(cap_integral(-0.1, 2).is_err());
        assert!(cap_integral(3.5, 2).is_err());
        assert!(cap_integral(1.0, 0).is_err());
        assert!(cdf_h(f64::NAN, 2).is_err());
        assert!(s_curve(4.0, 2).is_err());
    }

    #[test]
    fn h_examples() {
        assert_abs_diff_eq!(cdf_h(PI / 2.0, 2).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cdf_h(PI / 4.0, 1).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(cdf_h(PI / 4.0, 3).unwrap(), 0.5 - 1.0 / PI, epsilon = 1e-14);
        assert_abs_diff_eq!(cdf_h(PI / 4.0, 3).unwrap(), 0.181690, epsilon = 1e-6);
        for n in 1..=12 {
            assert_eq!(cdf_h(0.0, n).unwrap(), 0.0);
            assert_abs_diff_eq!(cdf_h(PI, n).unwrap(), 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(cdf_h(PI / 2.0, n).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_forms_agree() {
        for n in 1..=4 {
            for i in 0..=1000 {
                let g = PI * i as f64 / 1000.0;
                let a = cdf_h(g, n).unwrap();
                let b = closed_form_h(g, n).unwrap();
                assert!((a - b).abs() < 1e-12, "n={n} g={g}: {a} vs {b}");
            }
        }
        assert!(closed_form_h(1.0, 5).is_none());
    }

    #[test]
    fn eta_examples() {
        let u = Direction::new(vec![0.0, 0.0, 1.0]).unwrap();
        let w = Direction::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(closeness_eta(&u, &u, Closeness::Singlet).unwrap(), PI);
        assert_abs_diff_eq!(closeness_eta(&u, &u.antipode(), Closeness::Singlet).unwrap(), 0.0);
        assert_abs_diff_eq!(closeness_eta(&u, &w, Closeness::Singlet).unwrap(), PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn photon_eta_reproduces_cos_two_angle() {
        for deg in [0.0, 10.0, 22.5, 45.0, 67.5, 90.0, 120.0, 170.0, 180.0] {
            let u = Direction::from_degrees(0.0);
            let v = Direction::from_degrees(deg);
            let eta = closeness_eta(&u, &v, Closeness::Photon).unwrap();
            assert!((0.0..=PI).contains(&eta));
            let e = 1.0 - cdf_h(eta, 2).unwrap();
            assert_abs_diff_eq!(e, (2.0 * deg.to_radians()).cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn s_curve_examples() {
        assert_abs_diff_eq!(s_curve(PI / 4.0, 2).unwrap(), 2.0 * 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s_curve(PI / 4.0, 1).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s_curve(PI / 4.0, 3).unwrap(), 3.273240, epsilon = 1e-6);
        for n in 1..=10 {
            assert_abs_diff_eq!(s_curve(0.0, n).unwrap(), 2.0, epsilon = 1e-15);
            // Mirror peak at 3π/4.
            assert_abs_diff_eq!(s_curve(3.0 * PI / 4.0, n).unwrap(), -s_curve(PI / 4.0, n).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn s_max_examples() {
        assert_abs_diff_eq!(s_max(2).unwrap().1, 2.828427, epsilon = 1e-6);
        assert_abs_diff_eq!(s_max(4).unwrap().1, 3.535534, epsilon = 1e-6);
        assert_abs_diff_eq!(s_max(20).unwrap().1, 3.999066, epsilon = 1e-6);
    }

    #[test]
    fn numerical_search_finds_quarter_pi() {
        for n in 2..=20 {
            let (g, s) = search_s_max(n).unwrap();
            assert!((g - PI / 4.0).abs() < 1e-6, "n={n}: gamma*={g}");
            assert_abs_diff_eq!(s, s_max(n).unwrap().1, epsilon = 1e-10);
        }
    }

    #[test]
    fn derivative_vanishes_at_quarter_pi() {
        let h = 1e-4;
        for n in 2..=8 {
            let g = PI / 4.0;
            let d = (s_curve(g + h, n).unwrap() - s_curve(g - h, n).unwrap()) / (2.0 * h);
            assert!(d.abs() < 1e-6, "n={n}: dS={d}");
        }
    }

    #[test]
    fn loop_examples() {
        assert_eq!(loop_separation(0.7, 0.7), 0.0);
        assert_abs_diff_eq!(loop_separation(0.0, 1.476), 1.476, epsilon = 1e-12);
        assert_abs_diff_eq!(loop_separation(1.476, 3.258), 1.782, epsilon = 1e-12);
        assert_abs_diff_eq!(loop_separation(1.476, 0.742), 0.734, epsilon = 1e-12);
        assert_abs_diff_eq!(loop_separation(0.0, 3.258), 0.742, epsilon = 1e-12);
        assert_abs_diff_eq!(loop_separation(-0.742, 0.0), 0.742, epsilon = 1e-12);
        assert_abs_diff_eq!(loop_separation(5.0, 0.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn graph_supremum_is_four() {
        assert_eq!(graph_chsh(0.0, 0.0, 0.0, 2.0), 4.0);
        assert_eq!(graph_chsh(2.0, 2.0, 2.0, 0.0), -4.0);
    }

    proptest! {
        #[test]
        fn h_is_a_symmetric_cdf(g in 0.0..PI, d in 0.0..0.5f64, n in 1usize..16) {
            let h = cdf_h(g, n).unwrap();
            prop_assert!((0.0..=2.0).contains(&h));
            prop_assert!((cdf_h(PI - g, n).unwrap() - (2.0 - h)).abs() < 1e-12);
            let g2 = (g + d).min(PI);
            prop_assert!(cdf_h(g2, n).unwrap() >= h - 1e-15);
        }

        #[test]
        fn separation_is_a_metric(a in 0.0..4.0f64, b in 0.0..4.0f64, c in 0.0..4.0f64) {
            let h = loop_separation;
            prop_assert!(h(a, b) <= 2.0 && h(a, b) >= 0.0);
            prop_assert!((h(a, b) - h(b, a)).abs() < 1e-15);
            prop_assert!(h(a, c) <= h(a, b) + h(b, c) + 1e-12);
        }
    }
}

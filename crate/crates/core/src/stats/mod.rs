//! Estimators, Bell inequalities and hypothesis tests.

mod checks;
mod chsh;
mod hypothesis;
mod martingale;

use serde::{Deserialize, Serialize};

pub use checks::{fine_lhv_check, fine_lhv_check_at, no_signalling_check, FineVerdict, FINE_SLACK};
pub use chsh::{
    all_chsh, ch_exact, ch_fractions, ch_statistic, chsh_emission, chsh_statistic, ChQuad, ChshSelection, Fractions,
};
pub use hypothesis::{chi_square_independence, independence_tests, kolmogorov_sf, ks_uniformity, Arity, Variable};
pub use martingale::{game_wins, martingale_pvalue, naive_z_test, settings_uniformity, NaiveZ};

/// Outcome of one statistic or test. Significance is reported as a
/// p-value only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: String,
    pub statistic: f64,
    pub bound: f64,
    pub p_value: f64,
    /// Natural log of the p-value, when the p-value itself underflows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ln_p_value: Option<f64>,
    pub n: u64,
    /// Derived estimate, e.g. Ŝ for the CHSH game.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TestReport {
    pub fn new(method: impl Into<String>, statistic: f64, bound: f64, p_value: f64, n: u64) -> Self {
        Self {
            method: method.into(),
            statistic,
            bound,
            p_value: p_value.clamp(0.0, 1.0),
            ln_p_value: None,
            n,
            estimate: None,
            pass: None,
            warnings: Vec::new(),
        }
    }
}

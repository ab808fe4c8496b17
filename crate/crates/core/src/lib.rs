//! Bell-CHSH simulation laboratory.
//!
//! Trials are sampled from quantum and local hidden-variable models
//! ([`models`]), degraded by loophole injectors ([`loopholes`]) and analyzed
//! with CHSH, Clauser–Horne and martingale statistics ([`stats`]). The
//! [`geometry`] module holds the closed-form n-sphere kernel, and [`nogo`]
//! runs a two-party challenge in which locality is enforced by message
//! passing.
//!
//! All randomness comes from counter-based streams ([`rng::RngStream`]), so
//! results do not depend on the thread count or on the `parallel` feature.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod direction;
pub mod error;
pub mod geometry;
pub mod loopholes;
pub mod models;
pub mod nogo;
pub mod par;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod trial;

pub use direction::Direction;
pub use error::{Error, Result};
pub use models::{ModelKind, ModelSpec, PreparedModel};
pub use rng::RngStream;
pub use sim::{simulate, simulate_counts, SettingPolicy, SimConfig};
pub use trial::{CorrelationTable, CountsTable, Outcome, TrialRecord};

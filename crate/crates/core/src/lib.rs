//! Minimum sliced distance estimation for parametric models whose support
//! depends on the parameter.
//!
//! The estimators minimize a sliced Cramér (MSCD) or sliced 2-Wasserstein
//! (MSWD) distance between the data and the model, averaged over random
//! projection directions. The crate also ships the comparison estimators
//! (MLE, oracle Jensen–Shannon, indirect inference), plug-in sandwich
//! inference and a Monte Carlo harness.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::excessive_precision, clippy::manual_clamp)]

pub mod baselines;
pub mod distances;
pub mod error;
pub mod harness;
pub mod inference;
pub mod models;
pub mod numeric;
pub mod objective;
pub mod optimizer;
pub mod rng;
pub mod sample;

pub use error::{Error, Result};
pub use models::{Model, ModelId, ParamBox};
pub use rng::RngHandle;
pub use sample::{Direction, Sample};

//! Key-rate analysis and protocol simulation for entanglement-based QKD
//! secured against eavesdroppers constrained only by no-signalling.
//!
//! The crate is organised bottom-up:
//!
//! - [`correlations`]: Werner-state statistics under the chained measurement scheme.
//! - [`nsbox`]: conditional-probability boxes, Bell functionals, deterministic and
//!   correlation vertices, and the marginal-constrained chain LP.
//! - [`attack`]: the extremal strategy classes available to Eve, her optimal
//!   individual-attack weights, and explicit attack mixtures.
//! - [`keyrate`]: entropies, one-way key rates with and without bit-flip
//!   preprocessing, noise thresholds and rate curves.
//! - [`simulator`]: seeded Monte-Carlo protocol runs, sifting, estimation and
//!   key-length accounting.

// Range checks are written as `!(x >= lo)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod correlations;
pub mod error;
mod lp;
pub mod keyrate;
pub mod nsbox;
pub mod simulator;

pub use attack::{AttackDecomposition, StrategyClass, StrategyId};
pub use correlations::{MeasurementScheme, WernerParameter};
pub use error::{Error, Result};
pub use keyrate::KeyRateReport;
pub use nsbox::{BellFunctional, BellValue, ConditionalBox, DeterministicBox};
pub use simulator::{EstimationReport, ProtocolConfig, Round, SiftTag, Transcript};

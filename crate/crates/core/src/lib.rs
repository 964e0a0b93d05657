//! Bayesian inference for the arbitrariness of two-committee peer review.
//!
//! Two generative models explain an observed acceptance rate and an observed
//! arbitrariness (the probability that an item accepted by one committee is
//! rejected by a second, independent committee):
//!
//! * **RFC** (reject or flip a coin): items meet basic quality criteria with
//!   probability `x`; those that do are accepted with probability `y`, the
//!   rest are always rejected.
//! * **RAFC** (reject, accept or flip a coin): a known fraction `alpha` of the
//!   quality-meeting items is always accepted.
//!
//! The crate provides closed-form estimators ([`models`]), special functions
//! and seedable random streams ([`numerics`]), exact and rejection posterior
//! samplers with a grid oracle ([`samplers`]), a forward simulator with
//! rejection ABC and ABC model choice ([`abc`]), and stable CSV/JSON writers
//! ([`report`]).
//!
//! Monte Carlo loops are split into fixed-size chunks, each driven by its own
//! random substream, so results depend only on the seed and never on the
//! number of worker threads. With the `parallel` feature (on by default)
//! chunks run on the rayon pool; without it they run sequentially and produce
//! identical output.

pub mod abc;
pub mod error;
pub mod exec;
pub mod models;
pub mod numerics;
pub mod report;
pub mod samplers;

pub use error::{Error, Result};
pub use exec::Execution;
pub use models::{
    Estimate, EstimateResult, EstimateStatus, MarginalMode, Model, ObservedData, RafcParams,
    RfcParams,
};
pub use numerics::{RandomStream, SampleBatch};

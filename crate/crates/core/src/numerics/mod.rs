//! Special functions, random variate generation and empirical quantiles.

pub(crate) mod quantile;
pub(crate) mod random;
mod special;

pub use quantile::{empirical_quantile, SampleBatch};
pub use random::{draw_bernoulli, draw_beta, draw_truncated_beta, draw_uniform_open, RandomStream};
pub use special::{inv_reg_inc_beta, ln_gamma, log_beta_fn, reg_inc_beta};

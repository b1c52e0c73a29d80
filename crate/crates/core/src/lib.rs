//! Mixture-of-basis (MoB) continual regression.
//!
//! A fixed set of Gaussian ensemble *basis* models is combined through a
//! latent task vector inferred online by a sequential variational model.
//! Observations that look out-of-distribution for every basis are buffered
//! and, once enough accumulate, a new basis is adapted from a meta-learned
//! ensemble prior.
//!
//! Module map:
//!
//! * [`ndmath`]: dense numerics (MLPs with hand-written backprop, Adam, RNG).
//! * [`domains`]: the synthetic random-network regression benchmark.
//! * [`basis`]: ensemble Gaussian bases, the ensemble MAML prior, mixture equations.
//! * [`latent`]: inference/prior/mixing networks and the sampled ELBO.
//! * [`odds`]: the out-of-distribution detection score and basis instantiation.
//! * [`engine`]: offline training, online adaptation and checkpoints.
//! * [`baselines`]: MAML k-shot, MAML continuous and MOLe-lite.
//! * [`harness`]: experiment configuration, runs, reports and PCA export.

pub mod baselines;
pub mod basis;
pub mod domains;
pub mod engine;
mod error;
pub mod harness;
pub mod latent;
pub mod ndmath;
pub mod odds;

pub use error::{Error, Result};

//! Sequential latent task model: inference net `q`, prior net `p`, mixing
//! net `w`, and the single-sample ELBO with its exact gradients.

mod elbo;
mod nets;

pub use elbo::{draw_noise, elbo, Anchor, ElboGradients, ElboOutput, ElboTerms, GradMask};
pub use nets::{grow_mixing_head, infer_step, mixing_weights, prior_step, GaussianNet, LatentConfig, LatentNets, LatentState, MixingNet, Q_STD_FLOOR};

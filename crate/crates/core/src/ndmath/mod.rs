//! Minimal dense numerics shared by every other module.
//!
//! Everything is `f64`. Networks are plain multilayer perceptrons with tanh
//! hidden units and a linear output; gradients are computed by an explicit
//! reverse pass over a recorded [`Trace`] rather than a general tape.

mod adam;
mod gaussian;
mod mlp;
mod rng;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gaussian::{gaussian_log_pdf, log_sum_exp, logistic, normal_log_pdf, softmax, softplus, LN_SQRT_2PI};
pub use mlp::{Dense, Mlp, Trace};
pub use rng::{derive_seed, Rng};
pub use tensor::{Parameters, Tensor};

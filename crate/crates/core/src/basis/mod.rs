//! Ensemble Gaussian basis models.
//!
//! A basis is `M` Gaussian-head networks, each mapping `x` to a mean and a
//! standard deviation `softplus(raw) + sigma_floor`. The basis density is the
//! equal-weight mixture of its members, and the full model mixes bases with
//! simplex weights produced from the latent task vector.

mod ensemble;
mod mixture;
mod prior;

pub use ensemble::{adapt_basis, adapt_basis_with_steps, BasisOrigin, EnsembleBasis, HeadConfig, MemberOutput};
pub use mixture::{check_simplex, mixture_log_likelihood, mixture_log_likelihood_of, mixture_point_estimate, predict_mixture, GaussianMixturePrediction};
pub use prior::{pretrain_basis, train_ensemble_prior, EnsemblePrior, MetaConfig};

pub(crate) use ensemble::sgd_adapt_member;

//! Comparison learners: MAML k-shot, MAML continuous and MOLe-lite.
//!
//! All three start from the same ensemble prior as the mixture model and
//! follow the same predict-then-observe protocol
//! ([`OnlineLearner`](crate::engine::OnlineLearner)).

mod continuous;
mod kshot;
mod mole;

use serde::{Deserialize, Serialize};

pub use continuous::ContinuousState;
pub use kshot::KShotState;
pub use mole::{MoleConfig, MoleLiteState};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    /// Observations used by k-shot adaptation.
    pub k: usize,
    /// SGD step size of MAML continuous.
    pub continuous_learning_rate: f64,
    pub mole: MoleConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            k: 20,
            continuous_learning_rate: 0.01,
            mole: MoleConfig::default(),
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.continuous_learning_rate >= 0.0 && self.continuous_learning_rate.is_finite()) {
            return Err(Error::Config("baselines.continuous_learning_rate must be finite and non-negative".into()));
        }
        self.mole.validate()
    }
}

use serde::{Deserialize, Serialize};

use crate::basis::MetaConfig;
use crate::latent::LatentConfig;
use crate::odds::OddsConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Trajectories per offline minibatch.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop when the epoch ELBO improved by less than `plateau_tolerance`
    /// (relative) over this many epochs.
    pub plateau_epochs: usize,
    pub plateau_tolerance: f64,
    /// Updates per parameter group before switching to the other group.
    pub alternation_period: usize,
    pub online_learning_rate: f64,
    /// Number of recent observations in the online loss.
    pub online_window: usize,
    /// Predict from a prior sample (`true`) or from the prior mean.
    pub sample_prior_at_prediction: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            learning_rate: 1e-4,
            max_epochs: 50,
            plateau_epochs: 5,
            plateau_tolerance: 1e-3,
            alternation_period: 1,
            online_learning_rate: 1e-4,
            online_window: 20,
            sample_prior_at_prediction: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be at least 1".into()));
        }
        if self.alternation_period == 0 {
            return Err(Error::Config("train.alternation_period must be at least 1".into()));
        }
        if self.online_window == 0 {
            return Err(Error::Config("train.online_window must be at least 1".into()));
        }
        if self.plateau_epochs == 0 {
            return Err(Error::Config("train.plateau_epochs must be at least 1".into()));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("online_learning_rate", self.online_learning_rate),
            ("plateau_tolerance", self.plateau_tolerance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("train.{name} must be a finite non-negative number")));
            }
        }
        Ok(())
    }
}

/// Everything needed to build and train a model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobConfig {
    pub meta: MetaConfig,
    pub latent: LatentConfig,
    pub odds: OddsConfig,
    pub train: TrainConfig,
}

impl MobConfig {
    pub fn validate(&self) -> Result<()> {
        self.meta.validate()?;
        self.latent.validate()?;
        self.odds.validate()?;
        self.train.validate()
    }
}

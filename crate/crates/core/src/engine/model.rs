use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::MobConfig;
use crate::basis::{EnsembleBasis, EnsemblePrior};
use crate::latent::{elbo, grow_mixing_head, Anchor, ElboGradients, ElboOutput, GradMask, LatentNets};
use crate::ndmath::{AdamConfig, AdamState, Parameters, Rng, Tensor};
use crate::odds::OddsDetector;
use crate::{Error, Result};

/// Parameter groups updated in alternation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    Bases,
    /// Mixing, prior and inference networks.
    Latent,
}

impl ParamGroup {
    pub fn mask(self) -> GradMask {
        match self {
            ParamGroup::Bases => GradMask::BASES,
            ParamGroup::Latent => GradMask::LATENT,
        }
    }
}

/// Streaming state of the online learner.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub(crate) struct OnlineState {
    /// Observations consumed in the current stream.
    pub t: u64,
    /// Latent after the last observation (`z_{t-1}`).
    pub z_prev: Vec<f64>,
    /// Recent `(x, y, z before the observation, stream position)`.
    pub window: VecDeque<(f64, f64, Vec<f64>, u64)>,
    /// Input of the outstanding prediction.
    pub pending: Option<f64>,
}

/// The full mixture-of-basis state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobModel {
    pub config: MobConfig,
    pub bases: Vec<EnsembleBasis>,
    pub latent: LatentNets,
    pub meta_prior: EnsemblePrior,
    pub detector: OddsDetector,
    basis_optim: Vec<AdamState>,
    latent_optim: AdamState,
    pub(crate) rng: Rng,
    /// Gradient updates applied so far (drives the alternation).
    updates: u64,
    /// Global observation counter shared by offline and online phases.
    pub(crate) step: u64,
    pub(crate) online: OnlineState,
    skipped_updates: u64,
}

impl MobModel {
    pub fn new(config: MobConfig, bases: Vec<EnsembleBasis>, meta_prior: EnsemblePrior, mut rng: Rng) -> Result<Self> {
        config.validate()?;
        if bases.is_empty() {
            return Err(Error::contract("a model needs at least one basis"));
        }
        let latent = LatentNets::new(&config.latent, bases.len(), &mut rng)?;
        let adam = AdamConfig::with_learning_rate(config.train.learning_rate);
        let basis_optim = bases.iter().map(|b| AdamState::new(adam, b)).collect();
        let latent_optim = AdamState::new(adam, &latent);
        let detector = OddsDetector::new(config.odds.clone())?;
        let online = OnlineState {
            z_prev: vec![0.0; config.latent.dim],
            ..OnlineState::default()
        };
        Ok(Self {
            config,
            bases,
            latent,
            meta_prior,
            detector,
            basis_optim,
            latent_optim,
            rng,
            updates: 0,
            step: 0,
            online,
            skipped_updates: 0,
        })
    }

    pub fn n_bases(&self) -> usize {
        self.bases.len()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn skipped_updates(&self) -> u64 {
        self.skipped_updates
    }

    pub fn global_step(&self) -> u64 {
        self.step
    }

    /// Checks the cross-component invariants.
    pub fn validate(&self) -> Result<()> {
        if self.bases.is_empty() {
            return Err(Error::contract("model has no bases"));
        }
        if self.latent.mixing.width() != self.bases.len() {
            return Err(Error::contract(format!(
                "mixing head width {} does not match {} bases",
                self.latent.mixing.width(),
                self.bases.len()
            )));
        }
        if self.basis_optim.len() != self.bases.len() {
            return Err(Error::contract("optimizer count does not match basis count"));
        }
        if self.latent.dim() != self.config.latent.dim || self.online.z_prev.len() != self.config.latent.dim {
            return Err(Error::contract("latent dimension does not match the configuration"));
        }
        Ok(())
    }

    /// Adds a basis and widens the mixing head by one logit.
    pub fn add_basis(&mut self, basis: EnsembleBasis) -> Result<()> {
        let adam = AdamConfig::with_learning_rate(self.config.train.learning_rate);
        self.basis_optim.push(AdamState::new(adam, &basis));
        self.bases.push(basis);
        let cfg = &self.config.latent;
        grow_mixing_head(&mut self.latent.mixing, cfg.new_logit_bias, cfg.new_logit_scale, &mut self.rng)?;
        self.latent_optim.sync_shapes(&self.latent)
    }

    /// The group the next gradient update applies to.
    pub fn next_group(&self) -> ParamGroup {
        if (self.updates / self.config.train.alternation_period as u64).is_multiple_of(2) {
            ParamGroup::Bases
        } else {
            ParamGroup::Latent
        }
    }

    /// Runs the ELBO over a window with freshly drawn noise.
    pub(crate) fn window_elbo(&mut self, obs: &[(f64, f64)], anchor: &Anchor, mask: GradMask) -> Result<ElboOutput> {
        let noise = crate::latent::draw_noise(&mut self.rng, obs.len(), self.latent.dim());
        elbo(&self.bases, &self.latent, obs, anchor, &noise, mask)
    }

    /// Applies one Adam step to `group`, minimizing `-scale * ELBO`.
    /// Non-finite gradients are rejected before any parameter changes.
    pub(crate) fn apply_update(&mut self, group: ParamGroup, grads: &ElboGradients, scale: f64, learning_rate: f64) -> Result<()> {
        let mut loss_grads = grads.clone();
        loss_grads.scale(-scale);
        match group {
            ParamGroup::Bases => {
                for (i, g) in loss_grads.bases.iter().enumerate() {
                    if let Some(k) = g.tensors().iter().position(|t| !t.is_finite()) {
                        return Err(Error::NonFiniteGradient(format!("basis{i}.member{}", g.tensor_name(k))));
                    }
                }
                for ((basis, optim), g) in self.bases.iter_mut().zip(&mut self.basis_optim).zip(&loss_grads.bases) {
                    optim.config.learning_rate = learning_rate;
                    optim.step(basis.members_mut(), g)?;
                }
            }
            ParamGroup::Latent => {
                self.latent_optim.config.learning_rate = learning_rate;
                self.latent_optim.step(&mut self.latent, &loss_grads.latent)?;
            }
        }
        self.updates += 1;
        Ok(())
    }

    pub(crate) fn count_skipped(&mut self) {
        self.skipped_updates += 1;
        // keep the alternation moving so one bad group cannot stall the other
        self.updates += 1;
    }

    /// Named mutable views of every tensor, in checkpoint manifest order.
    pub(crate) fn tensor_slots(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        for (i, b) in self.bases.iter_mut().enumerate() {
            let names: Vec<String> = (0..b.tensors().len()).map(|k| format!("bases[{i}].{}", b.tensor_name(k))).collect();
            out.extend(names.into_iter().zip(b.tensors_mut()));
        }
        let names: Vec<String> = (0..self.latent.tensors().len()).map(|k| format!("latent.{}", self.latent.tensor_name(k))).collect();
        out.extend(names.into_iter().zip(self.latent.tensors_mut()));
        let names: Vec<String> = (0..self.meta_prior.tensors().len()).map(|k| format!("meta_prior.{}", self.meta_prior.tensor_name(k))).collect();
        out.extend(names.into_iter().zip(self.meta_prior.tensors_mut()));
        for (i, o) in self.basis_optim.iter_mut().enumerate() {
            let n = o.tensors().len();
            out.extend((0..n).map(|k| format!("basis_optim[{i}].{k}")).zip(o.tensors_mut()));
        }
        let n = self.latent_optim.tensors().len();
        out.extend((0..n).map(|k| format!("latent_optim.{k}")).zip(self.latent_optim.tensors_mut()));
        if let Some(c) = self.detector.candidate_mut() {
            let n = c.tensors().len();
            out.extend((0..n).map(|k| format!("odds_candidate.{k}")).zip(c.tensors_mut()));
        }
        out
    }

    /// Mixing weights the model would use at latent `z`.
    pub fn weights_at(&self, z: &[f64]) -> Result<Vec<f64>> {
        crate::latent::mixing_weights(&self.latent.mixing, z)
    }
}

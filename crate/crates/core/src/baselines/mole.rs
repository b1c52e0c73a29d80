use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::basis::{adapt_basis, sgd_adapt_member, BasisOrigin, EnsembleBasis, EnsemblePrior};
use crate::domains::SampleSet;
use crate::engine::{OnlineLearner, StepInfo};
use crate::ndmath::softmax;
use crate::{Error, Result};

/// Frozen MOLe-lite rules. This is an approximation of MOLe, not a replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleConfig {
    /// Prior mass reserved for the "new model" hypothesis at every step.
    pub innovation: f64,
    /// Per-step mixing of responsibilities toward uniform.
    pub forgetting: f64,
    pub spawn_threshold: f64,
    /// Consecutive steps above the threshold needed to spawn.
    pub spawn_patience: usize,
    pub recent_window: usize,
    pub refit_interval: u64,
    pub learning_rate: f64,
}

impl Default for MoleConfig {
    fn default() -> Self {
        Self {
            innovation: 0.01,
            forgetting: 0.3,
            spawn_threshold: 0.6,
            spawn_patience: 10,
            recent_window: 20,
            refit_interval: 5,
            learning_rate: 0.01,
        }
    }
}

impl MoleConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("innovation", self.innovation), ("forgetting", self.forgetting), ("spawn_threshold", self.spawn_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("baselines.mole.{name} must lie in [0, 1]")));
            }
        }
        if self.spawn_patience == 0 || self.recent_window == 0 || self.refit_interval == 0 {
            return Err(Error::Config("baselines.mole spawn_patience, recent_window and refit_interval must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("baselines.mole.learning_rate must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Multiple task models with a responsibility filter and threshold spawning.
///
/// The filter tracks `K + 1` hypotheses: the existing models plus a "new
/// model" hypothesis scored by a candidate adapted from the prior on the
/// recent window. Per observation the previous posterior is relaxed toward
/// uniform, a fixed innovation mass is moved onto the new hypothesis, and
/// Bayes' rule with each hypothesis' likelihood gives the next posterior.
/// A model is spawned once the new hypothesis holds more than the spawn
/// threshold for `spawn_patience` consecutive steps. Every existing model
/// then takes one NLL step scaled by its posterior responsibility.
#[derive(Debug, Clone)]
pub struct MoleLiteState {
    prior: EnsemblePrior,
    config: MoleConfig,
    models: Vec<EnsembleBasis>,
    /// Posterior over existing models followed by the new-model hypothesis.
    posterior: Vec<f64>,
    recent: VecDeque<(f64, f64)>,
    candidate: Option<EnsembleBasis>,
    since_refit: u64,
    streak: usize,
    spawns: usize,
    pending: Option<f64>,
    step: u64,
}

impl MoleLiteState {
    pub fn new(prior: EnsemblePrior, config: MoleConfig) -> Result<Self> {
        config.validate()?;
        let mut first = prior.as_basis();
        first.origin = BasisOrigin::Baseline;
        Ok(Self {
            prior,
            config,
            models: vec![first],
            posterior: vec![1.0, 0.0],
            recent: VecDeque::new(),
            candidate: None,
            since_refit: 0,
            streak: 0,
            spawns: 0,
            pending: None,
            step: 0,
        })
    }

    /// Responsibilities of the existing models, renormalized onto the simplex.
    pub fn responsibilities(&self) -> Vec<f64> {
        let k = self.models.len();
        let total: f64 = self.posterior[..k].iter().sum();
        if total > 0.0 {
            self.posterior[..k].iter().map(|p| p / total).collect()
        } else {
            vec![1.0 / k as f64; k]
        }
    }

    /// Posterior probability of the new-model hypothesis.
    pub fn new_model_probability(&self) -> f64 {
        self.posterior[self.models.len()]
    }

    pub fn spawns(&self) -> usize {
        self.spawns
    }

    pub fn models(&self) -> &[EnsembleBasis] {
        &self.models
    }

    /// Prior over the `K + 1` hypotheses for the next observation.
    fn predictive_prior(&self, innovation: f64) -> Vec<f64> {
        let n = self.posterior.len() as f64;
        let b = self.config.forgetting;
        let mut prior: Vec<f64> = self.posterior.iter().map(|p| (1.0 - innovation) * ((1.0 - b) * p + b / n)).collect();
        if let Some(last) = prior.last_mut() {
            *last += innovation;
        }
        prior
    }

    fn refresh_candidate(&mut self) -> Result<()> {
        if self.recent.is_empty() {
            return Ok(());
        }
        if self.candidate.is_none() || self.since_refit >= self.config.refit_interval {
            let window = SampleSet::from_pairs(self.recent.iter().copied());
            self.candidate = Some(adapt_basis(&self.prior, &window)?);
            self.since_refit = 0;
        }
        Ok(())
    }
}

impl OnlineLearner for MoleLiteState {
    fn name(&self) -> &str {
        "mole_lite"
    }

    fn begin_stream(&mut self) {
        self.recent.clear();
        self.candidate = None;
        self.since_refit = 0;
        self.streak = 0;
        self.pending = None;
    }

    fn predict(&mut self, x: f64) -> Result<f64> {
        crate::engine::set_pending(&mut self.pending, x)?;
        let r = self.responsibilities();
        Ok(self.models.iter().zip(&r).map(|(m, w)| w * m.mean(x)).sum())
    }

    fn observe(&mut self, x: f64, y: f64) -> Result<StepInfo> {
        crate::engine::take_pending(&mut self.pending, x)?;
        self.refresh_candidate()?;
        let k = self.models.len();
        let alpha = if self.candidate.is_some() { self.config.innovation } else { 0.0 };
        let prior = self.predictive_prior(alpha);
        let mut log_joint: Vec<f64> = self.models.iter().zip(&prior).map(|(m, p)| p.ln() + m.log_likelihood(x, y)).collect();
        log_joint.push(match &self.candidate {
            Some(c) => prior[k].ln() + c.log_likelihood(x, y),
            None => f64::NEG_INFINITY,
        });
        self.posterior = softmax(&log_joint);
        let p_new = self.posterior[k];

        // responsibility-weighted NLL step on every existing model
        let sample = SampleSet::from_pairs([(x, y)]);
        for (model, &r) in self.models.iter_mut().zip(&self.posterior) {
            if r < 1e-3 {
                continue;
            }
            let floor = model.sigma_floor();
            let updated: Result<Vec<_>> = model
                .members()
                .iter()
                .map(|m| sgd_adapt_member(m, &sample, 1, self.config.learning_rate * r, floor, self.prior.max_grad_norm))
                .collect();
            match updated {
                Ok(members) => *model.members_mut() = members,
                Err(Error::NonFiniteGradient(_)) => {}
                Err(e) => return Err(e),
            }
        }

        if self.recent.len() == self.config.recent_window {
            self.recent.pop_front();
        }
        self.recent.push_back((x, y));
        self.since_refit += 1;
        self.step += 1;

        self.streak = if p_new > self.config.spawn_threshold { self.streak + 1 } else { 0 };
        if self.streak >= self.config.spawn_patience {
            let window = SampleSet::from_pairs(self.recent.iter().copied());
            let mut model = adapt_basis(&self.prior, &window)?;
            model.origin = BasisOrigin::Baseline;
            model.created_at = self.step;
            self.models.push(model);
            // the spawned model inherits the new hypothesis' mass
            self.posterior.push(0.0);
            self.spawns += 1;
            self.streak = 0;
            self.candidate = None;
        }
        Ok(StepInfo::default())
    }

    fn model_count(&self) -> usize {
        self.models.len()
    }
}

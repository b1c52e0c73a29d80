use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ensemble::{member_nll_gradient, sgd_adapt_member};
use super::{adapt_basis, BasisOrigin, EnsembleBasis, HeadConfig};
use crate::domains::SampleSet;
use crate::ndmath::{AdamConfig, AdamState, Mlp, Parameters, Rng, Tensor};
use crate::{Error, Result};

/// Meta-learning and pretraining settings for the ensemble prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaConfig {
    pub members: usize,
    pub head: HeadConfig,
    pub inner_lr: f64,
    pub inner_steps: usize,
    pub meta_iterations: usize,
    pub meta_lr: f64,
    pub batch_size: usize,
    /// Per-step gradient norm cap for inner-loop SGD; 0 disables clipping.
    pub max_grad_norm: f64,
    /// Extra Adam minibatch steps when pretraining a basis on a segmented task.
    pub pretrain_steps: usize,
    pub pretrain_lr: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            members: 4,
            head: HeadConfig::default(),
            inner_lr: 0.01,
            inner_steps: 5,
            meta_iterations: 2000,
            meta_lr: 1e-3,
            batch_size: 32,
            max_grad_norm: 100.0,
            pretrain_steps: 1000,
            pretrain_lr: 1e-3,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.members < 2 {
            return Err(Error::Config("meta.members must be at least 2".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("meta.batch_size must be at least 1".into()));
        }
        if !(self.head.sigma_floor > 0.0) {
            return Err(Error::Config("meta.head.sigma_floor must be positive".into()));
        }
        if self.head.hidden.contains(&0) {
            return Err(Error::Config("meta.head.hidden widths must be positive".into()));
        }
        for (name, v) in [("inner_lr", self.inner_lr), ("meta_lr", self.meta_lr), ("pretrain_lr", self.pretrain_lr)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("meta.{name} must be a finite non-negative number")));
            }
        }
        if !(self.max_grad_norm >= 0.0) {
            return Err(Error::Config("meta.max_grad_norm must be non-negative".into()));
        }
        Ok(())
    }
}

/// Meta-learned ensemble initialization `{theta*_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrior {
    pub members: Vec<Mlp>,
    pub sigma_floor: f64,
    pub inner_lr: f64,
    pub inner_steps: usize,
    pub max_grad_norm: f64,
}

impl EnsemblePrior {
    pub fn new(members: Vec<Mlp>, sigma_floor: f64, inner_lr: f64, inner_steps: usize, max_grad_norm: f64) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::contract("an ensemble prior needs at least two members"));
        }
        // reuse the basis shape checks
        EnsembleBasis::new(members.clone(), sigma_floor, BasisOrigin::Candidate, 0)?;
        Ok(Self {
            members,
            sigma_floor,
            inner_lr,
            inner_steps,
            max_grad_norm,
        })
    }

    /// The unadapted prior viewed as a basis.
    pub fn as_basis(&self) -> EnsembleBasis {
        EnsembleBasis::new(self.members.clone(), self.sigma_floor, BasisOrigin::Candidate, 0).expect("prior members validated at construction")
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl Parameters for EnsemblePrior {
    fn tensors(&self) -> Vec<&Tensor> {
        self.members.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.members.tensors_mut()
    }

    fn tensor_name(&self, index: usize) -> String {
        format!("member{}", self.members.tensor_name(index))
    }
}

fn minibatch(data: &SampleSet, size: usize, rng: &mut Rng) -> SampleSet {
    let idx: Vec<usize> = (0..size).map(|_| rng.below(data.len())).collect();
    data.select(&idx)
}

/// First-order MAML over the segmented tasks, one independent run per member.
///
/// Every outer iteration visits all tasks: the member is adapted on a support
/// minibatch and the query-minibatch NLL gradient at the adapted parameters is
/// averaged into the outer Adam step.
pub fn train_ensemble_prior(segmented: &BTreeMap<usize, SampleSet>, cfg: &MetaConfig, rng: &mut Rng) -> Result<EnsemblePrior> {
    cfg.validate()?;
    if segmented.len() < 2 {
        return Err(Error::contract(format!(
            "meta-training needs at least two segmented tasks, got {}",
            segmented.len()
        )));
    }
    if segmented.values().any(SampleSet::is_empty) {
        return Err(Error::contract("segmented task with no samples"));
    }
    let floor = cfg.head.sigma_floor;
    let tasks: Vec<&SampleSet> = segmented.values().collect();
    let weight = 1.0 / tasks.len() as f64;
    let mut members = Vec::with_capacity(cfg.members);
    for _ in 0..cfg.members {
        let mut member_rng = rng.fork();
        let mut theta = cfg.head.init_member(&mut member_rng);
        let mut adam = AdamState::new(AdamConfig::with_learning_rate(cfg.meta_lr), &theta);
        let mut outer = theta.zeros_like();
        for _ in 0..cfg.meta_iterations {
            outer.scale(0.0);
            for task in &tasks {
                let support = minibatch(task, cfg.batch_size, &mut member_rng);
                let query = minibatch(task, cfg.batch_size, &mut member_rng);
                let adapted = sgd_adapt_member(&theta, &support, cfg.inner_steps, cfg.inner_lr, floor, cfg.max_grad_norm)?;
                let mut g = adapted.zeros_like();
                member_nll_gradient(&adapted, &query, floor, &mut g)?;
                outer.axpy(weight, &g);
            }
            adam.step(&mut theta, &outer)?;
        }
        members.push(theta);
    }
    EnsemblePrior::new(members, floor, cfg.inner_lr, cfg.inner_steps, cfg.max_grad_norm)
}

/// Adapts a basis from the prior on one segmented task, then fine-tunes every
/// member with `pretrain_steps` Adam minibatch steps.
pub fn pretrain_basis(prior: &EnsemblePrior, task: usize, data: &SampleSet, cfg: &MetaConfig, rng: &mut Rng) -> Result<EnsembleBasis> {
    let mut basis = adapt_basis(prior, data)?;
    basis.origin = BasisOrigin::Pretrained { task };
    let floor = basis.sigma_floor();
    for member in basis.members_mut().iter_mut() {
        let mut member_rng = rng.fork();
        let mut adam = AdamState::new(AdamConfig::with_learning_rate(cfg.pretrain_lr), &*member);
        let mut g = member.zeros_like();
        for _ in 0..cfg.pretrain_steps {
            g.scale(0.0);
            let batch = minibatch(data, cfg.batch_size, &mut member_rng);
            member_nll_gradient(member, &batch, floor, &mut g)?;
            adam.step(member, &g)?;
        }
    }
    Ok(basis)
}

use crate::basis::{sgd_adapt_member, EnsembleBasis, EnsemblePrior};
use crate::domains::SampleSet;
use crate::engine::{OnlineLearner, StepInfo};
use crate::Result;

/// Starts at the prior and takes one NLL gradient step per observation.
#[derive(Debug, Clone)]
pub struct ContinuousState {
    prior: EnsemblePrior,
    learning_rate: f64,
    model: EnsembleBasis,
    pending: Option<f64>,
    skipped: u64,
}

impl ContinuousState {
    pub fn new(prior: EnsemblePrior, learning_rate: f64) -> Self {
        let model = prior.as_basis();
        Self {
            prior,
            learning_rate,
            model,
            pending: None,
            skipped: 0,
        }
    }

    pub fn model(&self) -> &EnsembleBasis {
        &self.model
    }

    /// Updates rejected for non-finite gradients.
    pub fn skipped_updates(&self) -> u64 {
        self.skipped
    }
}

impl OnlineLearner for ContinuousState {
    fn name(&self) -> &str {
        "maml_continuous"
    }

    fn begin_stream(&mut self) {
        self.model = self.prior.as_basis();
        self.pending = None;
    }

    fn predict(&mut self, x: f64) -> Result<f64> {
        crate::engine::set_pending(&mut self.pending, x)?;
        Ok(self.model.mean(x))
    }

    fn observe(&mut self, x: f64, y: f64) -> Result<StepInfo> {
        crate::engine::take_pending(&mut self.pending, x)?;
        let sample = SampleSet::from_pairs([(x, y)]);
        let floor = self.model.sigma_floor();
        let mut updated = Vec::with_capacity(self.model.len());
        for m in self.model.members() {
            match sgd_adapt_member(m, &sample, 1, self.learning_rate, floor, self.prior.max_grad_norm) {
                Ok(next) => updated.push(next),
                Err(crate::Error::NonFiniteGradient(_)) => {
                    self.skipped += 1;
                    return Ok(StepInfo::default());
                }
                Err(e) => return Err(e),
            }
        }
        *self.model.members_mut() = updated;
        Ok(StepInfo::default())
    }

    fn model_count(&self) -> usize {
        1
    }
}

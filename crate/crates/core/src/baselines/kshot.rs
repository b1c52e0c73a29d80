use std::collections::VecDeque;

use crate::basis::{adapt_basis, EnsembleBasis, EnsemblePrior};
use crate::domains::SampleSet;
use crate::engine::{OnlineLearner, StepInfo};
use crate::Result;

/// Re-adapts from the prior on the latest `k` observations at every step.
#[derive(Debug, Clone)]
pub struct KShotState {
    prior: EnsemblePrior,
    k: usize,
    buffer: VecDeque<(f64, f64)>,
    adapted: EnsembleBasis,
    pending: Option<f64>,
}

impl KShotState {
    pub fn new(prior: EnsemblePrior, k: usize) -> Self {
        let adapted = prior.as_basis();
        Self {
            prior,
            k,
            buffer: VecDeque::with_capacity(k),
            adapted,
            pending: None,
        }
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    /// Parameters the next prediction will use.
    pub fn adapted(&self) -> &EnsembleBasis {
        &self.adapted
    }
}

impl OnlineLearner for KShotState {
    fn name(&self) -> &str {
        "maml_kshot"
    }

    fn begin_stream(&mut self) {
        self.buffer.clear();
        self.adapted = self.prior.as_basis();
        self.pending = None;
    }

    fn predict(&mut self, x: f64) -> Result<f64> {
        crate::engine::set_pending(&mut self.pending, x)?;
        Ok(self.adapted.mean(x))
    }

    fn observe(&mut self, x: f64, y: f64) -> Result<StepInfo> {
        crate::engine::take_pending(&mut self.pending, x)?;
        if self.k == 0 {
            return Ok(StepInfo::default());
        }
        if self.buffer.len() == self.k {
            self.buffer.pop_front();
        }
        self.buffer.push_back((x, y));
        self.adapted = adapt_basis(&self.prior, &SampleSet::from_pairs(self.buffer.iter().copied()))?;
        Ok(StepInfo::default())
    }

    fn model_count(&self) -> usize {
        1
    }
}

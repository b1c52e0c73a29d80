use serde::{Deserialize, Serialize};

use super::MobModel;
use crate::basis::mixture_point_estimate;
use crate::domains::Trajectory;
use crate::latent::{infer_step, prior_step, Anchor, LatentState};
use crate::odds::OddsEvent;
use crate::{Error, Result};

/// What a learner reports after consuming one observation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepInfo {
    /// Latent vector after the observation, for latent-state learners.
    pub latent: Option<Vec<f64>>,
    pub event: Option<OddsEvent>,
}

/// Alias kept for call sites that only deal with the mixture model.
pub type MobStep = StepInfo;

/// A learner that must predict `y_t` from `x_t` before it is shown `y_t`.
///
/// `predict` never sees `y`; `observe` must follow with the same `x`.
pub trait OnlineLearner {
    fn name(&self) -> &str;

    fn predict(&mut self, x: f64) -> Result<f64>;

    fn observe(&mut self, x: f64, y: f64) -> Result<StepInfo>;

    /// Number of task models or bases currently held.
    fn model_count(&self) -> usize;

    /// Resets per-stream state before a new stream.
    fn begin_stream(&mut self) {}
}

pub(crate) fn take_pending(pending: &mut Option<f64>, x: f64) -> Result<()> {
    match pending.take() {
        Some(p) if p.to_bits() == x.to_bits() => Ok(()),
        Some(p) => Err(Error::contract(format!("observed x={x} but the outstanding prediction was for x={p}"))),
        None => Err(Error::contract("observe called without a preceding predict")),
    }
}

pub(crate) fn set_pending(pending: &mut Option<f64>, x: f64) -> Result<()> {
    if pending.is_some() {
        return Err(Error::contract("predict called twice without observe"));
    }
    *pending = Some(x);
    Ok(())
}

impl OnlineLearner for MobModel {
    fn name(&self) -> &str {
        "mob"
    }

    fn begin_stream(&mut self) {
        self.online = super::model::OnlineState {
            z_prev: vec![0.0; self.latent.dim()],
            ..Default::default()
        };
        self.detector.reset_recent();
        self.detector.buffer.clear();
    }

    fn predict(&mut self, x: f64) -> Result<f64> {
        set_pending(&mut self.online.pending, x)?;
        let d = self.latent.dim();
        let z = if self.online.t == 0 {
            vec![0.0; d]
        } else {
            let eps = if self.config.train.sample_prior_at_prediction {
                self.rng.normal_vec(d)
            } else {
                vec![0.0; d]
            };
            let prev = LatentState {
                z: self.online.z_prev.clone(),
                mean: vec![0.0; d],
                std: vec![1.0; d],
                t: self.online.t,
            };
            prior_step(&self.latent.prior, &prev, &eps)?.z
        };
        let w = self.weights_at(&z)?;
        mixture_point_estimate(&self.bases, &w, x)
    }

    fn observe(&mut self, x: f64, y: f64) -> Result<StepInfo> {
        take_pending(&mut self.online.pending, x)?;
        let d = self.latent.dim();
        let t = self.online.t;
        let z_before = self.online.z_prev.clone();
        let z = if t == 0 {
            vec![0.0; d]
        } else {
            let eps = self.rng.normal_vec(d);
            let prev = LatentState {
                z: z_before.clone(),
                mean: vec![0.0; d],
                std: vec![1.0; d],
                t,
            };
            infer_step(&self.latent.inference, &prev, x, y, &eps)?.z
        };

        let window = &mut self.online.window;
        window.push_back((x, y, z_before, t));
        while window.len() > self.config.train.online_window {
            window.pop_front();
        }
        let front = window.front().expect("just pushed");
        let anchor = if front.3 == 0 { Anchor::StreamStart } else { Anchor::After(front.2.clone()) };
        let obs: Vec<(f64, f64)> = window.iter().map(|e| (e.0, e.1)).collect();
        let group = self.next_group();
        let out = self.window_elbo(&obs, &anchor, group.mask())?;
        if out.terms.total().is_finite() {
            let grads = out.grads.expect("mask is non-empty");
            match self.apply_update(group, &grads, 1.0 / obs.len() as f64, self.config.train.online_learning_rate) {
                Ok(()) => {}
                Err(Error::NonFiniteGradient(_)) => self.count_skipped(),
                Err(e) => return Err(e),
            }
        } else {
            self.count_skipped();
        }

        let outcome = self.detector.step(&self.bases, &self.meta_prior, x, y, self.step)?;
        let event = outcome.event(self.step);
        self.step += 1;
        if let Some(basis) = outcome.new_basis {
            self.add_basis(basis)?;
        }
        self.online.z_prev = z.clone();
        self.online.t += 1;
        Ok(StepInfo { latent: Some(z), event })
    }

    fn model_count(&self) -> usize {
        self.n_bases()
    }
}

/// One row of the per-step metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub step: u64,
    pub x: f64,
    pub y: f64,
    pub y_hat: f64,
    pub sq_err: f64,
    pub abs_err: f64,
    pub n_bases: usize,
    pub task: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub rows: Vec<MetricRow>,
    pub events: Vec<OddsEvent>,
    /// `(t, latent)` per step for latent-state learners.
    pub latents: Vec<(u64, Vec<f64>)>,
}

impl Metrics {
    pub fn mse(&self) -> f64 {
        self.rows.iter().map(|r| r.sq_err).sum::<f64>() / self.rows.len().max(1) as f64
    }

    pub fn mae(&self) -> f64 {
        self.rows.iter().map(|r| r.abs_err).sum::<f64>() / self.rows.len().max(1) as f64
    }

    pub fn final_models(&self) -> usize {
        self.rows.last().map_or(0, |r| r.n_bases)
    }
}

/// Streams `stream` through `learner`, predicting each `y` before revealing
/// it. Task labels are only copied into the evaluation rows.
pub fn run_online<L: OnlineLearner + ?Sized>(learner: &mut L, stream: &Trajectory) -> Result<Metrics> {
    learner.begin_stream();
    let mut metrics = Metrics::default();
    for (t, ((x, y), &task)) in stream.observations().iter().zip(stream.task_labels()).enumerate() {
        let y_hat = learner.predict(x)?;
        let info = learner.observe(x, y)?;
        let err = y - y_hat;
        metrics.rows.push(MetricRow {
            step: t as u64,
            x,
            y,
            y_hat,
            sq_err: err * err,
            abs_err: err.abs(),
            n_bases: learner.model_count(),
            task,
        });
        if let Some(e) = info.event {
            metrics.events.push(e);
        }
        if let Some(z) = info.latent {
            metrics.latents.push((t as u64, z));
        }
    }
    Ok(metrics)
}

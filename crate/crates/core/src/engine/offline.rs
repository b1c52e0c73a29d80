use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{save_checkpoint, MobConfig, MobModel};
use crate::basis::{pretrain_basis, EnsemblePrior};
use crate::domains::OfflinePartition;
use crate::latent::{Anchor, ElboGradients};
use crate::ndmath::Rng;
use crate::{Error, Result};

/// Training curve and instantiation record of one offline run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OfflineReport {
    /// Per-timestep ELBO of every minibatch, in order.
    pub minibatch_elbo: Vec<f64>,
    /// Per-timestep ELBO averaged over each epoch.
    pub epoch_elbo: Vec<f64>,
    pub epochs: usize,
    pub stopped_on_plateau: bool,
    /// Global steps at which ODDS added a basis.
    pub instantiations: Vec<u64>,
    pub pretrained_bases: usize,
}

fn diverged(model: &MobModel, reason: String, diagnostics: Option<&Path>) -> Error {
    let checkpoint = diagnostics.and_then(|dir| {
        let path = dir.join("diverged.ckpt");
        std::fs::create_dir_all(dir).ok()?;
        save_checkpoint(model, &path).ok().map(|_| path)
    });
    Error::Divergence { reason, checkpoint }
}

/// Offline phase: one pretrained basis per segmented task, then minibatch
/// ELBO training over the unsegmented trajectories with ODDS instantiation
/// and alternating parameter-group updates.
///
/// On a non-finite loss or gradient a diagnostic checkpoint is written to
/// `diagnostics` (when given) and [`Error::Divergence`] is returned.
pub fn train_offline(partition: &OfflinePartition, prior: EnsemblePrior, config: &MobConfig, seed: u64, diagnostics: Option<&Path>) -> Result<(MobModel, OfflineReport)> {
    config.validate()?;
    let mut rng = Rng::new(seed);
    let mut bases = Vec::with_capacity(partition.segmented.len());
    for (&task, data) in &partition.segmented {
        bases.push(pretrain_basis(&prior, task, data, &config.meta, &mut rng.fork())?);
    }
    let mut report = OfflineReport {
        pretrained_bases: bases.len(),
        ..OfflineReport::default()
    };
    let model_rng = rng.fork();
    let mut model = MobModel::new(config.clone(), bases, prior, model_rng)?;
    let trajectories: Vec<Vec<(f64, f64)>> = partition.unsegmented.iter().map(|t| t.observations().iter().collect()).collect();
    if trajectories.is_empty() {
        return Ok((model, report));
    }
    let train = config.train.clone();
    let mut order: Vec<usize> = (0..trajectories.len()).collect();
    for epoch in 0..train.max_epochs {
        rng.shuffle(&mut order);
        let mut epoch_total = 0.0;
        let mut epoch_steps = 0usize;
        for batch in order.chunks(train.batch_size) {
            // ODDS pass first so every ELBO in the batch sees the final basis set
            for &i in batch {
                model.detector.reset_recent();
                for &(x, y) in &trajectories[i] {
                    let outcome = model.detector.step(&model.bases, &model.meta_prior, x, y, model.step)?;
                    if let Some(basis) = outcome.new_basis {
                        model.add_basis(basis)?;
                        report.instantiations.push(model.step);
                    }
                    model.step += 1;
                }
            }
            let group = model.next_group();
            let mut acc = ElboGradients::zeros(&model.bases, &model.latent);
            let mut total = 0.0;
            let mut steps = 0usize;
            for &i in batch {
                let out = model.window_elbo(&trajectories[i], &Anchor::StreamStart, group.mask())?;
                let value = out.terms.total();
                if !value.is_finite() {
                    return Err(diverged(&model, format!("non-finite ELBO in epoch {epoch}"), diagnostics));
                }
                total += value;
                steps += trajectories[i].len();
                acc.add(out.grads.as_ref().expect("mask is non-empty"), 1.0);
            }
            if let Err(e) = model.apply_update(group, &acc, 1.0 / steps as f64, train.learning_rate) {
                return Err(match e {
                    Error::NonFiniteGradient(name) => diverged(&model, format!("non-finite gradient in {name} during epoch {epoch}"), diagnostics),
                    other => other,
                });
            }
            report.minibatch_elbo.push(total / steps as f64);
            epoch_total += total;
            epoch_steps += steps;
        }
        report.epoch_elbo.push(epoch_total / epoch_steps as f64);
        report.epochs = epoch + 1;
        let n = report.epoch_elbo.len();
        if n > train.plateau_epochs {
            let now = report.epoch_elbo[n - 1];
            let then = report.epoch_elbo[n - 1 - train.plateau_epochs];
            if (now - then) / then.abs().max(1e-12) < train.plateau_tolerance {
                report.stopped_on_plateau = true;
                break;
            }
        }
    }
    Ok((model, report))
}

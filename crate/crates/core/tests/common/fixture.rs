//! Experiment cells built in memory for engine and baseline tests.

use mob_core::basis::{train_ensemble_prior, EnsemblePrior};
use mob_core::domains::{OfflinePartition, TaskSet, Trajectory};
use mob_core::engine::{train_offline, MobModel, OfflineReport};
use mob_core::harness::{partition_for, stream_for, task_set_for, ExperimentConfig};
use mob_core::ndmath::{derive_seed, Rng};

/// A few-second configuration: small networks, short data and one epoch.
pub fn tiny_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk();
    cfg.domain.sizes.segmented_samples = 60;
    cfg.domain.sizes.unsegmented_trajectories = 3;
    cfg.domain.sizes.trajectory_length = 40;
    cfg.domain.stream_length = 80;
    cfg.domain.irreducible_samples = 5;
    let m = &mut cfg.model;
    m.meta.head.hidden = vec![8];
    m.meta.meta_iterations = 5;
    m.meta.pretrain_steps = 10;
    m.latent.dim = 3;
    m.latent.inference_hidden = vec![6];
    m.latent.prior_hidden = vec![6];
    m.latent.mixing_hidden = vec![6];
    m.train.max_epochs = 2;
    m.train.batch_size = 2;
    m.train.online_window = 5;
    cfg
}

pub struct Cell {
    pub config: ExperimentConfig,
    pub tasks: TaskSet,
    pub partition: OfflinePartition,
    pub stream: Trajectory,
    pub prior: EnsemblePrior,
}

impl Cell {
    pub fn new(config: ExperimentConfig, partition: usize, seed: u64) -> Self {
        let tasks = task_set_for(&config, seed).unwrap();
        let partition = partition_for(&config, &tasks, partition, seed).unwrap();
        let stream = stream_for(&config, &tasks, seed).unwrap();
        let prior = train_ensemble_prior(&partition.segmented, &config.model.meta, &mut Rng::new(derive_seed(seed, &[99]))).unwrap();
        Self { config, tasks, partition, stream, prior }
    }

    pub fn train(&self, seed: u64) -> (MobModel, OfflineReport) {
        train_offline(&self.partition, self.prior.clone(), &self.config.model, seed, None).unwrap()
    }
}

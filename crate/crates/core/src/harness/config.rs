use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineConfig;
use crate::domains::{regression_partitions, DatasetSizes, PartitionSpec, TaskNetConfig};
use crate::engine::MobConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Mob,
    MamlKshot,
    MamlContinuous,
    MoleLite,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Mob, Algorithm::MamlKshot, Algorithm::MamlContinuous, Algorithm::MoleLite];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Mob => "mob",
            Algorithm::MamlKshot => "maml_kshot",
            Algorithm::MamlContinuous => "maml_continuous",
            Algorithm::MoleLite => "mole_lite",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == name)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{name}` (expected one of mob, maml_kshot, maml_continuous, mole_lite)")))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Task generator, offline dataset sizes and the online stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub n_tasks: usize,
    pub task_net: TaskNetConfig,
    pub sizes: DatasetSizes,
    pub stream_length: usize,
    pub stream_switch_probability: f64,
    /// Monte Carlo draws per step for the irreducible-error floor.
    pub irreducible_samples: usize,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            n_tasks: 10,
            task_net: TaskNetConfig::default(),
            sizes: DatasetSizes::default(),
            stream_length: 2000,
            stream_switch_probability: 0.02,
            irreducible_samples: 100,
        }
    }
}

/// One experiment: every field must be present in the JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub domain: DomainConfig,
    pub partitions: Vec<PartitionSpec>,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    pub model: MobConfig,
    pub baselines: BaselineConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    /// Full-size constants: M=4, d=32, 128-unit layers, eta=10, L=20, B=32, lr=1e-4.
    fn default() -> Self {
        Self {
            name: "regression".into(),
            domain: DomainConfig::default(),
            partitions: regression_partitions(),
            algorithms: Algorithm::ALL.to_vec(),
            seeds: (0..10).collect(),
            model: MobConfig::default(),
            baselines: BaselineConfig::default(),
            output_dir: PathBuf::from("runs/regression"),
        }
    }
}

impl ExperimentConfig {
    /// Reduced network widths and training budgets that finish the full
    /// 3 partition x 10 seed grid in minutes on one core.
    pub fn desk() -> Self {
        let mut cfg = Self {
            name: "regression-desk".into(),
            output_dir: PathBuf::from("runs/regression-desk"),
            ..Self::default()
        };
        cfg.domain.sizes.unsegmented_trajectories = 16;
        cfg.domain.irreducible_samples = 20;
        let m = &mut cfg.model;
        m.meta.head.hidden = vec![32, 32];
        m.meta.meta_iterations = 1000;
        m.meta.pretrain_steps = 500;
        m.latent.dim = 8;
        m.latent.inference_hidden = vec![32, 32];
        m.latent.prior_hidden = vec![32, 32];
        m.latent.mixing_hidden = vec![32];
        m.train.batch_size = 8;
        m.train.learning_rate = 1e-3;
        m.train.max_epochs = 10;
        m.train.online_learning_rate = 1e-2;
        cfg
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(Self::default()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::Config(format!("unknown preset `{other}` (expected full or desk)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("algorithms must not be empty".into()));
        }
        if self.partitions.is_empty() {
            return Err(Error::Config("partitions must not be empty".into()));
        }
        let mut ids: Vec<usize> = self.partitions.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.partitions.len() {
            return Err(Error::Config("partition ids must be unique".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be unique".into()));
        }
        let d = &self.domain;
        if d.stream_length == 0 {
            return Err(Error::Config("domain.stream_length must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&d.stream_switch_probability) {
            return Err(Error::Config("domain.stream_switch_probability must lie in [0, 1]".into()));
        }
        d.task_net.validate()?;
        for p in &self.partitions {
            if let Some(&t) = p.segmented.iter().chain(&p.unsegmented).find(|&&t| t >= d.n_tasks) {
                return Err(Error::Config(format!("partition {} references task {t} but n_tasks is {}", p.id, d.n_tasks)));
            }
        }
        self.model.validate()?;
        self.baselines.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

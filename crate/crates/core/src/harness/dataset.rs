use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::domains::{make_partition, make_stream, make_task_set, read_partition, read_trajectory_csv, write_partition, write_trajectory_csv, OfflinePartition, TaskSet, Trajectory};
use crate::ndmath::derive_seed;
use crate::{Error, Result};

/// Stage tags for [`derive_seed`]; every random draw of an experiment cell
/// descends from `(seed, stage, partition)`.
pub(crate) mod stage {
    pub const TASKS: u64 = 0;
    pub const PARTITION: u64 = 1;
    pub const STREAM: u64 = 2;
    pub const PRIOR: u64 = 3;
    pub const OFFLINE: u64 = 4;
    pub const FLOOR: u64 = 5;
}

/// Contents of the dataset root's `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub seeds: Vec<u64>,
    pub partition_dirs: Vec<String>,
    pub stream_length: usize,
}

pub fn partition_dir(root: &Path, partition: usize, seed: u64) -> PathBuf {
    root.join(format!("partition_{partition}")).join(format!("seed_{seed}"))
}

/// The task set of one seed. Shared by all partitions of that seed.
pub fn task_set_for(config: &ExperimentConfig, seed: u64) -> Result<TaskSet> {
    let d = &config.domain;
    make_task_set(derive_seed(seed, &[stage::TASKS]), d.n_tasks, &d.task_net)
}

/// The online stream of one seed: every task admissible, same stream for
/// every partition and algorithm.
pub fn stream_for(config: &ExperimentConfig, tasks: &TaskSet, seed: u64) -> Result<Trajectory> {
    let d = &config.domain;
    make_stream(tasks, &tasks.ids(), d.stream_length, d.stream_switch_probability, derive_seed(seed, &[stage::STREAM]))
}

pub fn partition_for(config: &ExperimentConfig, tasks: &TaskSet, partition: usize, seed: u64) -> Result<OfflinePartition> {
    let spec = config
        .partitions
        .iter()
        .find(|p| p.id == partition)
        .ok_or_else(|| Error::Config(format!("no partition with id {partition}")))?;
    make_partition(tasks, spec, &config.domain.sizes, derive_seed(seed, &[stage::PARTITION, partition as u64]))
}

fn ensure_writable(root: &Path, force: bool) -> Result<()> {
    if root.exists() {
        let mut entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
        if entries.next().is_some() && !force {
            return Err(Error::OutputNotEmpty(root.to_path_buf()));
        }
    }
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))
}

/// Writes every (partition, seed) dataset under `root`:
/// `config.json`, `manifest.json` and `partition_<id>/seed_<s>/` holding the
/// offline partition files plus `stream.csv`.
pub fn generate(config: &ExperimentConfig, root: &Path, force: bool) -> Result<DatasetManifest> {
    config.validate()?;
    ensure_writable(root, force)?;
    config.save(&root.join("config.json"))?;
    for &seed in &config.seeds {
        let tasks = task_set_for(config, seed)?;
        let stream = stream_for(config, &tasks, seed)?;
        for spec in &config.partitions {
            let dir = partition_dir(root, spec.id, seed);
            let part = partition_for(config, &tasks, spec.id, seed)?;
            let part_seed = derive_seed(seed, &[stage::PARTITION, spec.id as u64]);
            write_partition(&dir, &part, part_seed, derive_seed(seed, &[stage::TASKS]), config.domain.n_tasks, &config.domain.sizes)?;
            write_trajectory_csv(&dir.join("stream.csv"), &stream)?;
        }
    }
    let manifest = DatasetManifest {
        name: config.name.clone(),
        seeds: config.seeds.clone(),
        partition_dirs: config.partitions.iter().map(|p| format!("partition_{}", p.id)).collect(),
        stream_length: config.domain.stream_length,
    };
    let path = root.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Reads one generated cell back: offline partition and online stream.
pub fn load_cell(root: &Path, partition: usize, seed: u64) -> Result<(OfflinePartition, Trajectory)> {
    let dir = partition_dir(root, partition, seed);
    let (part, _) = read_partition(&dir)?;
    let stream = read_trajectory_csv(&dir.join("stream.csv"))?;
    Ok((part, stream))
}

/// Fails unless `root` holds a dataset generated from exactly `config`.
pub fn check_dataset(config: &ExperimentConfig, root: &Path) -> Result<()> {
    let path = root.join("config.json");
    if !path.exists() {
        return Err(Error::io(&path, std::io::Error::new(std::io::ErrorKind::NotFound, "dataset not generated (run `gen` first)")));
    }
    let stored = ExperimentConfig::load(&path)?;
    if stored.domain != config.domain || stored.partitions != config.partitions || !config.seeds.iter().all(|s| stored.seeds.contains(s)) {
        return Err(Error::Config(format!("{} was generated from a different domain, partition or seed set", root.display())));
    }
    Ok(())
}

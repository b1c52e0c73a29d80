use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetSizes, Observations, OfflinePartition, PartitionSpec, SampleSet, Trajectory};
use crate::{Error, Result};

/// Contents of `partition.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionManifest {
    pub seed: u64,
    pub task_seed: u64,
    pub n_tasks: usize,
    pub spec: PartitionSpec,
    pub sizes: DatasetSizes,
    pub unsegmented_files: Vec<String>,
    pub segmented_files: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRow {
    t: usize,
    x: f64,
    y: f64,
    task: usize,
}

#[derive(Serialize, Deserialize)]
struct SampleRow {
    x: f64,
    y: f64,
}

/// Writes `t,x,y,task` rows.
pub fn write_trajectory_csv(path: &Path, trajectory: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (t, ((x, y), &task)) in trajectory
        .observations()
        .iter()
        .zip(trajectory.task_labels())
        .enumerate()
    {
        w.serialize(TrajectoryRow { t, x, y, task })?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let mut r = csv::Reader::from_path(path)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut tasks = Vec::new();
    for (i, row) in r.deserialize::<TrajectoryRow>().enumerate() {
        let row = row?;
        if row.t != i {
            return Err(Error::contract(format!("{}: row {i} has t = {}", path.display(), row.t)));
        }
        xs.push(row.x);
        ys.push(row.y);
        tasks.push(row.task);
    }
    Trajectory::new(Observations::new(xs, ys)?, tasks)
}

fn write_samples(path: &Path, samples: &SampleSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (x, y) in samples.iter() {
        w.serialize(SampleRow { x, y })?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn read_samples(path: &Path) -> Result<SampleSet> {
    let mut r = csv::Reader::from_path(path)?;
    let mut pairs = Vec::new();
    for row in r.deserialize::<SampleRow>() {
        let row = row?;
        pairs.push((row.x, row.y));
    }
    Ok(SampleSet::from_pairs(pairs))
}

/// Lays out one partition under `dir`:
/// `partition.json`, `segmented/task_<id>.csv`, `unsegmented/traj_<k>.csv`.
pub fn write_partition(dir: &Path, partition: &OfflinePartition, seed: u64, task_seed: u64, n_tasks: usize, sizes: &DatasetSizes) -> Result<PartitionManifest> {
    let seg_dir = dir.join("segmented");
    let unseg_dir = dir.join("unsegmented");
    for d in [&seg_dir, &unseg_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut segmented_files = Vec::new();
    for (task, samples) in &partition.segmented {
        let name = format!("segmented/task_{task}.csv");
        write_samples(&dir.join(&name), samples)?;
        segmented_files.push(name);
    }
    let mut unsegmented_files = Vec::new();
    for (k, traj) in partition.unsegmented.iter().enumerate() {
        let name = format!("unsegmented/traj_{k:03}.csv");
        write_trajectory_csv(&dir.join(&name), traj)?;
        unsegmented_files.push(name);
    }
    let manifest = PartitionManifest {
        seed,
        task_seed,
        n_tasks,
        spec: partition.spec.clone(),
        sizes: *sizes,
        unsegmented_files,
        segmented_files,
    };
    let path = dir.join("partition.json");
    let body = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_partition(dir: &Path) -> Result<(OfflinePartition, PartitionManifest)> {
    let path = dir.join("partition.json");
    let body = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: PartitionManifest = serde_json::from_str(&body)?;
    let mut segmented = std::collections::BTreeMap::new();
    for (&task, name) in manifest.spec.segmented.iter().zip(&manifest.segmented_files) {
        segmented.insert(task, read_samples(&dir.join(name))?);
    }
    let unsegmented = manifest
        .unsegmented_files
        .iter()
        .map(|name| read_trajectory_csv(&dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        OfflinePartition {
            spec: manifest.spec.clone(),
            segmented,
            unsegmented,
        },
        manifest,
    ))
}

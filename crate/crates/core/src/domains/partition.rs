use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{sample_trajectory, TaskProcess, TaskSet, Trajectory};
use crate::ndmath::{derive_seed, Rng};
use crate::{Error, Result};

/// Labeled `(x, y)` samples from one task.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleSet {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl SampleSet {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::contract("sample set inputs and targets differ in length"));
        }
        Ok(Self { xs, ys })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let (xs, ys) = pairs.into_iter().unzip();
        Self { xs, ys }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    /// Subset by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> SampleSet {
        SampleSet {
            xs: indices.iter().map(|&i| self.xs[i]).collect(),
            ys: indices.iter().map(|&i| self.ys[i]).collect(),
        }
    }

    /// Deterministic split into the first `n` samples and the rest.
    pub fn split_at(&self, n: usize) -> (SampleSet, SampleSet) {
        let n = n.min(self.len());
        (
            SampleSet {
                xs: self.xs[..n].to_vec(),
                ys: self.ys[..n].to_vec(),
            },
            SampleSet {
                xs: self.xs[n..].to_vec(),
                ys: self.ys[n..].to_vec(),
            },
        )
    }
}

/// Which tasks appear in the segmented and unsegmented offline data.
///
/// `unsegmented` lists every task in `D_u`, including the segmented ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub id: usize,
    pub segmented: Vec<usize>,
    pub unsegmented: Vec<usize>,
}

impl PartitionSpec {
    pub fn validate(&self, task_set: &TaskSet) -> Result<()> {
        for &t in self.segmented.iter().chain(&self.unsegmented) {
            task_set.get(t)?;
        }
        let seg: BTreeSet<_> = self.segmented.iter().collect();
        let unseg: BTreeSet<_> = self.unsegmented.iter().collect();
        if seg.len() != self.segmented.len() || unseg.len() != self.unsegmented.len() {
            return Err(Error::Config(format!("partition {} lists a task twice", self.id)));
        }
        if let Some(t) = seg.difference(&unseg).next() {
            return Err(Error::Config(format!(
                "partition {}: segmented task {t} is missing from the unsegmented set",
                self.id
            )));
        }
        Ok(())
    }
}

/// The three regression partitions: segmented tasks are also present in `D_u`,
/// which adds three more.
pub fn regression_partitions() -> Vec<PartitionSpec> {
    vec![
        PartitionSpec {
            id: 1,
            segmented: vec![0, 5],
            unsegmented: vec![0, 5, 1, 2, 6],
        },
        PartitionSpec {
            id: 2,
            segmented: vec![4, 7],
            unsegmented: vec![4, 7, 5, 6, 9],
        },
        PartitionSpec {
            id: 3,
            segmented: vec![2, 7],
            unsegmented: vec![2, 7, 0, 3, 9],
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSizes {
    pub segmented_samples: usize,
    pub unsegmented_trajectories: usize,
    pub trajectory_length: usize,
    pub switch_probability: f64,
}

impl Default for DatasetSizes {
    fn default() -> Self {
        Self {
            segmented_samples: 500,
            unsegmented_trajectories: 32,
            trajectory_length: 200,
            switch_probability: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflinePartition {
    pub spec: PartitionSpec,
    /// `D_l`: task id to labeled samples.
    pub segmented: BTreeMap<usize, SampleSet>,
    /// `D_u`: unlabeled multi-task trajectories.
    pub unsegmented: Vec<Trajectory>,
}

/// Builds `D_l` and `D_u`. Segmented tasks are sampled in ascending id order,
/// each from its own derived stream; trajectory `k` uses its own derived stream.
pub fn make_partition(task_set: &TaskSet, spec: &PartitionSpec, sizes: &DatasetSizes, seed: u64) -> Result<OfflinePartition> {
    spec.validate(task_set)?;
    let mut segmented = BTreeMap::new();
    for &task in &spec.segmented {
        let mut rng = Rng::new(derive_seed(seed, &[0, task as u64]));
        let spec_t = task_set.get(task)?;
        let mut xs = Vec::with_capacity(sizes.segmented_samples);
        let mut ys = Vec::with_capacity(sizes.segmented_samples);
        for _ in 0..sizes.segmented_samples {
            let x = rng.uniform_range(-1.0, 1.0);
            xs.push(x);
            ys.push(spec_t.sample(x, &mut rng)?);
        }
        segmented.insert(task, SampleSet { xs, ys });
    }
    let mut unsegmented = Vec::with_capacity(sizes.unsegmented_trajectories);
    for k in 0..sizes.unsegmented_trajectories {
        let rng = Rng::new(derive_seed(seed, &[1, k as u64]));
        let mut process = TaskProcess::new(spec.unsegmented.clone(), sizes.switch_probability, rng)?;
        unsegmented.push(sample_trajectory(&mut process, task_set, sizes.trajectory_length)?);
    }
    Ok(OfflinePartition {
        spec: spec.clone(),
        segmented,
        unsegmented,
    })
}

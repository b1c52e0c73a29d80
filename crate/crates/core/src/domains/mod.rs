//! Synthetic regression benchmark built from randomly initialized networks.
//!
//! Each task `i` draws `x ~ U[-1, 1]` and `y ~ N(mu_i(x), sigma_i(x)^2)` where
//! both functions are small random tanh networks. Tasks switch according to a
//! Markov process with a fixed per-step switching probability.
//!
//! Learning code only ever sees [`Observations`]; the hidden task labels of a
//! [`Trajectory`] are reachable only through [`Trajectory::task_labels`], which
//! the evaluation side uses.

mod divergence;
mod io;
mod partition;
mod process;
mod tasks;

pub use divergence::{bhattacharyya_distance, gaussian_bhattacharyya, irreducible_error, uniform_grid, IrreducibleError};
pub use io::{read_partition, read_trajectory_csv, write_partition, write_trajectory_csv, PartitionManifest};
pub use partition::{make_partition, regression_partitions, DatasetSizes, OfflinePartition, PartitionSpec, SampleSet};
pub use process::{make_stream, sample_trajectory, Observations, TaskProcess, Trajectory};
pub use tasks::{make_task_set, TaskNetConfig, TaskSet, TaskSpec};

//! Offline training, online adaptation and checkpoint persistence for the
//! mixture-of-basis model.

mod checkpoint;
mod config;
mod model;
mod offline;
mod online;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{MobConfig, TrainConfig};
pub use model::{MobModel, ParamGroup};
pub use offline::{train_offline, OfflineReport};
pub(crate) use online::{set_pending, take_pending};
pub use online::{run_online, MetricRow, Metrics, MobStep, OnlineLearner, StepInfo};

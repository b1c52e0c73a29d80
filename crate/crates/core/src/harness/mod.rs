//! Experiment plumbing: JSON configs, dataset generation, runs, reports and
//! latent-space PCA export.
//!
//! A dataset root produced by [`generate`] looks like
//!
//! ```text
//! config.json  manifest.json
//! partition_<id>/seed_<s>/{partition.json, segmented/, unsegmented/, stream.csv}
//! runs/<algorithm>/partition_<id>/seed_<s>/{config.json, summary.json, metrics.csv, ...}
//! report.csv  report.txt
//! ```

mod config;
mod dataset;
mod pca;
mod report;
mod run;

pub use config::{Algorithm, DomainConfig, ExperimentConfig};
pub use dataset::{check_dataset, generate, load_cell, partition_dir, partition_for, stream_for, task_set_for, DatasetManifest};
pub use pca::{pca, pca_export, read_latent_trace, PcaResult, TraceRow, POWER_MAX_ITERATIONS, POWER_TOLERANCE};
pub use report::{aggregate, collect_runs, render_csv, render_table, report, ReportRow, Stat};
pub use run::{read_summary, run_cell, run_dir, run_experiment, write_events_csv, write_latent_trace, write_metrics_csv, OfflineSummary, RunSummary};

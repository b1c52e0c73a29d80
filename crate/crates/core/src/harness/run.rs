use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::dataset::{check_dataset, load_cell, stage, task_set_for};
use super::{Algorithm, ExperimentConfig};
use crate::baselines::{ContinuousState, KShotState, MoleLiteState};
use crate::basis::train_ensemble_prior;
use crate::domains::irreducible_error;
use crate::engine::{run_online, save_checkpoint, train_offline, Metrics};
use crate::ndmath::{derive_seed, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineSummary {
    pub epochs: usize,
    pub stopped_on_plateau: bool,
    pub pretrained_bases: usize,
    pub instantiations: usize,
    pub final_epoch_elbo: f64,
}

/// `summary.json` of one (algorithm, partition, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub partition: usize,
    pub seed: u64,
    pub steps: usize,
    pub mse: f64,
    pub mae: f64,
    /// Final number of bases (task models for the baselines).
    pub n_bases: usize,
    pub mse_floor: f64,
    pub mae_floor: f64,
    pub reducible_mse: f64,
    pub reducible_mae: f64,
    pub odds_flags: usize,
    pub skipped_updates: u64,
    pub offline: Option<OfflineSummary>,
}

pub fn run_dir(root: &Path, algorithm: Algorithm, partition: usize, seed: u64) -> PathBuf {
    root.join("runs").join(algorithm.as_str()).join(format!("partition_{partition}")).join(format!("seed_{seed}"))
}

fn csv_writer(path: &Path, header: &[String]) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header)?;
    Ok(w)
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// `algorithm,step,x,y,y_hat,sq_err,abs_err,n_bases,task`
pub fn write_metrics_csv(path: &Path, algorithm: Algorithm, metrics: &Metrics) -> Result<()> {
    let mut w = csv_writer(path, &strings(&["algorithm", "step", "x", "y", "y_hat", "sq_err", "abs_err", "n_bases", "task"]))?;
    for r in &metrics.rows {
        w.serialize((algorithm.as_str(), r.step, r.x, r.y, r.y_hat, r.sq_err, r.abs_err, r.n_bases, r.task))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `step,score_min,p_in,ll_in,ll_out,s_odds,is_ood,instantiated`
pub fn write_events_csv(path: &Path, metrics: &Metrics) -> Result<()> {
    let mut w = csv_writer(path, &strings(&["step", "score_min", "p_in", "ll_in", "ll_out", "s_odds", "is_ood", "instantiated"]))?;
    for e in &metrics.events {
        w.serialize(e)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `t,task,z_0,...,z_{d-1}`
pub fn write_latent_trace(path: &Path, metrics: &Metrics) -> Result<()> {
    let d = metrics.latents.first().map_or(0, |(_, z)| z.len());
    let mut header = strings(&["t", "task"]);
    header.extend((0..d).map(|i| format!("z_{i}")));
    let mut w = csv_writer(path, &header)?;
    for (t, z) in &metrics.latents {
        let task = metrics.rows[*t as usize].task;
        let mut record = vec![t.to_string(), task.to_string()];
        record.extend(z.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Runs the requested algorithms on one generated (partition, seed) cell.
/// The ensemble prior is trained once and shared by every algorithm.
pub fn run_cell(config: &ExperimentConfig, root: &Path, partition: usize, seed: u64, algorithms: &[Algorithm]) -> Result<Vec<RunSummary>> {
    let (part, stream) = load_cell(root, partition, seed)?;
    let tasks = task_set_for(config, seed)?;
    let floor = irreducible_error(&tasks, &stream, config.domain.irreducible_samples, &mut Rng::new(derive_seed(seed, &[stage::FLOOR])))?;
    let prior = train_ensemble_prior(&part.segmented, &config.model.meta, &mut Rng::new(derive_seed(seed, &[stage::PRIOR, partition as u64])))?;

    let mut out = Vec::with_capacity(algorithms.len());
    for &algorithm in algorithms {
        let dir = run_dir(root, algorithm, partition, seed);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        config.save(&dir.join("config.json"))?;
        let mut offline = None;
        let mut skipped = 0;
        let metrics = match algorithm {
            Algorithm::Mob => {
                let offline_seed = derive_seed(seed, &[stage::OFFLINE, partition as u64]);
                let (mut model, report) = train_offline(&part, prior.clone(), &config.model, offline_seed, Some(&dir))?;
                save_checkpoint(&model, &dir.join("offline.ckpt"))?;
                offline = Some(OfflineSummary {
                    epochs: report.epochs,
                    stopped_on_plateau: report.stopped_on_plateau,
                    pretrained_bases: report.pretrained_bases,
                    instantiations: report.instantiations.len(),
                    final_epoch_elbo: report.epoch_elbo.last().copied().unwrap_or(f64::NAN),
                });
                let metrics = run_online(&mut model, &stream)?;
                skipped = model.skipped_updates();
                save_checkpoint(&model, &dir.join("final.ckpt"))?;
                write_events_csv(&dir.join("odds_events.csv"), &metrics)?;
                write_latent_trace(&dir.join("latent_trace.csv"), &metrics)?;
                metrics
            }
            Algorithm::MamlKshot => run_online(&mut KShotState::new(prior.clone(), config.baselines.k), &stream)?,
            Algorithm::MamlContinuous => {
                let mut learner = ContinuousState::new(prior.clone(), config.baselines.continuous_learning_rate);
                let metrics = run_online(&mut learner, &stream)?;
                skipped = learner.skipped_updates();
                metrics
            }
            Algorithm::MoleLite => run_online(&mut MoleLiteState::new(prior.clone(), config.baselines.mole.clone())?, &stream)?,
        };
        write_metrics_csv(&dir.join("metrics.csv"), algorithm, &metrics)?;
        let (mse, mae) = (metrics.mse(), metrics.mae());
        let summary = RunSummary {
            algorithm,
            partition,
            seed,
            steps: metrics.rows.len(),
            mse,
            mae,
            n_bases: metrics.final_models(),
            mse_floor: floor.mse,
            mae_floor: floor.mae,
            reducible_mse: mse - floor.mse,
            reducible_mae: mae - floor.mae,
            odds_flags: metrics.events.iter().filter(|e| e.is_ood).count(),
            skipped_updates: skipped,
            offline,
        };
        write_json(&dir.join("summary.json"), &summary)?;
        out.push(summary);
    }
    Ok(out)
}

/// Runs every (partition, seed) cell on up to `jobs` worker threads.
/// Results come back in config order regardless of scheduling.
pub fn run_experiment(config: &ExperimentConfig, root: &Path, algorithms: &[Algorithm], seeds: &[u64], jobs: usize) -> Result<Vec<RunSummary>> {
    config.validate()?;
    check_dataset(config, root)?;
    if let Some(s) = seeds.iter().find(|s| !config.seeds.contains(s)) {
        return Err(Error::Config(format!("seed {s} is not listed in the config")));
    }
    let cells: Vec<(usize, u64)> = config.partitions.iter().flat_map(|p| seeds.iter().map(move |&s| (p.id, s))).collect();
    let results: Vec<Mutex<Option<Result<Vec<RunSummary>>>>> = cells.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, cells.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(partition, seed)) = cells.get(i) else { break };
                let r = run_cell(config, root, partition, seed, algorithms);
                *results[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    let mut out = Vec::new();
    for slot in results {
        out.extend(slot.into_inner().expect("result slot").expect("every cell ran")?);
    }
    Ok(out)
}

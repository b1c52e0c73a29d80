//! Covariate- and concept-shift scenarios for the OoD detector.
//!
//! Bases stay fixed; the detector scores an in-distribution phase and then
//! a shifted phase, and each phase's flag rate is reported.

use std::collections::BTreeMap;

use mob_core::basis::{pretrain_basis, train_ensemble_prior, EnsembleBasis, EnsemblePrior, HeadConfig, MetaConfig};
use mob_core::domains::{bhattacharyya_distance, make_task_set, uniform_grid, SampleSet, TaskSet, TaskNetConfig, TaskSpec};
use mob_core::ndmath::{derive_seed, Rng};
use mob_core::odds::{OddsConfig, OddsDetector};

pub const PHASE_LENGTH: usize = 200;
const TRAIN_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlagRates {
    pub in_distribution: f64,
    pub shifted: f64,
    /// Mean minimum uncertainty score over the shifted phase.
    pub shifted_score: f64,
}

impl FlagRates {
    pub fn margin(&self) -> f64 {
        self.shifted - self.in_distribution
    }
}

pub fn meta_config() -> MetaConfig {
    MetaConfig {
        head: HeadConfig { hidden: vec![32, 32], ..HeadConfig::default() },
        meta_iterations: 1000,
        pretrain_steps: 500,
        ..MetaConfig::default()
    }
}

fn samples(task: &TaskSpec, n: usize, lo: f64, hi: f64, rng: &mut Rng) -> SampleSet {
    SampleSet::from_pairs((0..n).map(|_| {
        let x = rng.uniform_range(lo, hi);
        (x, task.sample(x, rng).unwrap())
    }))
}

fn fit(tasks: &TaskSet, ids: &[usize], lo: f64, hi: f64, rng: &mut Rng) -> (EnsemblePrior, Vec<EnsembleBasis>) {
    let cfg = meta_config();
    let data: BTreeMap<usize, SampleSet> = ids.iter().map(|&i| (i, samples(tasks.get(i).unwrap(), TRAIN_SAMPLES, lo, hi, rng))).collect();
    let prior = train_ensemble_prior(&data, &cfg, rng).unwrap();
    let bases = data.iter().map(|(&i, d)| pretrain_basis(&prior, i, d, &cfg, rng).unwrap()).collect();
    (prior, bases)
}

/// Flag rate of each phase; both phases are scored by one detector run.
fn score_phases(bases: &[EnsembleBasis], prior: &EnsemblePrior, phases: [Vec<(f64, f64)>; 2]) -> FlagRates {
    let mut detector = OddsDetector::new(OddsConfig::default()).unwrap();
    let mut step = 0u64;
    let mut rates = [0.0; 2];
    let mut scores = [0.0; 2];
    for ((rate, mean_score), phase) in rates.iter_mut().zip(&mut scores).zip(&phases) {
        let mut flagged = 0usize;
        let mut scored = 0usize;
        let mut score_sum = 0.0;
        for &(x, y) in phase {
            if let Some(v) = detector.verdict(bases, prior, x, y, step).unwrap() {
                score_sum += v.min_score();
                scored += 1;
                flagged += usize::from(v.is_ood);
            }
            step += 1;
        }
        *rate = flagged as f64 / scored.max(1) as f64;
        *mean_score = score_sum / scored.max(1) as f64;
    }
    FlagRates { in_distribution: rates[0], shifted: rates[1], shifted_score: scores[1] }
}

fn phase(task: &TaskSpec, lo: f64, hi: f64, rng: &mut Rng) -> Vec<(f64, f64)> {
    samples(task, PHASE_LENGTH, lo, hi, rng).iter().collect()
}

/// Bases trained on `x` in [-1, 0]; the shifted phase draws `x` from
/// [0.5, 1] with the same conditional.
pub fn covariate_shift(seed: u64) -> FlagRates {
    let tasks = make_task_set(derive_seed(seed, &[0]), 4, &TaskNetConfig::default()).unwrap();
    let mut rng = Rng::new(derive_seed(seed, &[1]));
    let (prior, bases) = fit(&tasks, &[0, 1, 2, 3], -1.0, 0.0, &mut rng);
    let task = tasks.get(0).unwrap();
    let id = phase(task, -1.0, 0.0, &mut rng);
    let shifted = phase(task, 0.5, 1.0, &mut rng);
    score_phases(&bases, &prior, [id, shifted])
}

/// The held-out task farthest, in its nearest-basis Bhattacharyya distance,
/// from every basis task.
pub fn most_distant(tasks: &TaskSet, basis_ids: &[usize], held_out: &[usize]) -> usize {
    let grid = uniform_grid(200);
    let nearest = |h: usize| {
        basis_ids
            .iter()
            .map(|&b| bhattacharyya_distance(tasks.get(h).unwrap(), tasks.get(b).unwrap(), &grid))
            .fold(f64::INFINITY, f64::min)
    };
    *held_out.iter().max_by(|&&a, &&b| nearest(a).total_cmp(&nearest(b))).unwrap()
}

/// Bases and phases share `x` in [-1, 1]; the shifted phase draws `y` from
/// the held-out task most distant from the basis tasks.
pub fn concept_shift(seed: u64) -> FlagRates {
    let tasks = make_task_set(derive_seed(seed, &[2]), 8, &TaskNetConfig::default()).unwrap();
    let mut rng = Rng::new(derive_seed(seed, &[3]));
    let basis_ids = [0, 1, 2, 3];
    let (prior, bases) = fit(&tasks, &basis_ids, -1.0, 1.0, &mut rng);
    let held = most_distant(&tasks, &basis_ids, &[4, 5, 6, 7]);
    let id = phase(tasks.get(0).unwrap(), -1.0, 1.0, &mut rng);
    let shifted = phase(tasks.get(held).unwrap(), -1.0, 1.0, &mut rng);
    score_phases(&bases, &prior, [id, shifted])
}

use serde::{Deserialize, Serialize};

use super::TaskSet;
use crate::ndmath::Rng;
use crate::{Error, Result};

/// The `(x, y)` stream a learner is allowed to see.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Observations {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Observations {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::contract(format!(
                "{} inputs but {} targets",
                xs.len(),
                ys.len()
            )));
        }
        Ok(Self { xs, ys })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
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
}

/// Observation stream plus the hidden task that generated each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    observations: Observations,
    tasks: Vec<usize>,
}

impl Trajectory {
    pub fn new(observations: Observations, tasks: Vec<usize>) -> Result<Self> {
        if observations.len() != tasks.len() {
            return Err(Error::contract("task labels and observations differ in length"));
        }
        Ok(Self {
            observations,
            tasks,
        })
    }

    pub fn observations(&self) -> &Observations {
        &self.observations
    }

    /// Ground-truth task per step. Evaluation only.
    pub fn task_labels(&self) -> &[usize] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn switch_count(&self) -> usize {
        self.tasks.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

/// Markov task process: stay with probability `1 - p`, otherwise jump to a
/// different admissible task chosen uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskProcess {
    active: usize,
    switch_probability: f64,
    admissible: Vec<usize>,
    rng: Rng,
}

impl TaskProcess {
    /// The initial task is drawn uniformly from `admissible`.
    pub fn new(admissible: Vec<usize>, switch_probability: f64, mut rng: Rng) -> Result<Self> {
        if admissible.is_empty() {
            return Err(Error::contract("task process needs at least one admissible task"));
        }
        if !(0.0..=1.0).contains(&switch_probability) {
            return Err(Error::contract(format!(
                "switch probability {switch_probability} outside [0, 1]"
            )));
        }
        let active = admissible[rng.below(admissible.len())];
        Ok(Self {
            active,
            switch_probability,
            admissible,
            rng,
        })
    }

    pub fn active(&self) -> usize {
        self.active
    }

    pub fn admissible(&self) -> &[usize] {
        &self.admissible
    }

    pub fn rng_mut(&mut self) -> &mut Rng {
        &mut self.rng
    }

    /// Advances one step and returns the new active task.
    pub fn step(&mut self) -> usize {
        if self.admissible.len() > 1 && self.rng.uniform() < self.switch_probability {
            let others: Vec<usize> = self
                .admissible
                .iter()
                .copied()
                .filter(|&t| t != self.active)
                .collect();
            self.active = others[self.rng.below(others.len())];
        }
        self.active
    }
}

/// Samples `length` steps: step 0 uses the process's current task, later
/// steps advance the chain first; then `x ~ U[-1, 1]` and `y` from the task.
pub fn sample_trajectory(process: &mut TaskProcess, task_set: &TaskSet, length: usize) -> Result<Trajectory> {
    if length == 0 {
        return Err(Error::contract("trajectory length must be at least 1"));
    }
    for &id in process.admissible() {
        task_set.get(id)?;
    }
    let mut xs = Vec::with_capacity(length);
    let mut ys = Vec::with_capacity(length);
    let mut tasks = Vec::with_capacity(length);
    for t in 0..length {
        let task = if t == 0 { process.active() } else { process.step() };
        let rng = process.rng_mut();
        let x = rng.uniform_range(-1.0, 1.0);
        let y = task_set.get(task)?.sample(x, rng)?;
        xs.push(x);
        ys.push(y);
        tasks.push(task);
    }
    Trajectory::new(Observations::new(xs, ys)?, tasks)
}

/// Convenience wrapper: fresh process seeded with `seed`, then one trajectory.
pub fn make_stream(
    task_set: &TaskSet,
    admissible: &[usize],
    length: usize,
    switch_probability: f64,
    seed: u64,
) -> Result<Trajectory> {
    let mut process = TaskProcess::new(admissible.to_vec(), switch_probability, Rng::new(seed))?;
    sample_trajectory(&mut process, task_set, length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{make_task_set, TaskNetConfig};

    fn tasks() -> TaskSet {
        make_task_set(3, 10, &TaskNetConfig::default()).unwrap()
    }

    #[test]
    fn zero_switch_probability_keeps_task() {
        let t = make_stream(&tasks(), &[1, 4, 7], 500, 0.0, 8).unwrap();
        assert!(t.task_labels().iter().all(|&l| l == t.task_labels()[0]));
    }

    #[test]
    fn forced_switch_alternates() {
        let t = make_stream(&tasks(), &[2, 6], 100, 1.0, 8).unwrap();
        for w in t.task_labels().windows(2) {
            assert_ne!(w[0], w[1]);
        }
    }

    #[test]
    fn switch_count_near_binomial_mean() {
        let t = make_stream(&tasks(), &tasks().ids(), 10_000, 0.02, 21).unwrap();
        let n = t.switch_count() as f64;
        assert!((n - 200.0).abs() <= 60.0, "switches {n}");
    }

    #[test]
    fn inputs_in_range_and_labels_admissible() {
        let t = make_stream(&tasks(), &[0, 5], 1000, 0.05, 2).unwrap();
        assert!(t.observations().xs().iter().all(|x| (-1.0..1.0).contains(x)));
        assert!(t.task_labels().iter().all(|l| [0, 5].contains(l)));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(TaskProcess::new(vec![], 0.1, Rng::new(0)).is_err());
        assert!(TaskProcess::new(vec![1], 1.5, Rng::new(0)).is_err());
        assert!(make_stream(&tasks(), &[0], 0, 0.1, 0).is_err());
        assert!(matches!(make_stream(&tasks(), &[42], 3, 0.1, 0), Err(Error::UnknownTask(42))));
    }
}

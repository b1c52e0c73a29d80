use serde::{Deserialize, Serialize};

use crate::ndmath::{derive_seed, logistic, Mlp, Rng};
use crate::{Error, Result};

/// Architecture of the random task generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskNetConfig {
    pub hidden: Vec<usize>,
    /// Multiplier on the mean network output.
    pub mean_scale: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Weight std is `init_gain / sqrt(fan_in)`.
    pub init_gain: f64,
}

impl Default for TaskNetConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            mean_scale: 5.0,
            sigma_min: 0.25,
            sigma_max: 3.0,
            init_gain: 1.5,
        }
    }
}

impl TaskNetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min > 0.0 && self.sigma_max >= self.sigma_min) {
            return Err(Error::Config(format!(
                "task sigma range [{}, {}] is invalid",
                self.sigma_min, self.sigma_max
            )));
        }
        Ok(())
    }
}

/// One regression task: `y ~ N(mean(x), sigma(x)^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: usize,
    mu_net: Mlp,
    sigma_net: Mlp,
    mean_scale: f64,
    sigma_min: f64,
    sigma_max: f64,
}

impl TaskSpec {
    pub fn new(id: usize, seed: u64, cfg: &TaskNetConfig) -> Self {
        let mut rng = Rng::new(derive_seed(seed, &[id as u64]));
        let mut sizes = vec![1];
        sizes.extend(&cfg.hidden);
        sizes.push(1);
        let mu_net = Mlp::random(&sizes, cfg.init_gain, &mut rng);
        let sigma_net = Mlp::random(&sizes, cfg.init_gain, &mut rng);
        Self {
            id,
            mu_net,
            sigma_net,
            mean_scale: cfg.mean_scale,
            sigma_min: cfg.sigma_min,
            sigma_max: cfg.sigma_max,
        }
    }

    pub fn mean(&self, x: f64) -> f64 {
        self.mean_scale * self.mu_net.forward(&[x]).expect("scalar net")[0]
    }

    /// Standard deviation, always within `[sigma_min, sigma_max]`.
    pub fn sigma(&self, x: f64) -> f64 {
        let raw = self.sigma_net.forward(&[x]).expect("scalar net")[0];
        self.sigma_min + (self.sigma_max - self.sigma_min) * logistic(raw)
    }

    pub fn sigma_bounds(&self) -> (f64, f64) {
        (self.sigma_min, self.sigma_max)
    }

    /// Draws `y` for input `x` in `[-1, 1]`.
    pub fn sample(&self, x: f64, rng: &mut Rng) -> Result<f64> {
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::contract(format!("task input {x} outside [-1, 1]")));
        }
        Ok(self.mean(x) + self.sigma(x) * rng.normal())
    }

    /// Same task with its noise network pinned at `sigma_min` (test helper).
    pub fn with_constant_sigma(&self) -> Self {
        let mut t = self.clone();
        t.sigma_max = t.sigma_min;
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSet {
    pub seed: u64,
    tasks: Vec<TaskSpec>,
}

impl TaskSet {
    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn get(&self, id: usize) -> Result<&TaskSpec> {
        self.tasks.get(id).ok_or(Error::UnknownTask(id))
    }

    pub fn ids(&self) -> Vec<usize> {
        (0..self.tasks.len()).collect()
    }
}

/// Builds `n_tasks` tasks; task `i` depends only on `(seed, i)`.
pub fn make_task_set(seed: u64, n_tasks: usize, cfg: &TaskNetConfig) -> Result<TaskSet> {
    if n_tasks == 0 {
        return Err(Error::contract("a task set needs at least one task"));
    }
    cfg.validate()?;
    Ok(TaskSet {
        seed,
        tasks: (0..n_tasks).map(|id| TaskSpec::new(id, seed, cfg)).collect(),
    })
}

use serde::{Deserialize, Serialize};

use super::{TaskSet, TaskSpec, Trajectory};
use crate::ndmath::Rng;
use crate::Result;

/// `n` evenly spaced points covering `[-1, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Bhattacharyya distance between two univariate Gaussians.
pub fn gaussian_bhattacharyya(mu_a: f64, sd_a: f64, mu_b: f64, sd_b: f64) -> f64 {
    let (va, vb) = (sd_a * sd_a, sd_b * sd_b);
    (mu_a - mu_b).powi(2) / (4.0 * (va + vb)) + 0.5 * ((va + vb) / (2.0 * sd_a * sd_b)).ln()
}

/// Grid average of the Bhattacharyya distance between the two tasks'
/// conditional distributions `P(y | x)`.
pub fn bhattacharyya_distance(a: &TaskSpec, b: &TaskSpec, grid: &[f64]) -> f64 {
    if grid.is_empty() {
        return 0.0;
    }
    grid.iter()
        .map(|&x| gaussian_bhattacharyya(a.mean(x), a.sigma(x), b.mean(x), b.sigma(x)))
        .sum::<f64>()
        / grid.len() as f64
}

/// Monte Carlo estimate of the Bayes error floor along a stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrreducibleError {
    pub mse: f64,
    pub mae: f64,
}

/// At each step, draws `n_mc` targets from the true task at `x_t` and
/// measures squared error against the true mean and absolute error against
/// the true median (equal to the mean for a Gaussian).
pub fn irreducible_error(task_set: &TaskSet, trajectory: &Trajectory, n_mc: usize, rng: &mut Rng) -> Result<IrreducibleError> {
    let n_mc = n_mc.max(1);
    let mut sq = 0.0;
    let mut abs = 0.0;
    for (&x, &task) in trajectory.observations().xs().iter().zip(trajectory.task_labels()) {
        // y - mean(x) is all that matters, so draw the deviation directly
        let sd = task_set.get(task)?.sigma(x);
        for _ in 0..n_mc {
            let dev = sd * rng.normal();
            sq += dev * dev;
            abs += dev.abs();
        }
    }
    let n = (trajectory.len() * n_mc).max(1) as f64;
    Ok(IrreducibleError {
        mse: sq / n,
        mae: abs / n,
    })
}

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ndmath::Rng;
use crate::{Error, Result};

pub const POWER_TOLERANCE: f64 = 1e-10;
pub const POWER_MAX_ITERATIONS: usize = 10_000;

/// Top principal directions of a sample matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub mean: Vec<f64>,
    /// Unit-norm directions, largest variance first. The largest-magnitude
    /// component of each is positive.
    pub directions: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// `eigenvalue / trace(covariance)`, non-increasing.
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
    /// One row per sample: projections of the centered sample.
    pub coordinates: Vec<Vec<f64>>,
    /// Fewer samples than dimensions: the covariance cannot be full rank.
    pub rank_deficient: bool,
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
}

fn fix_sign(v: &mut [f64]) {
    let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Power iteration with deflation on the sample covariance.
pub fn pca(samples: &[Vec<f64>], components: usize) -> Result<PcaResult> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::contract("PCA needs at least one sample"));
    }
    let d = samples[0].len();
    if d == 0 || samples.iter().any(|s| s.len() != d) {
        return Err(Error::contract("PCA samples must share one non-zero dimension"));
    }
    if components == 0 || components > d {
        return Err(Error::contract(format!("cannot extract {components} components from {d} dimensions")));
    }
    let mean: Vec<f64> = (0..d).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n as f64).collect();
    let centered: Vec<Vec<f64>> = samples.iter().map(|s| s.iter().zip(&mean).map(|(x, m)| x - m).collect()).collect();
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let mut cov = vec![vec![0.0; d]; d];
    for s in &centered {
        for i in 0..d {
            for j in i..d {
                cov[i][j] += s[i] * s[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    let total_variance: f64 = (0..d).map(|i| cov[i][i]).sum();

    let mut rng = Rng::new(0x5eed);
    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(components);
    let mut eigenvalues = Vec::with_capacity(components);
    let mut deflated = cov.clone();
    for _ in 0..components {
        let mut v = rng.normal_vec(d);
        orthogonalize(&mut v, &directions);
        normalize(&mut v);
        for _ in 0..POWER_MAX_ITERATIONS {
            let mut next = mat_vec(&deflated, &v);
            orthogonalize(&mut next, &directions);
            if normalize(&mut next) == 0.0 {
                // the remaining spectrum is zero; any orthogonal direction is an eigenvector
                break;
            }
            let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            if delta < POWER_TOLERANCE {
                break;
            }
        }
        fix_sign(&mut v);
        let lambda = dot(&v, &mat_vec(&cov, &v)).max(0.0);
        for i in 0..d {
            for j in 0..d {
                deflated[i][j] -= lambda * v[i] * v[j];
            }
        }
        eigenvalues.push(lambda);
        directions.push(v);
    }
    let explained_variance = eigenvalues
        .iter()
        .map(|l| if total_variance > 0.0 { (l / total_variance).clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    let coordinates = centered.iter().map(|s| directions.iter().map(|v| dot(s, v)).collect()).collect();
    Ok(PcaResult {
        mean,
        directions,
        eigenvalues,
        explained_variance,
        total_variance,
        coordinates,
        rank_deficient: n < d,
    })
}

/// One row of a latent trace: `(t, task, z)`.
pub type TraceRow = (u64, usize, Vec<f64>);

/// Reads a `t,task,z_0,...` latent trace.
pub fn read_latent_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let width = r.headers()?.len();
    if width < 3 {
        return Err(Error::contract(format!("{}: latent trace has no latent columns", path.display())));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let bad = |what: &str| Error::contract(format!("{}: bad {what} in record {:?}", path.display(), rec.position().map(|p| p.line())));
        let t = rec[0].parse().map_err(|_| bad("t"))?;
        let task = rec[1].parse().map_err(|_| bad("task"))?;
        let z = (2..width).map(|i| rec[i].parse::<f64>().map_err(|_| bad("latent value"))).collect::<Result<Vec<_>>>()?;
        rows.push((t, task, z));
    }
    Ok(rows)
}

/// Fits PCA on the stacked traces and writes `pca_coordinates.csv`
/// (`t,task,pc1,...`) and `pca_summary.json` into `out_dir`.
pub fn pca_export(traces: &[&Path], components: usize, out_dir: &Path) -> Result<PcaResult> {
    let mut rows = Vec::new();
    for path in traces {
        rows.extend(read_latent_trace(path)?);
    }
    if let Some((_, _, first)) = rows.first() {
        if rows.iter().any(|(_, _, z)| z.len() != first.len()) {
            return Err(Error::contract("latent traces have different dimensions"));
        }
    }
    let samples: Vec<Vec<f64>> = rows.iter().map(|(_, _, z)| z.clone()).collect();
    let result = pca(&samples, components)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let coord_path = out_dir.join("pca_coordinates.csv");
    let mut w = csv::Writer::from_path(&coord_path)?;
    let mut header = vec!["t".to_string(), "task".to_string()];
    header.extend((1..=components).map(|i| format!("pc{i}")));
    w.write_record(&header)?;
    for ((t, task, _), c) in rows.iter().zip(&result.coordinates) {
        let mut rec = vec![t.to_string(), task.to_string()];
        rec.extend(c.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&coord_path, e))?;

    #[derive(Serialize)]
    struct Summary<'a> {
        n_samples: usize,
        dim: usize,
        explained_variance: &'a [f64],
        eigenvalues: &'a [f64],
        total_variance: f64,
        directions: &'a [Vec<f64>],
        rank_deficient: bool,
    }
    let summary = Summary {
        n_samples: samples.len(),
        dim: result.mean.len(),
        explained_variance: &result.explained_variance,
        eigenvalues: &result.eigenvalues,
        total_variance: result.total_variance,
        directions: &result.directions,
        rank_deficient: result.rank_deficient,
    };
    let path = out_dir.join("pca_summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(result)
}

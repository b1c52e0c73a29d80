use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::{read_summary, RunSummary};
use super::{Algorithm, ExperimentConfig};
use crate::{Error, Result};

/// Mean and 95% normal-approximation half-width over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    /// `1.96 * sd / sqrt(n)` with the sample standard deviation; `None` for one seed.
    pub ci95: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let ci95 = (v.len() > 1).then(|| {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            1.96 * var.sqrt() / n.sqrt()
        });
        Self { mean, ci95 }
    }

    fn cell(&self) -> String {
        match self.ci95 {
            Some(ci) => format!("{:.3} ± {:.3}", self.mean, ci),
            None => format!("{:.3}", self.mean),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub algorithm: Algorithm,
    /// `None` aggregates every partition.
    pub partition: Option<usize>,
    pub n_seeds: usize,
    pub mse: Stat,
    pub mae: Stat,
    pub n_bases: Stat,
    pub reducible_mse: Stat,
    pub reducible_mae: Stat,
}

impl ReportRow {
    fn partition_label(&self) -> String {
        self.partition.map_or_else(|| "all".to_string(), |p| p.to_string())
    }
}

fn row(algorithm: Algorithm, partition: Option<usize>, runs: &[&RunSummary]) -> ReportRow {
    let stat = |f: fn(&RunSummary) -> f64| Stat::of(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
    ReportRow {
        algorithm,
        partition,
        n_seeds: runs.len(),
        mse: stat(|r| r.mse),
        mae: stat(|r| r.mae),
        n_bases: stat(|r| r.n_bases as f64),
        reducible_mse: stat(|r| r.reducible_mse),
        reducible_mae: stat(|r| r.reducible_mae),
    }
}

/// Per-(algorithm, partition) rows followed by one all-partition row per
/// algorithm. Algorithms and partitions follow config order.
pub fn aggregate(config: &ExperimentConfig, runs: &[RunSummary]) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for &algorithm in &config.algorithms {
        let mine: Vec<&RunSummary> = runs.iter().filter(|r| r.algorithm == algorithm).collect();
        if mine.is_empty() {
            continue;
        }
        for p in &config.partitions {
            let cell: Vec<&RunSummary> = mine.iter().copied().filter(|r| r.partition == p.id).collect();
            if !cell.is_empty() {
                rows.push(row(algorithm, Some(p.id), &cell));
            }
        }
        if config.partitions.len() > 1 {
            rows.push(row(algorithm, None, &mine));
        }
    }
    rows
}

pub fn render_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["algorithm".to_string(), "partition".into(), "n_seeds".into()];
    for m in ["mse", "mae", "n_bases", "reducible_mse", "reducible_mae"] {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_ci95"));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.algorithm.to_string(), r.partition_label(), r.n_seeds.to_string()];
        for s in [r.mse, r.mae, r.n_bases, r.reducible_mse, r.reducible_mae] {
            rec.push(s.mean.to_string());
            rec.push(s.ci95.map(|c| c.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Contract(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_table(rows: &[ReportRow]) -> String {
    let header = ["algorithm", "partition", "seeds", "MSE", "MAE", "bases", "reducible MSE", "reducible MAE"];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.algorithm.to_string(),
                r.partition_label(),
                r.n_seeds.to_string(),
                r.mse.cell(),
                r.mae.cell(),
                r.n_bases.cell(),
                r.reducible_mse.cell(),
                r.reducible_mae.cell(),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| body.iter().map(|r| r[c].chars().count()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(header.to_vec(), &mut out);
    line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect(), &mut out);
    for r in &body {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

fn sorted_dirs(path: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

/// Every completed run under `root/runs`, with the config they share.
pub fn collect_runs(root: &Path) -> Result<(ExperimentConfig, Vec<RunSummary>)> {
    let runs_root = root.join("runs");
    let mut config: Option<(PathBuf, ExperimentConfig)> = None;
    let mut runs = Vec::new();
    for alg in sorted_dirs(&runs_root)? {
        for part in sorted_dirs(&alg)? {
            for seed in sorted_dirs(&part)? {
                let summary = seed.join("summary.json");
                if !summary.exists() {
                    continue;
                }
                let cfg_path = seed.join("config.json");
                let cfg = ExperimentConfig::load(&cfg_path)?;
                match &config {
                    Some((first, c)) if *c != cfg => {
                        return Err(Error::Config(format!(
                            "{} and {} were produced by different configurations; report them separately",
                            first.display(),
                            cfg_path.display()
                        )))
                    }
                    Some(_) => {}
                    None => config = Some((cfg_path, cfg)),
                }
                runs.push(read_summary(&summary)?);
            }
        }
    }
    match config {
        Some((_, cfg)) => Ok((cfg, runs)),
        None => Err(Error::io(&runs_root, std::io::Error::new(std::io::ErrorKind::NotFound, "no completed runs"))),
    }
}

/// Aggregates the runs under `root` and writes `report.csv` and `report.txt`.
pub fn report(root: &Path) -> Result<Vec<ReportRow>> {
    let (config, runs) = collect_runs(root)?;
    let rows = aggregate(&config, &runs);
    let csv_path = root.join("report.csv");
    fs::write(&csv_path, render_csv(&rows)?).map_err(|e| Error::io(&csv_path, e))?;
    let txt_path = root.join("report.txt");
    fs::write(&txt_path, render_table(&rows)).map_err(|e| Error::io(&txt_path, e))?;
    Ok(rows)
}

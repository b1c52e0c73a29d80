//! `mob`: command-line front end for the regression benchmark.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mob_core::harness::{self, Algorithm, ExperimentConfig};
use mob_core::Error;

#[derive(Parser)]
#[command(name = "mob", version, about = "Mixture-of-basis continual regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a config file with every field materialized.
    Init {
        #[arg(long)]
        out: PathBuf,
        /// `full` for the reference constants, `desk` for a laptop-sized grid.
        #[arg(long, default_value = "full")]
        preset: String,
        #[arg(long)]
        force: bool,
    },
    /// Generate task sets, offline partitions and online streams.
    Gen {
        #[arg(long)]
        config: PathBuf,
        /// Dataset root; defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Train and evaluate algorithms on a generated dataset.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run only this algorithm (default: every algorithm in the config).
        #[arg(long)]
        algorithm: Option<String>,
        /// Run only this seed (default: every seed in the config).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Aggregate completed runs into report.csv and report.txt.
    Report {
        /// Dataset root holding `runs/`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Read the dataset root from this config's output_dir.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Project latent traces onto their top principal components.
    PcaExport {
        /// Directory for pca_coordinates.csv and pca_summary.json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        components: usize,
        /// latent_trace.csv files.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Json(_) => 2,
        Error::Divergence { .. } => 3,
        Error::Io { .. } | Error::OutputNotEmpty(_) => 4,
        Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => 4,
        _ => 1,
    }
}

fn root_of(out: Option<PathBuf>, config: &ExperimentConfig) -> PathBuf {
    out.unwrap_or_else(|| config.output_dir.clone())
}

fn execute(cli: Cli) -> mob_core::Result<()> {
    match cli.command {
        Command::Init { out, preset, force } => {
            if out.exists() && !force {
                return Err(Error::OutputNotEmpty(out));
            }
            let cfg = ExperimentConfig::preset(&preset)?;
            cfg.save(&out)?;
            println!("wrote {}", out.display());
        }
        Command::Gen { config, out, force } => {
            let cfg = ExperimentConfig::load(&config)?;
            let root = root_of(out, &cfg);
            let manifest = harness::generate(&cfg, &root, force)?;
            println!(
                "generated {} partitions x {} seeds under {}",
                manifest.partition_dirs.len(),
                manifest.seeds.len(),
                root.display()
            );
        }
        Command::Run { config, out, algorithm, seed, jobs } => {
            let cfg = ExperimentConfig::load(&config)?;
            let root = root_of(out, &cfg);
            let algorithms = match algorithm {
                Some(name) => vec![Algorithm::parse(&name)?],
                None => cfg.algorithms.clone(),
            };
            let seeds = seed.map_or_else(|| cfg.seeds.clone(), |s| vec![s]);
            let runs = harness::run_experiment(&cfg, &root, &algorithms, &seeds, jobs)?;
            for r in &runs {
                println!(
                    "{:<16} partition {} seed {:<3} mse {:.4} mae {:.4} n_bases {}",
                    r.algorithm.as_str(),
                    r.partition,
                    r.seed,
                    r.mse,
                    r.mae,
                    r.n_bases
                );
            }
        }
        Command::Report { out, config } => {
            let root = match (out, config) {
                (Some(out), _) => out,
                (None, Some(config)) => ExperimentConfig::load(&config)?.output_dir,
                (None, None) => return Err(Error::Config("report needs --out or --config".into())),
            };
            let rows = harness::report(&root)?;
            print!("{}", harness::render_table(&rows));
        }
        Command::PcaExport { out, components, traces } => {
            let paths: Vec<&Path> = traces.iter().map(PathBuf::as_path).collect();
            let result = harness::pca_export(&paths, components, &out)?;
            if result.rank_deficient {
                eprintln!("warning: fewer samples than latent dimensions; covariance is rank-deficient");
            }
            let fractions: Vec<String> = result.explained_variance.iter().map(|f| format!("{f:.4}")).collect();
            println!("explained variance: {}", fractions.join(", "));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use fedrep::data::{synth_planted, write_connectomes, SyntheticSpec};
use fedrep::experiment::{run_experiment, ExperimentConfig, ModeSelection, Overrides, RunResult};
use fedrep::models::ModelKind;
use fedrep::report::{export_tables, render_all_heatmaps};
use fedrep::selfcheck::run_self_checks;
use fedrep::{Error, Result};

#[derive(Parser)]
#[command(
    name = "fedrep",
    version,
    about = "Federated GNN training and biomarker reproducibility"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        hospitals: Option<usize>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long = "top-k")]
        top_k: Option<usize>,
        /// baseline, federated or both
        #[arg(long)]
        mode: Option<ModeSelection>,
        /// Comma-separated model list, e.g. gcn,diffpool
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<ModelKind>>,
        #[arg(long)]
        downsample: Option<usize>,
        /// Output directory (overrides the config)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Regenerate tables and heatmaps from a saved result file.
    Report { result: PathBuf, out_dir: PathBuf },
    /// Generate a planted-biomarker dataset from a TOML generator spec.
    Synth {
        spec: PathBuf,
        matrices: PathBuf,
        labels: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in gradient and invariant checks.
    Check,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            seed,
            hospitals,
            rounds,
            epochs,
            batch,
            top_k,
            mode,
            models,
            downsample,
            output,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply(&Overrides {
                seed,
                hospitals,
                rounds,
                epochs,
                batch,
                top_k,
                mode,
                models,
                downsample,
                output,
            });
            let result = run_experiment(&cfg)?;
            for arm in &result.arms {
                for s in &arm.summary {
                    println!(
                        "{:<10} {:<9} accuracy mean {:.4} (min {:.4}, max {:.4})",
                        arm.mode.name(),
                        s.model,
                        s.mean,
                        s.min,
                        s.max
                    );
                }
                println!(
                    "{:<10} most reproducible model: {}",
                    arm.mode.name(),
                    arm.selected_model
                );
            }
            println!("results written to {}", cfg.output.display());
            Ok(())
        }
        Command::Report { result, out_dir } => {
            let loaded = RunResult::load(&result)?;
            let tables = export_tables(&loaded, &out_dir)?;
            let figures = render_all_heatmaps(&loaded, &out_dir)?;
            println!(
                "wrote {} tables and {} heatmaps to {}",
                tables.len(),
                figures.len(),
                out_dir.display()
            );
            Ok(())
        }
        Command::Synth {
            spec,
            matrices,
            labels,
            seed,
        } => {
            let text = fs::read_to_string(&spec).map_err(|e| Error::Io {
                path: spec.clone(),
                source: e,
            })?;
            let mut parsed: SyntheticSpec = toml::from_str(&text).map_err(|e| Error::Usage {
                field: spec.display().to_string(),
                message: e.to_string(),
            })?;
            if let Some(s) = seed {
                parsed.seed = s;
            }
            let (dataset, planted) = synth_planted(&parsed)?;
            write_connectomes(&dataset, &matrices, &labels)?;
            println!(
                "wrote {} samples with {} nodes; planted nodes {:?}",
                dataset.len(),
                dataset.nodes(),
                planted
            );
            Ok(())
        }
        Command::Check => {
            let outcomes = run_self_checks()?;
            let mut failed = 0;
            for c in &outcomes {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(Error::Training(format!("{failed} self-check(s) failed")));
            }
            Ok(())
        }
    }
}

//! Runs a small two-model experiment, then regenerates its CSV tables and
//! SVG heatmaps from the saved result file.
//!
//! cargo run --release --example heatmap_report [out-dir]

use std::path::PathBuf;

use fedrep::data::SyntheticSpec;
use fedrep::experiment::{run_experiment, DataSource, ExperimentConfig, RunResult, RESULT_FILE};
use fedrep::report::{export_tables, render_all_heatmaps};

fn main() -> fedrep::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "heatmap_report_out".into()));
    let mut cfg = ExperimentConfig {
        data: DataSource::Synthetic(SyntheticSpec {
            nodes: 12,
            samples: 60,
            planted: vec![0, 5, 9],
            signal: 1.0,
            noise: 0.2,
            seed: 1,
        }),
        output: out.join("run"),
        ..ExperimentConfig::default()
    };
    cfg.federation.top_k = 4;
    cfg.federation.epochs = 5;
    cfg.federation.learning_rates.gcn = 0.05;
    cfg.federation.learning_rates.diffpool = 0.05;
    run_experiment(&cfg)?;

    let saved = RunResult::load(&cfg.output.join(RESULT_FILE))?;
    let again = out.join("report");
    let tables = export_tables(&saved, &again)?;
    let figures = render_all_heatmaps(&saved, &again)?;
    for p in tables.iter().chain(&figures) {
        println!("{}", p.display());
    }
    Ok(())
}

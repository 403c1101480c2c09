//! Configuration-driven experiments: baseline and federated arms over every
//! fold rotation and repeat, summarized into reproducibility matrices,
//! model strengths and a ranked biomarker list.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_connectomes, load_images, partition_hospitals, synth_planted, Dataset, SyntheticSpec, FOLDS};
use crate::error::{Error, Result};
use crate::federation::{run_baseline, run_federation, FederationConfig, FoldOutcome, Mode, PreparedPartition};
use crate::models::{ModelKind, ModelSpec, NodeWeightVector, DEFAULT_CLUSTERS, DEFAULT_HIDDEN};
use crate::numerics::compensated_sum;
use crate::report;
use crate::reproducibility::{
    average_rep_matrix, hospital_rep_matrix, model_strength, select_biomarkers, select_most_reproducible, top_k,
    Biomarker, ModelStrength, ReproducibilityMatrix,
};
use crate::rng::derive_seed;

const PARTITION_STREAM: u64 = 0x5041;
const INIT_STREAM: u64 = 0x494e;
const TRAIN_STREAM: u64 = 0x5452;

pub const RESULT_FILE: &str = "result.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Connectome {
        matrices: PathBuf,
        labels: PathBuf,
    },
    Image {
        images: PathBuf,
        labels: PathBuf,
        side: usize,
        #[serde(default = "one")]
        downsample: usize,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSelection {
    Baseline,
    Federated,
    #[default]
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> Vec<Mode> {
        match self {
            ModeSelection::Baseline => vec![Mode::Baseline],
            ModeSelection::Federated => vec![Mode::Federated],
            ModeSelection::Both => vec![Mode::Baseline, Mode::Federated],
        }
    }
}

impl std::str::FromStr for ModeSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "federated" => Ok(Self::Federated),
            "both" => Ok(Self::Both),
            other => Err(Error::usage(
                "mode",
                format!("`{other}` is not baseline, federated or both"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub hidden: usize,
    pub clusters: usize,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN,
            clusters: DEFAULT_CLUSTERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub mode: ModeSelection,
    #[serde(default = "one")]
    pub repeats: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub federation: FederationConfig,
    #[serde(default)]
    pub architecture: ArchitectureConfig,
}

fn one() -> usize {
    1
}

fn default_models() -> Vec<ModelKind> {
    vec![ModelKind::Gcn, ModelKind::DiffPool]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    /// Connectome-scale synthetic data (35 regions, 300 balanced subjects)
    /// with the reference training settings.
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic(SyntheticSpec {
                nodes: 35,
                samples: 300,
                planted: vec![3, 11, 17, 24, 30],
                signal: 1.0,
                noise: 0.2,
                seed: 0,
            }),
            models: default_models(),
            mode: ModeSelection::Both,
            repeats: 1,
            output: default_output(),
            federation: FederationConfig::default(),
            architecture: ArchitectureConfig::default(),
        }
    }
}

/// Command-line overrides; any `Some` field replaces the config value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub hospitals: Option<usize>,
    pub rounds: Option<usize>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub top_k: Option<usize>,
    pub mode: Option<ModeSelection>,
    pub models: Option<Vec<ModelKind>>,
    pub downsample: Option<usize>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses a TOML config. Relative paths are resolved against the
    /// directory containing the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e.message().split('`').nth(1).unwrap_or("<config>").to_string();
            Error::usage(field, e.to_string())
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.data {
            DataSource::Connectome { matrices, labels } => {
                fix(matrices);
                fix(labels);
            }
            DataSource::Image { images, labels, .. } => {
                fix(images);
                fix(labels);
            }
            DataSource::Synthetic(_) => {}
        }
        fix(&mut self.output);
    }

    pub fn apply(&mut self, o: &Overrides) {
        let f = &mut self.federation;
        if let Some(v) = o.seed {
            f.seed = v;
        }
        if let Some(v) = o.hospitals {
            f.hospitals = v;
        }
        if let Some(v) = o.rounds {
            f.rounds = v;
        }
        if let Some(v) = o.epochs {
            f.epochs = v;
        }
        if let Some(v) = o.batch {
            f.batch_size = v;
        }
        if let Some(v) = o.top_k {
            f.top_k = v;
        }
        if let Some(v) = o.mode {
            self.mode = v;
        }
        if let Some(v) = &o.models {
            self.models = v.clone();
        }
        if let Some(v) = o.downsample {
            if let DataSource::Image { downsample, .. } = &mut self.data {
                *downsample = v;
            }
        }
        if let Some(v) = &o.output {
            self.output = v.clone();
        }
    }

    /// Checks everything that does not need the data itself.
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::usage("models", "model pool is empty"));
        }
        let mut seen = self.models.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.models.len() {
            return Err(Error::usage("models", "model pool lists a model twice"));
        }
        if self.repeats == 0 {
            return Err(Error::usage("repeats", "must be at least 1"));
        }
        if self.architecture.hidden == 0 {
            return Err(Error::usage("architecture.hidden", "must be at least 1"));
        }
        if self.architecture.clusters == 0 {
            return Err(Error::usage("architecture.clusters", "must be at least 1"));
        }
        if let DataSource::Image { side, downsample, .. } = &self.data {
            if *downsample == 0 || side % downsample != 0 {
                return Err(Error::usage(
                    "data.downsample",
                    format!("{downsample} does not divide side {side}"),
                ));
            }
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<(Dataset, Vec<String>)> {
        match &self.data {
            DataSource::Connectome { matrices, labels } => {
                let l = load_connectomes(matrices, labels)?;
                Ok((l.dataset, l.warnings))
            }
            DataSource::Image {
                images,
                labels,
                side,
                downsample,
            } => {
                let l = load_images(images, labels, *side, *downsample)?;
                Ok((l.dataset, l.warnings))
            }
            DataSource::Synthetic(spec) => Ok((synth_planted(spec)?.0, Vec::new())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRecord {
    pub model: ModelKind,
    pub repeat: usize,
    pub fold: usize,
    pub hospital: usize,
    pub accuracy: f64,
}

/// Held-out accuracy averaged per fold rotation, then summarized across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub model: ModelKind,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub model: ModelKind,
    pub repeat: usize,
    pub fold: usize,
    pub round: usize,
    pub train_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HospitalRanking {
    pub model: ModelKind,
    pub hospital: usize,
    pub nodes: Vec<usize>,
}

/// Everything one mode produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub mode: Mode,
    pub accuracies: Vec<AccuracyRecord>,
    pub summary: Vec<AccuracySummary>,
    /// `node_weights[m][h]`: model `m`'s absolute node weights at hospital
    /// `h`, averaged over folds and repeats.
    pub node_weights: Vec<Vec<NodeWeightVector>>,
    pub hospital_matrices: Vec<ReproducibilityMatrix>,
    pub average_matrix: ReproducibilityMatrix,
    pub strengths: ModelStrength,
    pub selected_model: ModelKind,
    pub biomarkers: Vec<Biomarker>,
    pub hospital_rankings: Vec<HospitalRanking>,
    pub rounds: Vec<RoundSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub dataset: String,
    pub nodes: usize,
    pub samples: usize,
    /// Partition seed of every repeat.
    pub seeds: Vec<u64>,
    pub warnings: Vec<String>,
    pub arms: Vec<ArmResult>,
    pub wall_clock_seconds: f64,
}

impl RunResult {
    pub fn arm(&self, mode: Mode) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.mode == mode)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run results serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format {
            path: PathBuf::from(RESULT_FILE),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format { line, message, .. } => Error::Format {
                path: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        })
    }
}

struct Job {
    mode: Mode,
    model_index: usize,
    repeat: usize,
    fold: usize,
}

/// Runs every requested arm without touching the filesystem beyond reading
/// the input data.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunResult> {
    let started = Instant::now();
    cfg.validate()?;
    let (dataset, warnings) = cfg.load_dataset()?;
    for w in &warnings {
        warn!("{w}");
    }
    let nodes = dataset.nodes();
    cfg.federation.validate(nodes)?;
    for &kind in &cfg.models {
        model_spec(cfg, kind, nodes, 0)
            .validate()
            .map_err(|e| Error::usage("architecture.clusters", e.to_string()))?;
    }

    let seeds: Vec<u64> = (0..cfg.repeats)
        .map(|r| derive_seed(cfg.federation.seed, &[PARTITION_STREAM, r as u64]))
        .collect();
    let partitions = seeds
        .iter()
        .map(|&s| PreparedPartition::new(&partition_hospitals(&dataset, cfg.federation.hospitals, s)?))
        .collect::<Result<Vec<_>>>()?;

    let modes = cfg.mode.modes();
    let mut jobs = Vec::new();
    for &mode in &modes {
        for model_index in 0..cfg.models.len() {
            for repeat in 0..cfg.repeats {
                for fold in 0..FOLDS {
                    jobs.push(Job {
                        mode,
                        model_index,
                        repeat,
                        fold,
                    });
                }
            }
        }
    }
    info!(
        "running {} jobs on {} samples with {} nodes",
        jobs.len(),
        dataset.len(),
        nodes
    );

    let outcomes = jobs
        .par_iter()
        .map(|job| {
            let kind = cfg.models[job.model_index];
            let spec = model_spec(
                cfg,
                kind,
                nodes,
                derive_seed(
                    cfg.federation.seed,
                    &[INIT_STREAM, job.repeat as u64, job.fold as u64, job.model_index as u64],
                ),
            );
            let fed = FederationConfig {
                seed: derive_seed(cfg.federation.seed, &[TRAIN_STREAM, job.repeat as u64, job.fold as u64]),
                ..cfg.federation.clone()
            };
            let data = &partitions[job.repeat];
            let outcome = match job.mode {
                Mode::Baseline => run_baseline(data, &spec, &fed, job.fold),
                Mode::Federated => run_federation(data, &spec, &fed, job.fold),
            }?;
            Ok((job, outcome))
        })
        .collect::<Result<Vec<_>>>()?;

    let arms = modes
        .iter()
        .map(|&mode| {
            let mine: Vec<(&Job, &FoldOutcome)> = outcomes
                .iter()
                .filter(|(j, _)| j.mode == mode)
                .map(|(j, o)| (*j, o))
                .collect();
            summarize_arm(cfg, mode, &mine)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RunResult {
        config: cfg.clone(),
        dataset: dataset.name.clone(),
        nodes,
        samples: dataset.len(),
        seeds,
        warnings,
        arms,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

/// [`execute`], then persist `result.json` and the report tables and
/// heatmaps under the configured output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    let result = execute(cfg)?;
    fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    report::write_atomic(&cfg.output.join(RESULT_FILE), result.to_json().as_bytes())?;
    report::export_tables(&result, &cfg.output)?;
    report::render_all_heatmaps(&result, &cfg.output)?;
    Ok(result)
}

fn model_spec(cfg: &ExperimentConfig, kind: ModelKind, nodes: usize, seed: u64) -> ModelSpec {
    ModelSpec {
        kind,
        nodes,
        hidden: cfg.architecture.hidden,
        clusters: cfg.architecture.clusters.min(nodes.saturating_sub(1).max(1)),
        seed,
    }
}

fn summarize_arm(cfg: &ExperimentConfig, mode: Mode, outcomes: &[(&Job, &FoldOutcome)]) -> Result<ArmResult> {
    let k = cfg.federation.top_k;
    let h_count = cfg.federation.hospitals;

    let mut accuracies = Vec::new();
    let mut rounds = Vec::new();
    for (job, o) in outcomes {
        for (h, &acc) in o.accuracy.iter().enumerate() {
            accuracies.push(AccuracyRecord {
                model: o.model,
                repeat: job.repeat,
                fold: job.fold,
                hospital: h,
                accuracy: acc,
            });
        }
        for t in &o.rounds {
            rounds.push(RoundSummary {
                model: o.model,
                repeat: job.repeat,
                fold: job.fold,
                round: t.round,
                train_loss: t.train_loss.clone(),
                val_accuracy: t.val_accuracy.clone(),
            });
        }
    }

    let summary = cfg
        .models
        .iter()
        .map(|&model| {
            let fold_means: Vec<f64> = (0..FOLDS)
                .map(|fold| {
                    let vals: Vec<f64> = accuracies
                        .iter()
                        .filter(|a| a.model == model && a.fold == fold)
                        .map(|a| a.accuracy)
                        .collect();
                    compensated_sum(vals.iter().copied()) / vals.len() as f64
                })
                .collect();
            AccuracySummary {
                model,
                mean: compensated_sum(fold_means.iter().copied()) / FOLDS as f64,
                min: fold_means.iter().copied().fold(f64::INFINITY, f64::min),
                max: fold_means.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();

    // Per (model, hospital): absolute weights averaged over every fold and repeat.
    let node_weights: Vec<Vec<NodeWeightVector>> = cfg
        .models
        .iter()
        .map(|&model| {
            (0..h_count)
                .map(|h| {
                    let runs: Vec<&NodeWeightVector> = outcomes
                        .iter()
                        .filter(|(_, o)| o.model == model)
                        .map(|(_, o)| &o.node_weights[h])
                        .collect();
                    let n = runs[0].weights.len();
                    let weights = (0..n)
                        .map(|i| compensated_sum(runs.iter().map(|r| r.weights[i].abs())) / runs.len() as f64)
                        .collect();
                    NodeWeightVector {
                        weights,
                        model,
                        hospital: Some(h),
                    }
                })
                .collect()
        })
        .collect();

    let hospital_matrices = (0..h_count)
        .map(|h| {
            let per_model: Vec<NodeWeightVector> = node_weights.iter().map(|m| m[h].clone()).collect();
            hospital_rep_matrix(&per_model, k)
        })
        .collect::<Result<Vec<_>>>()?;
    let average_matrix = average_rep_matrix(&hospital_matrices)?;
    let strengths = model_strength(&average_matrix);
    let winner = select_most_reproducible(&strengths)?;
    let biomarkers = select_biomarkers(&node_weights[winner], k)?;

    let mut hospital_rankings = Vec::new();
    for per_model in &node_weights {
        for w in per_model {
            hospital_rankings.push(HospitalRanking {
                model: w.model,
                hospital: w.hospital.unwrap_or_default(),
                nodes: top_k(&w.weights, k)?.ranked().to_vec(),
            });
        }
    }

    Ok(ArmResult {
        mode,
        accuracies,
        summary,
        node_weights,
        hospital_matrices,
        average_matrix,
        strengths,
        selected_model: cfg.models[winner],
        biomarkers,
        hospital_rankings,
        rounds,
    })
}

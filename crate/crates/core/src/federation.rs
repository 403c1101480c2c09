//! Round-based federated averaging across simulated hospitals, and the
//! non-federated baseline it is compared against.
//!
//! Each round the server broadcasts an independent copy of the global
//! weights, every hospital runs `E` epochs of mini-batch SGD on its two
//! training folds, and the server replaces the global weights with the
//! uniform entry-wise mean of the returned local weights.
//!
//! Randomness is derived from the master seed per `(hospital, round, epoch)`,
//! so hospitals can train concurrently without affecting results.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{HospitalPartition, FOLDS};
use crate::error::{Error, Result};
use crate::models::{Model, ModelKind, ModelSpec, ModelWeights, NamedParam, NodeWeightVector, PreparedGraph};
use crate::numerics::{compensated_sum, Matrix};
use crate::rng;

const SHUFFLE_STREAM: u64 = 0x5348;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningRates {
    pub gcn: f64,
    pub diffpool: f64,
}

impl LearningRates {
    pub fn for_kind(&self, kind: ModelKind) -> f64 {
        match kind {
            ModelKind::Gcn => self.gcn,
            ModelKind::DiffPool => self.diffpool,
        }
    }
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            gcn: 1e-5,
            diffpool: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationConfig {
    pub hospitals: usize,
    pub rounds: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rates: LearningRates,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            hospitals: 3,
            rounds: 5,
            epochs: 100,
            batch_size: 1,
            learning_rates: LearningRates::default(),
            top_k: 20,
            seed: 0,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self, nodes: usize) -> Result<()> {
        let positive = [
            ("hospitals", self.hospitals),
            ("rounds", self.rounds),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::usage(field, "must be at least 1"));
            }
        }
        for (field, lr) in [
            ("learning_rates.gcn", self.learning_rates.gcn),
            ("learning_rates.diffpool", self.learning_rates.diffpool),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::usage(field, format!("{lr} must be a positive finite number")));
            }
        }
        if self.top_k == 0 || self.top_k > nodes {
            return Err(Error::usage("top_k", format!("{} outside 1..={nodes}", self.top_k)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    Federated,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Federated => "federated",
        }
    }
}

/// Hospital datasets with every sample's normalized graph precomputed.
#[derive(Debug, Clone)]
pub struct PreparedPartition {
    hospitals: Vec<Vec<PreparedGraph>>,
    folds: Vec<Vec<usize>>,
    nodes: usize,
}

impl PreparedPartition {
    pub fn new(partition: &HospitalPartition) -> Result<Self> {
        let hospitals = partition
            .hospitals()
            .iter()
            .map(|d| d.samples().iter().map(PreparedGraph::new).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let folds = (0..partition.len()).map(|h| partition.folds(h).to_vec()).collect();
        Ok(Self {
            hospitals,
            folds,
            nodes: partition.nodes(),
        })
    }

    pub fn hospital_count(&self) -> usize {
        self.hospitals.len()
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// `(train, validation)` with `fold` held out.
    pub fn split(&self, hospital: usize, fold: usize) -> (Vec<&PreparedGraph>, Vec<&PreparedGraph>) {
        let (val, train): (Vec<_>, Vec<_>) = self.hospitals[hospital]
            .iter()
            .zip(&self.folds[hospital])
            .partition(|(_, &f)| f == fold);
        (
            train.into_iter().map(|(g, _)| g).collect(),
            val.into_iter().map(|(g, _)| g).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdate {
    pub weights: ModelWeights,
    /// Mean batch loss over the last epoch.
    pub loss: f64,
    pub steps: usize,
}

/// `E` epochs of SGD at one hospital, starting from a copy of `global`.
pub fn local_update(
    global: &ModelWeights,
    spec: &ModelSpec,
    train: &[&PreparedGraph],
    cfg: &FederationConfig,
    hospital: usize,
    round: usize,
) -> Result<LocalUpdate> {
    if train.is_empty() {
        return Err(Error::Parameter(format!("hospital {hospital} has no training samples")));
    }
    let lr = cfg.learning_rates.for_kind(spec.kind);
    let mut model = Model::with_weights(*spec, global.clone())?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut steps = 0;
    let mut loss = 0.0;
    for epoch in 0..cfg.epochs {
        let mut rng = rng::stream(cfg.seed, &[SHUFFLE_STREAM, hospital as u64, round as u64, epoch as u64]);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&PreparedGraph> = chunk.iter().map(|&i| train[i]).collect();
            let l = model.sgd_step(&batch, lr).map_err(|e| match e {
                Error::Training(msg) => Error::Training(format!(
                    "hospital {hospital}, round {round}, epoch {epoch}, batch {b}: {msg}"
                )),
                other => other,
            })?;
            epoch_loss += l;
            batches += 1;
            steps += 1;
        }
        loss = epoch_loss / batches as f64;
    }
    Ok(LocalUpdate {
        weights: model.snapshot(),
        loss,
        steps,
    })
}

/// Uniform entry-wise mean of the hospitals' weights.
pub fn federated_average(locals: &[ModelWeights]) -> Result<ModelWeights> {
    let first = locals
        .first()
        .ok_or_else(|| Error::Aggregation("no local weights to average".into()))?;
    if locals.iter().any(|w| !w.is_compatible(first)) {
        return Err(Error::Aggregation("local weights have mismatched layouts".into()));
    }
    let h = locals.len() as f64;
    let params = first
        .params()
        .iter()
        .enumerate()
        .map(|(p, named)| {
            let (rows, cols) = named.value.shape();
            let data = (0..rows * cols)
                .map(|e| compensated_sum(locals.iter().map(|w| w.params()[p].value.as_slice()[e])) / h)
                .collect();
            Ok(NamedParam {
                name: named.name.clone(),
                value: Matrix::new(rows, cols, data)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelWeights::new(params))
}

/// Held-out accuracy: argmax of the logits, ties to class 0.
pub fn evaluate(model: &Model, fold: &[&PreparedGraph]) -> Result<f64> {
    if fold.is_empty() {
        return Err(Error::Parameter("cannot evaluate on an empty fold".into()));
    }
    let mut correct = 0usize;
    for g in fold {
        if model.predict(g)? == g.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / fold.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub round: usize,
    pub locals: Vec<ModelWeights>,
    pub global: ModelWeights,
    pub train_loss: Vec<f64>,
    /// Accuracy of the freshly averaged global model on each hospital's held-out fold.
    pub val_accuracy: Vec<f64>,
}

/// One mode trained on one fold rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub mode: Mode,
    pub model: ModelKind,
    pub fold: usize,
    /// Held-out accuracy per hospital.
    pub accuracy: Vec<f64>,
    /// Final weights per hospital: the last local update (federated) or the
    /// hospital's own model (baseline).
    pub hospital_weights: Vec<ModelWeights>,
    /// Federated only: final averaged weights.
    pub global: Option<ModelWeights>,
    pub node_weights: Vec<NodeWeightVector>,
    pub rounds: Vec<RoundTrace>,
    pub steps: Vec<usize>,
}

fn check_fold(fold: usize) -> Result<()> {
    if fold >= FOLDS {
        return Err(Error::Parameter(format!("fold index {fold} is not in 0..{FOLDS}")));
    }
    Ok(())
}

fn node_weights(
    spec: &ModelSpec,
    weights: &ModelWeights,
    train: &[&PreparedGraph],
    hospital: usize,
) -> Result<NodeWeightVector> {
    let mut model = Model::with_weights(*spec, weights.clone())?;
    model.refresh_assignment(train)?;
    let mut w = model.extract_node_weights()?;
    w.hospital = Some(hospital);
    Ok(w)
}

pub fn run_federation(
    data: &PreparedPartition,
    spec: &ModelSpec,
    cfg: &FederationConfig,
    fold: usize,
) -> Result<FoldOutcome> {
    check_fold(fold)?;
    cfg.validate(data.nodes())?;
    let h_count = data.hospital_count();
    let splits: Vec<_> = (0..h_count).map(|h| data.split(h, fold)).collect();

    let mut global = Model::new(*spec)?;
    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut steps = vec![0; h_count];
    let mut last_locals = Vec::new();
    for t in 0..cfg.rounds {
        let broadcast = global.snapshot();
        let updates = (0..h_count)
            .into_par_iter()
            .map(|h| local_update(&broadcast, spec, &splits[h].0, cfg, h, t))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| match e {
                Error::Training(msg) => Error::Training(format!("round {t}: {msg}")),
                other => other,
            })?;
        let locals: Vec<ModelWeights> = updates.iter().map(|u| u.weights.clone()).collect();
        let averaged = federated_average(&locals)?;
        global.restore(averaged.clone())?;
        let val_accuracy = splits
            .iter()
            .map(|(_, val)| evaluate(&global, val))
            .collect::<Result<Vec<_>>>()?;
        for (s, u) in steps.iter_mut().zip(&updates) {
            *s += u.steps;
        }
        rounds.push(RoundTrace {
            round: t,
            locals: locals.clone(),
            global: averaged,
            train_loss: updates.iter().map(|u| u.loss).collect(),
            val_accuracy: val_accuracy.clone(),
        });
        last_locals = locals;
    }

    let accuracy = rounds.last().expect("rounds >= 1").val_accuracy.clone();
    let node_weights = last_locals
        .iter()
        .enumerate()
        .map(|(h, w)| node_weights(spec, w, &splits[h].0, h))
        .collect::<Result<Vec<_>>>()?;
    Ok(FoldOutcome {
        mode: Mode::Federated,
        model: spec.kind,
        fold,
        accuracy,
        hospital_weights: last_locals,
        global: Some(global.snapshot()),
        node_weights,
        rounds,
        steps,
    })
}

/// Every hospital trains alone for `C × E` epochs from the same initialization.
pub fn run_baseline(
    data: &PreparedPartition,
    spec: &ModelSpec,
    cfg: &FederationConfig,
    fold: usize,
) -> Result<FoldOutcome> {
    check_fold(fold)?;
    cfg.validate(data.nodes())?;
    let init = Model::new(*spec)?.snapshot();
    let per_hospital = (0..data.hospital_count())
        .into_par_iter()
        .map(|h| {
            let (train, val) = data.split(h, fold);
            let mut weights = init.clone();
            let mut steps = 0;
            for t in 0..cfg.rounds {
                let u = local_update(&weights, spec, &train, cfg, h, t)?;
                weights = u.weights;
                steps += u.steps;
            }
            let model = Model::with_weights(*spec, weights.clone())?;
            let acc = evaluate(&model, &val)?;
            let nw = node_weights(spec, &weights, &train, h)?;
            Ok((weights, acc, nw, steps))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = FoldOutcome {
        mode: Mode::Baseline,
        model: spec.kind,
        fold,
        accuracy: Vec::new(),
        hospital_weights: Vec::new(),
        global: None,
        node_weights: Vec::new(),
        rounds: Vec::new(),
        steps: Vec::new(),
    };
    for (w, acc, nw, steps) in per_hospital {
        out.hospital_weights.push(w);
        out.accuracy.push(acc);
        out.node_weights.push(nw);
        out.steps.push(steps);
    }
    Ok(out)
}

//! The model pool: a whole-graph GCN classifier and a single-stage DiffPool
//! classifier behind one [`Model`] interface.
//!
//! Both models read the adjacency matrix as node features (`X = A`), so each
//! node's feature vector is its connectivity profile. Their last embedding
//! layer yields one scalar per node (GCN) or per cluster (DiffPool), which a
//! dense `2×·` head turns into logits. The head's column magnitudes are the
//! per-node discriminative weights consumed by biomarker selection.

mod diffpool;
mod gcn;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::GraphSample;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Tape, Var};
use crate::rng;

pub const DEFAULT_HIDDEN: usize = 16;
pub const DEFAULT_CLUSTERS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gcn,
    DiffPool,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gcn => "GCN",
            ModelKind::DiffPool => "DiffPool",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(ModelKind::Gcn),
            "diffpool" => Ok(ModelKind::DiffPool),
            other => Err(Error::Parameter(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub nodes: usize,
    pub hidden: usize,
    /// Pooled cluster count; ignored by GCN.
    pub clusters: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, nodes: usize, seed: u64) -> Self {
        Self {
            kind,
            nodes,
            hidden: DEFAULT_HIDDEN,
            clusters: DEFAULT_CLUSTERS.min(nodes.saturating_sub(1)).max(1),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::Parameter("node count must be positive".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Parameter("hidden dimension must be at least 1".into()));
        }
        if self.kind == ModelKind::DiffPool && (self.clusters == 0 || self.clusters >= self.nodes) {
            return Err(Error::Parameter(format!(
                "DiffPool needs 1 <= clusters < nodes, got {} clusters for {} nodes",
                self.clusters, self.nodes
            )));
        }
        Ok(())
    }

    /// `(name, rows, cols, fan_in)` for every parameter, in order.
    fn layout(&self) -> Vec<(&'static str, usize, usize, usize)> {
        let (n, h, c) = (self.nodes, self.hidden, self.clusters);
        match self.kind {
            ModelKind::Gcn => vec![
                ("conv1.weight", n, h, n),
                ("conv2.weight", h, 1, h),
                ("head.weight", 2, n, n),
                ("head.bias", 1, 2, 0),
            ],
            ModelKind::DiffPool => vec![
                ("embed.weight", n, h, n),
                ("pool.weight", n, c, n),
                ("readout.weight", h, 1, h),
                ("head.weight", 2, c, c),
                ("head.bias", 1, 2, 0),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedParam {
    pub name: String,
    pub value: Matrix,
}

/// Ordered named parameter matrices of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    params: Vec<NamedParam>,
}

impl ModelWeights {
    pub fn new(params: Vec<NamedParam>) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &[NamedParam] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [NamedParam] {
        &mut self.params
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.params.iter_mut().find(|p| p.name == name).map(|p| &mut p.value)
    }

    pub fn matrices(&self) -> Vec<Matrix> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Same names and shapes, in the same order.
    pub fn is_compatible(&self, other: &ModelWeights) -> bool {
        self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.name == b.name && a.value.shape() == b.value.shape())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ModelWeights {
        ModelWeights {
            params: self
                .params
                .iter()
                .map(|p| NamedParam {
                    name: p.name.clone(),
                    value: p.value.map(&f),
                })
                .collect(),
        }
    }
}

/// Per-node discriminative weights extracted from a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeWeightVector {
    pub weights: Vec<f64>,
    pub model: ModelKind,
    pub hospital: Option<usize>,
}

/// Normalized adjacency and propagated features of one sample, computed once
/// and reused by every forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedGraph {
    /// `D̃^{-1/2}(A + I)D̃^{-1/2}`
    pub a_hat: Matrix,
    /// `Â · X` with `X = A`
    pub propagated: Matrix,
    pub label: usize,
}

impl PreparedGraph {
    pub fn new(sample: &GraphSample) -> Result<Self> {
        let a_hat = normalize_adjacency(&sample.adjacency)?;
        let propagated = a_hat.matmul(&sample.adjacency)?;
        Ok(Self {
            a_hat,
            propagated,
            label: sample.label,
        })
    }

    pub fn nodes(&self) -> usize {
        self.a_hat.rows()
    }
}

/// `D̃^{-1/2}(A + I)D̃^{-1/2}` where `D̃` is the degree matrix of `A + I`.
pub fn normalize_adjacency(a: &Matrix) -> Result<Matrix> {
    if a.rows() != a.cols() {
        return Err(Error::Dimension {
            op: "normalize_adjacency",
            left: a.shape(),
            right: (a.rows(), a.rows()),
        });
    }
    if let Some(v) = a.as_slice().iter().find(|v| **v < 0.0 || !v.is_finite()) {
        return Err(Error::Domain(format!("adjacency entry {v} is negative or non-finite")));
    }
    if !a.is_symmetric(1e-9) {
        return Err(Error::Domain("adjacency is not symmetric".into()));
    }
    let n = a.rows();
    let mut out = a.clone();
    for i in 0..n {
        out.set(i, i, out.get(i, i) + 1.0);
    }
    let degree: Vec<f64> = (0..n).map(|i| out.row(i).iter().sum::<f64>()).collect();
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, out.get(i, j) / (degree[i] * degree[j]).sqrt());
        }
    }
    Ok(out)
}

struct Forward {
    logits: Var,
    assignment: Option<Var>,
}

/// A model of either kind with its current weights.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    weights: ModelWeights,
    /// DiffPool only: assignment matrix averaged over the samples seen by the
    /// last [`Model::refresh_assignment`].
    mean_assignment: Option<Matrix>,
}

impl Model {
    /// Seeded uniform initialization in `[-1/√fan_in, 1/√fan_in]`; biases start at zero.
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::stream(spec.seed, &[0x1417]);
        let params = spec
            .layout()
            .into_iter()
            .map(|(name, rows, cols, fan_in)| {
                let value = if fan_in == 0 {
                    Matrix::zeros(rows, cols)
                } else {
                    let s = 1.0 / (fan_in as f64).sqrt();
                    let data = (0..rows * cols).map(|_| rng.gen_range(-s..=s)).collect();
                    Matrix::new(rows, cols, data).expect("layout shapes are positive")
                };
                NamedParam {
                    name: name.to_string(),
                    value,
                }
            })
            .collect();
        Ok(Self {
            spec,
            weights: ModelWeights::new(params),
            mean_assignment: None,
        })
    }

    pub fn with_weights(spec: ModelSpec, weights: ModelWeights) -> Result<Self> {
        let mut model = Self::new(spec)?;
        model.restore(weights)?;
        Ok(model)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn weights(&self) -> &ModelWeights {
        &self.weights
    }

    pub fn snapshot(&self) -> ModelWeights {
        self.weights.clone()
    }

    pub fn restore(&mut self, weights: ModelWeights) -> Result<()> {
        if !self.weights.is_compatible(&weights) {
            return Err(Error::Parameter(format!(
                "weights do not match the {} layout for {} nodes",
                self.spec.kind, self.spec.nodes
            )));
        }
        self.weights = weights;
        self.mean_assignment = None;
        Ok(())
    }

    pub fn mean_assignment(&self) -> Option<&Matrix> {
        self.mean_assignment.as_ref()
    }

    pub fn forward(&self, graph: &PreparedGraph) -> Result<Matrix> {
        let mut tape = Tape::new();
        let params = self.load(&mut tape, false);
        let out = self.build(&mut tape, &params, graph)?;
        Ok(tape.value(out.logits).clone())
    }

    /// Argmax of the logits; a tie goes to class 0.
    pub fn predict(&self, graph: &PreparedGraph) -> Result<usize> {
        let logits = self.forward(graph)?;
        Ok(usize::from(logits.get(0, 1) > logits.get(0, 0)))
    }

    /// Cross-entropy loss of one sample and its gradient for every parameter.
    pub fn loss_and_grad(&self, graph: &PreparedGraph) -> Result<(f64, Vec<Matrix>)> {
        let mut tape = Tape::new();
        let params = self.load(&mut tape, true);
        let out = self.build(&mut tape, &params, graph)?;
        let loss = tape.cross_entropy(out.logits, graph.label)?;
        tape.backward(loss)?;
        let grads = params
            .iter()
            .zip(self.weights.params())
            .map(|(&v, p)| {
                tape.grad(v)
                    .cloned()
                    .unwrap_or_else(|| Matrix::zeros(p.value.rows(), p.value.cols()))
            })
            .collect();
        Ok((tape.value(loss).get(0, 0), grads))
    }

    /// Mean cross-entropy over `batch` at arbitrary parameter values; the
    /// closure shape expected by [`crate::numerics::gradient_check`].
    pub fn batch_loss_and_grad(&self, params: &[Matrix], batch: &[&PreparedGraph]) -> Result<(f64, Vec<Matrix>)> {
        let mut probe = self.clone();
        for (slot, value) in probe.weights.params_mut().iter_mut().zip(params) {
            slot.value = value.clone();
        }
        let (loss, grads) = probe.mean_gradient(batch)?;
        Ok((loss, grads))
    }

    /// One plain SGD step with the batch-mean gradient. Returns the mean loss.
    pub fn sgd_step(&mut self, batch: &[&PreparedGraph], lr: f64) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Parameter("empty batch".into()));
        }
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::Parameter(format!("learning rate {lr} must be finite and >= 0")));
        }
        let (loss, grads) = self.mean_gradient(batch)?;
        if lr > 0.0 {
            for (p, g) in self.weights.params_mut().iter_mut().zip(&grads) {
                p.value.axpy(-lr, g)?;
            }
        }
        self.mean_assignment = None;
        Ok(loss)
    }

    /// Recomputes the DiffPool mean assignment over `graphs`. No-op for GCN.
    pub fn refresh_assignment(&mut self, graphs: &[&PreparedGraph]) -> Result<()> {
        if self.spec.kind != ModelKind::DiffPool {
            return Ok(());
        }
        if graphs.is_empty() {
            return Err(Error::Parameter("no samples to average assignments over".into()));
        }
        let mut total = Matrix::zeros(self.spec.nodes, self.spec.clusters);
        for g in graphs {
            let mut tape = Tape::new();
            let params = self.load(&mut tape, false);
            let out = self.build(&mut tape, &params, g)?;
            let s = out.assignment.expect("DiffPool forward records its assignment");
            total.add_assign(tape.value(s))?;
        }
        self.mean_assignment = Some(total.scale(1.0 / graphs.len() as f64));
        Ok(())
    }

    /// Per-node absolute head weights.
    ///
    /// GCN: `w_n = Σ_c |W_head[c, n]|`. DiffPool: cluster weights
    /// `Σ_c |W_head[c, j]|` back-projected through the mean assignment.
    pub fn extract_node_weights(&self) -> Result<NodeWeightVector> {
        let head = self.weights.get("head.weight").expect("every layout has a head");
        let column_mass: Vec<f64> = (0..head.cols())
            .map(|j| (0..head.rows()).map(|c| head.get(c, j).abs()).sum())
            .collect();
        let weights = match self.spec.kind {
            ModelKind::Gcn => column_mass,
            ModelKind::DiffPool => {
                let s = self.mean_assignment.as_ref().ok_or_else(|| {
                    Error::Precondition(
                        "DiffPool node weights need cached assignments; run refresh_assignment \
                         over the training samples first"
                            .into(),
                    )
                })?;
                (0..s.rows())
                    .map(|n| s.row(n).iter().zip(&column_mass).map(|(a, w)| a * w).sum())
                    .collect()
            }
        };
        Ok(NodeWeightVector {
            weights,
            model: self.spec.kind,
            hospital: None,
        })
    }

    fn mean_gradient(&self, batch: &[&PreparedGraph]) -> Result<(f64, Vec<Matrix>)> {
        let mut total_loss = 0.0;
        let mut sum: Option<Vec<Matrix>> = None;
        for (i, g) in batch.iter().enumerate() {
            let (loss, grads) = self.loss_and_grad(g)?;
            if !loss.is_finite() || grads.iter().any(|m| !m.is_finite()) {
                return Err(Error::Training(format!("non-finite loss at batch sample {i}")));
            }
            total_loss += loss;
            match &mut sum {
                None => sum = Some(grads),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(&grads) {
                        a.add_assign(g)?;
                    }
                }
            }
        }
        let scale = 1.0 / batch.len() as f64;
        let grads = sum
            .expect("batch is non-empty")
            .into_iter()
            .map(|g| g.scale(scale))
            .collect();
        Ok((total_loss * scale, grads))
    }

    fn load(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.weights
            .params()
            .iter()
            .map(|p| {
                if trainable {
                    tape.param(p.value.clone())
                } else {
                    tape.constant(p.value.clone())
                }
            })
            .collect()
    }

    fn build(&self, tape: &mut Tape, params: &[Var], graph: &PreparedGraph) -> Result<Forward> {
        if graph.nodes() != self.spec.nodes {
            return Err(Error::Dimension {
                op: "forward",
                left: graph.a_hat.shape(),
                right: (self.spec.nodes, self.spec.nodes),
            });
        }
        match self.spec.kind {
            ModelKind::Gcn => gcn::forward(tape, params, graph),
            ModelKind::DiffPool => diffpool::forward(tape, params, graph),
        }
    }
}

/// `logits = (W_head · z)ᵀ + b`
fn head(tape: &mut Tape, w_head: Var, bias: Var, z: Var) -> Result<Var> {
    let col = tape.matmul(w_head, z)?;
    let row = tape.transpose(col);
    tape.add(row, bias)
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, GraphSample};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng;

/// Planted-biomarker generator settings.
///
/// Every edge starts as `noise * U[0, 1)`. In class-1 samples, edges touching
/// a planted node additionally receive `+signal`. Labels alternate 0, 1, 0, …
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub nodes: usize,
    pub samples: usize,
    pub planted: Vec<usize>,
    pub signal: f64,
    pub noise: f64,
    pub seed: u64,
}

/// Returns the generated dataset and the sorted ground-truth planted set.
pub fn synth_planted(spec: &SyntheticSpec) -> Result<(Dataset, Vec<usize>)> {
    if spec.planted.is_empty() {
        return Err(Error::Parameter("planted node set is empty".into()));
    }
    if let Some(&p) = spec.planted.iter().find(|&&p| p >= spec.nodes) {
        return Err(Error::Parameter(format!("planted node {p} outside 0..{}", spec.nodes)));
    }
    if spec.nodes < 2 || spec.samples < 2 {
        return Err(Error::Parameter("need at least 2 nodes and 2 samples".into()));
    }
    if !(spec.signal >= 0.0 && spec.noise >= 0.0) {
        return Err(Error::Parameter("signal and noise must be non-negative".into()));
    }

    let mut planted = spec.planted.clone();
    planted.sort_unstable();
    planted.dedup();
    let mut is_planted = vec![false; spec.nodes];
    for &p in &planted {
        is_planted[p] = true;
    }

    let mut rng = rng::stream(spec.seed, &[]);
    let n = spec.nodes;
    let samples = (0..spec.samples)
        .map(|s| {
            let label = s % 2;
            let mut adj = Matrix::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut w = spec.noise * rng.gen::<f64>();
                    if label == 1 && (is_planted[i] || is_planted[j]) {
                        w += spec.signal;
                    }
                    adj.set(i, j, w);
                    adj.set(j, i, w);
                }
            }
            GraphSample::new(adj, label, format!("synth-{s:04}"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Dataset::new("synthetic", samples)?, planted))
}

/// Symmetric zero-diagonal graph with edge weights drawn from `U[0, 1)`.
pub fn random_graph(nodes: usize, label: usize, seed: u64) -> Result<GraphSample> {
    let mut rng = rng::stream(seed, &[0x7267]);
    let mut adj = Matrix::zeros(nodes, nodes);
    for i in 0..nodes {
        for j in (i + 1)..nodes {
            let w = rng.gen::<f64>();
            adj.set(i, j, w);
            adj.set(j, i, w);
        }
    }
    GraphSample::new(adj, label, format!("random-{seed}"))
}

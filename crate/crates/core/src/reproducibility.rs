//! Top-K biomarker overlap between models, hospital-level and averaged
//! reproducibility matrices, strength-based model selection and the final
//! biomarker ranking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelKind, NodeWeightVector};
use crate::numerics::{compensated_sum, Matrix};

/// The `k` node indices with the largest absolute weights, in rank order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopKSet {
    ranked: Vec<usize>,
    sorted: Vec<usize>,
}

impl TopKSet {
    pub fn k(&self) -> usize {
        self.ranked.len()
    }

    /// Indices from strongest to weakest.
    pub fn ranked(&self) -> &[usize] {
        &self.ranked
    }

    /// Indices in ascending order.
    pub fn indices(&self) -> &[usize] {
        &self.sorted
    }

    pub fn contains(&self, node: usize) -> bool {
        self.sorted.binary_search(&node).is_ok()
    }
}

/// Ranks by `|w|` descending; equal magnitudes go to the lower index.
pub fn top_k(weights: &[f64], k: usize) -> Result<TopKSet> {
    if k == 0 || k > weights.len() {
        return Err(Error::Parameter(format!("top-k {k} outside 1..={}", weights.len())));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Parameter("weights must be finite".into()));
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].abs().total_cmp(&weights[a].abs()).then(a.cmp(&b)));
    order.truncate(k);
    let mut sorted = order.clone();
    sorted.sort_unstable();
    Ok(TopKSet { ranked: order, sorted })
}

/// `|r_i ∩ r_j| / K`
pub fn rep_score(a: &TopKSet, b: &TopKSet) -> Result<f64> {
    if a.k() != b.k() {
        return Err(Error::Parameter(format!("top-k sizes differ: {} vs {}", a.k(), b.k())));
    }
    let (mut i, mut j, mut shared) = (0, 0, 0usize);
    let (x, y) = (a.indices(), b.indices());
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(shared as f64 / a.k() as f64)
}

/// Symmetric M×M matrix of pairwise top-K overlap ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproducibilityMatrix {
    values: Matrix,
    models: Vec<ModelKind>,
    k: usize,
}

impl ReproducibilityMatrix {
    /// Checks symmetry, unit diagonal and the `[0, 1]` range.
    pub fn new(values: Matrix, models: Vec<ModelKind>, k: usize) -> Result<Self> {
        let m = models.len();
        if values.shape() != (m, m) {
            return Err(Error::Dimension {
                op: "reproducibility matrix",
                left: values.shape(),
                right: (m, m),
            });
        }
        for i in 0..m {
            if values.get(i, i) != 1.0 {
                return Err(Error::Parameter(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..m {
                let v = values.get(i, j);
                if !(0.0..=1.0).contains(&v) || v != values.get(j, i) {
                    return Err(Error::Parameter(format!(
                        "entry ({i}, {j}) = {v} breaks symmetry or range"
                    )));
                }
            }
        }
        Ok(Self { values, models, k })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn models(&self) -> &[ModelKind] {
        &self.models
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn size(&self) -> usize {
        self.models.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }
}

/// All pairwise overlap scores for one hospital's per-model weights.
pub fn hospital_rep_matrix(weights: &[NodeWeightVector], k: usize) -> Result<ReproducibilityMatrix> {
    let first = weights
        .first()
        .ok_or_else(|| Error::Parameter("no model weights".into()))?;
    let n = first.weights.len();
    if let Some(bad) = weights.iter().find(|w| w.weights.len() != n) {
        return Err(Error::Parameter(format!(
            "{} weight vector has {} entries, expected {n}",
            bad.model,
            bad.weights.len()
        )));
    }
    let sets = weights
        .iter()
        .map(|w| top_k(&w.weights, k))
        .collect::<Result<Vec<_>>>()?;
    let m = sets.len();
    let mut values = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            values.set(i, j, rep_score(&sets[i], &sets[j])?);
        }
    }
    ReproducibilityMatrix::new(values, weights.iter().map(|w| w.model).collect(), k)
}

/// Entry-wise mean of hospital-specific matrices.
pub fn average_rep_matrix(per_hospital: &[ReproducibilityMatrix]) -> Result<ReproducibilityMatrix> {
    let first = per_hospital
        .first()
        .ok_or_else(|| Error::Parameter("no hospital matrices to average".into()))?;
    if let Some(bad) = per_hospital.iter().find(|r| r.models != first.models || r.k != first.k) {
        return Err(Error::Parameter(format!(
            "inconsistent matrices: models {:?} k={} vs models {:?} k={}",
            bad.models, bad.k, first.models, first.k
        )));
    }
    let m = first.size();
    let h = per_hospital.len();
    let k = first.k as f64;
    let mut values = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            // entries built from overlaps are c/K; summing the counts rounds only once
            let counts: Option<Vec<f64>> = per_hospital
                .iter()
                .map(|r| {
                    let c = (r.get(i, j) * k).round();
                    (c / k == r.get(i, j)).then_some(c)
                })
                .collect();
            let mean = match counts {
                Some(c) => c.iter().sum::<f64>() / (k * h as f64),
                None => compensated_sum(per_hospital.iter().map(|r| r.get(i, j))) / h as f64,
            };
            values.set(i, j, mean);
        }
    }
    ReproducibilityMatrix::new(values, first.models.clone(), first.k)
}

/// Node strength of every model: row sum minus the self-overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStrength {
    pub scores: Vec<f64>,
    pub models: Vec<ModelKind>,
}

pub fn model_strength(avg: &ReproducibilityMatrix) -> ModelStrength {
    let scores = (0..avg.size())
        .map(|i| avg.values.row(i).iter().sum::<f64>() - 1.0)
        .collect();
    ModelStrength {
        scores,
        models: avg.models.clone(),
    }
}

/// Index of the strongest model; ties go to the earlier pool position.
pub fn select_most_reproducible(strengths: &ModelStrength) -> Result<usize> {
    strengths
        .scores
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &s)| match best {
            Some((_, b)) if s <= b => best,
            _ => Some((i, s)),
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Parameter("no models to select from".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Biomarker {
    pub rank: usize,
    pub node: usize,
    pub weight: f64,
}

/// Averages `|w|` across hospitals, then ranks the top `k` nodes.
pub fn select_biomarkers(per_hospital: &[NodeWeightVector], k: usize) -> Result<Vec<Biomarker>> {
    let averaged = average_abs_weights(per_hospital)?;
    let top = top_k(&averaged, k)?;
    Ok(top
        .ranked()
        .iter()
        .enumerate()
        .map(|(rank, &node)| Biomarker {
            rank: rank + 1,
            node,
            weight: averaged[node],
        })
        .collect())
}

/// Entry-wise mean of absolute weights across vectors of equal length.
pub fn average_abs_weights(vectors: &[NodeWeightVector]) -> Result<Vec<f64>> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::Parameter("no weight vectors".into()))?;
    let n = first.weights.len();
    if vectors.iter().any(|v| v.weights.len() != n) {
        return Err(Error::Parameter("weight vectors differ in length".into()));
    }
    let h = vectors.len() as f64;
    Ok((0..n)
        .map(|i| compensated_sum(vectors.iter().map(|v| v.weights[i].abs())) / h)
        .collect())
}

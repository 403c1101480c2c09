//! Fast built-in checks of the gradient engine and the aggregation and
//! reproducibility invariants, run by `fedrep check`.

use rand::Rng;

use crate::data::random_graph;
use crate::error::Result;
use crate::federation::federated_average;
use crate::models::{Model, ModelKind, ModelSpec, ModelWeights, NodeWeightVector, PreparedGraph};
use crate::numerics::{gradient_check, DEFAULT_STEP};
use crate::reproducibility::{average_rep_matrix, hospital_rep_matrix, model_strength};
use crate::rng;

pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Small model with weights scaled up so the check exercises non-trivial
/// curvature, on a random graph of `nodes` nodes.
pub fn gradient_fixture(kind: ModelKind, nodes: usize, seed: u64) -> Result<(Model, PreparedGraph)> {
    let spec = ModelSpec {
        kind,
        nodes,
        hidden: 4,
        clusters: 3.min(nodes - 1),
        seed,
    };
    let mut model = Model::new(spec)?;
    let mut rng = rng::stream(seed, &[0x6763]);
    let mut w = model.snapshot();
    for p in w.params_mut() {
        for v in p.value.as_mut_slice() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    model.restore(w)?;
    let graph = PreparedGraph::new(&random_graph(nodes, (seed % 2) as usize, seed)?)?;
    Ok((model, graph))
}

/// Gradient check of one model kind on one random 6-node graph.
pub fn check_model_gradient(kind: ModelKind, seed: u64) -> Result<CheckOutcome> {
    let (model, graph) = gradient_fixture(kind, 6, seed)?;
    let params = model.snapshot().matrices();
    let report = gradient_check(
        |p| model.batch_loss_and_grad(p, &[&graph]),
        &params,
        GRAD_TOLERANCE,
        DEFAULT_STEP,
    )?;
    Ok(CheckOutcome {
        name: format!("{kind} gradient (seed {seed})"),
        passed: report.passed(),
        detail: format!(
            "{} entries, worst relative error {:.3e}",
            report.checked,
            report.max_error()
        ),
    })
}

fn check_average() -> Result<CheckOutcome> {
    let locals: Vec<ModelWeights> = (0..3)
        .map(|h| Model::new(ModelSpec::new(ModelKind::Gcn, 7, h)).map(|m| m.snapshot()))
        .collect::<Result<_>>()?;
    let avg = federated_average(&locals)?;
    let mut worst = 0.0f64;
    for (p, named) in avg.params().iter().enumerate() {
        for (e, v) in named.value.as_slice().iter().enumerate() {
            let mean = locals.iter().map(|w| w.params()[p].value.as_slice()[e]).sum::<f64>() / 3.0;
            worst = worst.max((v - mean).abs());
        }
    }
    Ok(CheckOutcome {
        name: "federated average equals entry-wise mean".into(),
        passed: worst <= 1e-12,
        detail: format!("max deviation {worst:.3e}"),
    })
}

fn check_matrices() -> Result<CheckOutcome> {
    let mut rng = rng::stream(17, &[]);
    let mut ok = true;
    for _ in 0..50 {
        let per_hospital = (0..3)
            .map(|_| {
                let vectors: Vec<NodeWeightVector> = [ModelKind::Gcn, ModelKind::DiffPool]
                    .iter()
                    .map(|&model| NodeWeightVector {
                        weights: (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        model,
                        hospital: None,
                    })
                    .collect();
                hospital_rep_matrix(&vectors, 5)
            })
            .collect::<Result<Vec<_>>>()?;
        let avg = average_rep_matrix(&per_hospital)?;
        let s = model_strength(&avg);
        ok &= s.scores[0] == s.scores[1];
        ok &= per_hospital
            .iter()
            .all(|m| m.values().as_slice().iter().all(|v| (v * 5.0).fract() == 0.0));
    }
    Ok(CheckOutcome {
        name: "reproducibility matrix invariants".into(),
        passed: ok,
        detail: "50 random 2-model, 3-hospital instances".into(),
    })
}

pub fn run_self_checks() -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for kind in [ModelKind::Gcn, ModelKind::DiffPool] {
        for seed in 0..3 {
            out.push(check_model_gradient(kind, seed)?);
        }
    }
    out.push(check_average()?);
    out.push(check_matrices()?);
    Ok(out)
}

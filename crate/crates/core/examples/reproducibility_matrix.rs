//! Scores how consistently two models rank the same biomarkers across
//! hospitals, picks the most reproducible one and lists its top nodes.
//!
//! cargo run --example reproducibility_matrix

use fedrep::models::{ModelKind, NodeWeightVector};
use fedrep::reproducibility::{
    average_rep_matrix, hospital_rep_matrix, model_strength, select_biomarkers, select_most_reproducible,
};

fn vector(model: ModelKind, hospital: usize, weights: &[f64]) -> NodeWeightVector {
    NodeWeightVector {
        weights: weights.to_vec(),
        model,
        hospital: Some(hospital),
    }
}

fn main() -> fedrep::Result<()> {
    let k = 3;
    // per hospital: GCN weights, then DiffPool weights, over 8 nodes
    let hospitals = [
        [
            vector(ModelKind::Gcn, 0, &[0.9, 0.1, 0.8, 0.0, 0.7, 0.2, 0.1, 0.0]),
            vector(ModelKind::DiffPool, 0, &[0.6, 0.0, 0.1, 0.5, 0.7, 0.1, 0.0, 0.2]),
        ],
        [
            vector(ModelKind::Gcn, 1, &[0.8, 0.0, 0.9, 0.1, 0.5, 0.6, 0.0, 0.1]),
            vector(ModelKind::DiffPool, 1, &[0.7, 0.2, 0.1, 0.0, 0.1, 0.0, 0.6, 0.8]),
        ],
    ];

    let per_hospital = hospitals
        .iter()
        .map(|h| hospital_rep_matrix(h, k))
        .collect::<fedrep::Result<Vec<_>>>()?;
    for (h, m) in per_hospital.iter().enumerate() {
        println!("hospital {h}: {:?}", m.values().as_slice());
    }
    let avg = average_rep_matrix(&per_hospital)?;
    println!("average:    {:?}", avg.values().as_slice());

    let strengths = model_strength(&avg);
    let best = select_most_reproducible(&strengths)?;
    println!("strengths {:?} -> {}", strengths.scores, strengths.models[best]);

    let own: Vec<NodeWeightVector> = hospitals.iter().map(|h| h[best].clone()).collect();
    for b in select_biomarkers(&own, k)? {
        println!("  #{} node {} (mean |w| {:.2})", b.rank, b.node, b.weight);
    }
    Ok(())
}

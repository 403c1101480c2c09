#![allow(dead_code)]

use fedrep::data::{random_graph, synth_planted, Dataset, GraphSample, SyntheticSpec};
use fedrep::numerics::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

pub fn graph(nodes: usize, label: usize, seed: u64) -> GraphSample {
    random_graph(nodes, label, seed).unwrap()
}

pub fn planted(nodes: usize, samples: usize, planted: Vec<usize>, seed: u64) -> (Dataset, Vec<usize>) {
    synth_planted(&SyntheticSpec {
        nodes,
        samples,
        planted,
        signal: 1.0,
        noise: 0.2,
        seed,
    })
    .unwrap()
}

/// Dense `D^{-1/2} (A + I) D^{-1/2}` computed entry by entry.
pub fn brute_normalize(a: &Matrix) -> Matrix {
    let n = a.rows();
    let deg: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a.get(i, j)).sum::<f64>() + 1.0).collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = a.get(i, j) + if i == j { 1.0 } else { 0.0 };
            out.set(i, j, v / deg[i].sqrt() / deg[j].sqrt());
        }
    }
    out
}

/// Top-k by full stable sort on (-|w|, index).
pub fn brute_top_k(w: &[f64], k: usize) -> std::collections::BTreeSet<usize> {
    let mut idx: Vec<usize> = (0..w.len()).collect();
    idx.sort_by(|&a, &b| w[b].abs().partial_cmp(&w[a].abs()).unwrap().then(a.cmp(&b)));
    idx.into_iter().take(k).collect()
}

/// Pairwise overlap counts by explicit set intersection.
pub fn brute_counts(vectors: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    let sets: Vec<_> = vectors.iter().map(|w| brute_top_k(w, k)).collect();
    sets.iter()
        .map(|a| sets.iter().map(|b| a.intersection(b).count()).collect())
        .collect()
}

pub fn brute_rep(vectors: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    brute_counts(vectors, k)
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 / k as f64).collect())
        .collect()
}

/// Exact mean of the hospital ratios: total shared count over `K * H`.
pub fn brute_average(hospitals: &[Vec<Vec<f64>>], k: usize) -> Vec<Vec<f64>> {
    let counts: Vec<_> = hospitals.iter().map(|v| brute_counts(v, k)).collect();
    let m = counts[0].len();
    let denom = (k * hospitals.len()) as f64;
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| counts.iter().map(|c| c[i][j]).sum::<usize>() as f64 / denom)
                .collect()
        })
        .collect()
}

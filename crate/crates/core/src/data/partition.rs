use rand::seq::SliceRandom;

use super::{Dataset, GraphSample};
use crate::error::{Error, Result};
use crate::rng;

/// Every hospital's local data is split into this many folds.
pub const FOLDS: usize = 3;

/// Disjoint, stratified hospital datasets with per-hospital fold labels.
#[derive(Debug, Clone)]
pub struct HospitalPartition {
    hospitals: Vec<Dataset>,
    /// `folds[h][i]` is the fold of sample `i` of hospital `h`.
    folds: Vec<Vec<usize>>,
    /// `source_indices[h][i]` is the position of that sample in the source dataset.
    source_indices: Vec<Vec<usize>>,
}

impl HospitalPartition {
    pub fn hospitals(&self) -> &[Dataset] {
        &self.hospitals
    }

    pub fn len(&self) -> usize {
        self.hospitals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hospitals.is_empty()
    }

    pub fn nodes(&self) -> usize {
        self.hospitals[0].nodes()
    }

    pub fn folds(&self, hospital: usize) -> &[usize] {
        &self.folds[hospital]
    }

    pub fn source_indices(&self, hospital: usize) -> &[usize] {
        &self.source_indices[hospital]
    }

    /// `(train, validation)` for one hospital with `fold` held out.
    pub fn split(&self, hospital: usize, fold: usize) -> Result<(Vec<&GraphSample>, Vec<&GraphSample>)> {
        if fold >= FOLDS {
            return Err(Error::Parameter(format!("fold index {fold} is not in 0..{FOLDS}")));
        }
        let ds = self
            .hospitals
            .get(hospital)
            .ok_or_else(|| Error::Parameter(format!("no hospital {hospital}")))?;
        let (val, train): (Vec<_>, Vec<_>) = ds
            .samples()
            .iter()
            .zip(&self.folds[hospital])
            .partition(|(_, &f)| f == fold);
        Ok((
            train.into_iter().map(|(s, _)| s).collect(),
            val.into_iter().map(|(s, _)| s).collect(),
        ))
    }
}

/// Stratified shuffle-then-deal split into `hospitals` near-equal local
/// datasets, each further dealt into [`FOLDS`] stratified folds.
pub fn partition_hospitals(dataset: &Dataset, hospitals: usize, seed: u64) -> Result<HospitalPartition> {
    if hospitals == 0 {
        return Err(Error::Partition("hospital count must be at least 1".into()));
    }
    let minimum = hospitals * FOLDS;
    let counts = dataset.class_counts();
    if counts.iter().any(|&c| c < minimum) {
        return Err(Error::Partition(format!(
            "each class needs at least {minimum} samples for {hospitals} hospitals x {FOLDS} folds, \
             got {} of class 0 and {} of class 1",
            counts[0], counts[1]
        )));
    }

    let labels: Vec<usize> = dataset.samples().iter().map(|s| s.label).collect();
    let all: Vec<usize> = (0..labels.len()).collect();
    let assignment = stratified_deal(&all, &labels, hospitals, &mut rng::stream(seed, &[0]));

    let mut out = HospitalPartition {
        hospitals: Vec::with_capacity(hospitals),
        folds: Vec::with_capacity(hospitals),
        source_indices: Vec::with_capacity(hospitals),
    };
    for h in 0..hospitals {
        let members: Vec<usize> = all.iter().copied().filter(|&i| assignment[i] == h).collect();
        let local_labels: Vec<usize> = members.iter().map(|&i| labels[i]).collect();
        let local: Vec<usize> = (0..members.len()).collect();
        let folds = stratified_deal(&local, &local_labels, FOLDS, &mut rng::stream(seed, &[1, h as u64]));
        let samples = members.iter().map(|&i| dataset.samples()[i].clone()).collect();
        let name = if hospitals == 1 {
            dataset.name.clone()
        } else {
            format!("{}-h{h}", dataset.name)
        };
        out.hospitals.push(Dataset::new(name, samples)?);
        out.folds.push(folds);
        out.source_indices.push(members);
    }
    Ok(out)
}

/// Shuffles each class and deals its members round-robin into `bins`,
/// continuing the dealer position across classes so bin sizes differ by at
/// most one. Returns the bin of every position in `items`.
fn stratified_deal(items: &[usize], labels: &[usize], bins: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut bin_of = vec![0; items.len()];
    let mut dealer = 0;
    for class in 0..2 {
        let mut members: Vec<usize> = items.iter().copied().filter(|&i| labels[i] == class).collect();
        members.shuffle(rng);
        for i in members {
            bin_of[i] = dealer % bins;
            dealer += 1;
        }
    }
    bin_of
}

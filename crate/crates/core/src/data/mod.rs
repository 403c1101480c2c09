//! Graph datasets: loading, image conversion, hospital partitioning and
//! synthetic planted-biomarker data.

mod image;
mod io;
mod partition;
mod synth;

pub use image::{downsample_image, image_to_graph};
pub use io::{load_connectomes, load_images, write_connectomes, write_images, Loaded};
pub use partition::{partition_hospitals, HospitalPartition, FOLDS};
pub use synth::{random_graph, synth_planted, SyntheticSpec};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const SYMMETRY_TOL: f64 = 1e-9;

/// One subject: a weighted adjacency matrix and a binary diagnosis label.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample {
    pub adjacency: Matrix,
    pub label: usize,
    pub subject_id: String,
}

impl GraphSample {
    /// Validates that `adjacency` is square, symmetric, non-negative and
    /// zero-diagonal, and that `label` is 0 or 1.
    pub fn new(adjacency: Matrix, label: usize, subject_id: impl Into<String>) -> Result<Self> {
        let subject_id = subject_id.into();
        validate_adjacency(&adjacency).map_err(|e| match e {
            Error::Domain(msg) => Error::Domain(format!("{subject_id}: {msg}")),
            other => other,
        })?;
        if label > 1 {
            return Err(Error::Domain(format!("{subject_id}: label {label} is not in {{0, 1}}")));
        }
        Ok(Self {
            adjacency,
            label,
            subject_id,
        })
    }

    pub fn nodes(&self) -> usize {
        self.adjacency.rows()
    }
}

pub(crate) fn validate_adjacency(a: &Matrix) -> Result<()> {
    if a.rows() != a.cols() {
        return Err(Error::Dimension {
            op: "adjacency",
            left: a.shape(),
            right: (a.rows(), a.rows()),
        });
    }
    if let Some(v) = a.as_slice().iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Domain(format!("adjacency entry {v} is negative or non-finite")));
    }
    if !a.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::Domain("adjacency is not symmetric".into()));
    }
    if (0..a.rows()).any(|i| a.get(i, i) != 0.0) {
        return Err(Error::Domain("adjacency diagonal must be zero".into()));
    }
    Ok(())
}

/// An ordered collection of samples sharing one node count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    nodes: usize,
    samples: Vec<GraphSample>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, samples: Vec<GraphSample>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Parameter("dataset has no samples".into()))?;
        let nodes = first.nodes();
        if let Some(bad) = samples.iter().find(|s| s.nodes() != nodes) {
            return Err(Error::Dimension {
                op: "dataset",
                left: bad.adjacency.shape(),
                right: (nodes, nodes),
            });
        }
        Ok(Self {
            name: name.into(),
            nodes,
            samples,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[GraphSample] {
        &self.samples
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }
}

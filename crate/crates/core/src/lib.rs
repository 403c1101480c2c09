//! Federated training of GNN graph classifiers across simulated hospitals,
//! with top-K biomarker reproducibility analysis across models and sites.
//!
//! The pipeline, module by module:
//!
//! - [`data`]: load or synthesize graph datasets, split them into stratified
//!   hospitals and 3 folds per hospital.
//! - [`models`]: a whole-graph GCN and a single-stage DiffPool, trained by
//!   plain SGD on the autodiff engine in [`numerics`].
//! - [`federation`]: federated averaging rounds and the independent-hospital
//!   baseline.
//! - [`reproducibility`]: top-K overlap matrices per hospital, their average,
//!   node strengths, the most reproducible model and its biomarkers.
//! - [`experiment`] and [`report`]: configuration-driven runs and their
//!   tables and SVG heatmaps.

pub mod data;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod models;
pub mod numerics;
pub mod report;
pub mod reproducibility;
pub mod rng;
pub mod selfcheck;

pub use error::{Error, Result};

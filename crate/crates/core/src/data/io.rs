use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;

use super::{downsample_image, image_to_graph, Dataset, GraphSample, SYMMETRY_TOL};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// A loaded dataset plus any non-fatal repairs applied while reading it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

/// Reads one flattened `N×N` matrix per line and one `0`/`1` label per line.
pub fn load_connectomes(matrix_path: &Path, labels_path: &Path) -> Result<Loaded> {
    let labels = read_labels(labels_path)?;
    let rows = read_rows(matrix_path)?;
    check_counts(matrix_path, rows.len(), labels.len())?;

    let name = stem(matrix_path);
    let mut warnings = Vec::new();
    let mut samples = Vec::with_capacity(rows.len());
    for ((line, values), label) in rows.into_iter().zip(labels) {
        let n = (values.len() as f64).sqrt().round() as usize;
        if n == 0 || n * n != values.len() {
            return Err(format_err(
                matrix_path,
                line,
                format!("{} values is not a perfect square", values.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| **v < 0.0) {
            return Err(format_err(matrix_path, line, format!("negative edge weight {v}")));
        }
        let mut adj = Matrix::new(n, n, values).map_err(|e| format_err(matrix_path, line, e.to_string()))?;
        if !adj.is_symmetric(SYMMETRY_TOL) {
            let msg = format!(
                "{}:{line}: asymmetric matrix symmetrized as (A + Aᵀ)/2",
                matrix_path.display()
            );
            warn!("{msg}");
            warnings.push(msg);
            let t = adj.transpose();
            adj = adj.add(&t)?.scale(0.5);
        }
        for i in 0..n {
            adj.set(i, i, 0.0);
        }
        let sample = GraphSample::new(adj, label, format!("{name}-{line:04}"))
            .map_err(|e| format_err(matrix_path, line, e.to_string()))?;
        samples.push(sample);
    }
    let dataset = Dataset::new(name, samples).map_err(|e| format_err(matrix_path, 0, e.to_string()))?;
    Ok(Loaded { dataset, warnings })
}

/// Reads one flattened `side×side` image per line, optionally block-mean
/// downsampled, and converts each to a pixel-pair graph.
pub fn load_images(images_path: &Path, labels_path: &Path, side: usize, downsample: usize) -> Result<Loaded> {
    let labels = read_labels(labels_path)?;
    let rows = read_rows(images_path)?;
    check_counts(images_path, rows.len(), labels.len())?;

    let name = stem(images_path);
    let out_side = side.checked_div(downsample).unwrap_or(0);
    let mut samples = Vec::with_capacity(rows.len());
    for ((line, pixels), label) in rows.into_iter().zip(labels) {
        let wrap = |e: Error| format_err(images_path, line, e.to_string());
        let small = downsample_image(&pixels, side, downsample).map_err(wrap)?;
        let adj = image_to_graph(&small, out_side).map_err(wrap)?;
        samples.push(GraphSample::new(adj, label, format!("{name}-{line:04}")).map_err(wrap)?);
    }
    let dataset = Dataset::new(name, samples).map_err(|e| format_err(images_path, 0, e.to_string()))?;
    Ok(Loaded {
        dataset,
        warnings: Vec::new(),
    })
}

/// Writes a dataset in the connectome interchange format.
pub fn write_connectomes(dataset: &Dataset, matrix_path: &Path, labels_path: &Path) -> Result<()> {
    let mut matrices = String::new();
    let mut labels = String::new();
    for s in dataset.samples() {
        push_row(&mut matrices, s.adjacency.as_slice());
        let _ = writeln!(labels, "{}", s.label);
    }
    fs::write(matrix_path, matrices).map_err(|e| Error::io(matrix_path, e))?;
    fs::write(labels_path, labels).map_err(|e| Error::io(labels_path, e))
}

pub fn write_images(images: &[Vec<f64>], labels: &[usize], images_path: &Path, labels_path: &Path) -> Result<()> {
    let mut body = String::new();
    for img in images {
        push_row(&mut body, img);
    }
    let labels: String = labels.iter().map(|l| format!("{l}\n")).collect();
    fs::write(images_path, body).map_err(|e| Error::io(images_path, e))?;
    fs::write(labels_path, labels).map_err(|e| Error::io(labels_path, e))
}

fn push_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

fn read_rows(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format_err(path, line_no, format!("cannot parse `{tok}` as a finite number")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((line_no, values));
    }
    Ok(rows)
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let tok = line.trim();
        if tok.is_empty() {
            continue;
        }
        match tok {
            "0" => labels.push(0),
            "1" => labels.push(1),
            _ => return Err(format_err(path, i + 1, format!("label `{tok}` is not 0 or 1"))),
        }
    }
    if labels.is_empty() {
        return Err(format_err(path, 0, "labels file is empty".into()));
    }
    Ok(labels)
}

fn check_counts(path: &Path, rows: usize, labels: usize) -> Result<()> {
    if rows != labels {
        return Err(format_err(path, 0, format!("{rows} samples but {labels} labels")));
    }
    Ok(())
}

fn format_err(path: &Path, line: usize, message: String) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        line,
        message,
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned())
}

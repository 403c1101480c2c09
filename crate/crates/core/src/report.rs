//! Delimited tables and SVG heatmaps for a [`RunResult`].
//!
//! Numbers in tables use the shortest representation that parses back to the
//! same `f64`, so every table round-trips exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{ArmResult, RunResult};
use crate::models::ModelKind;
use crate::numerics::Matrix;
use crate::reproducibility::ReproducibilityMatrix;

const CELL: usize = 84;
const LEFT: usize = 110;
const TOP: usize = 70;

/// Writes through a sibling temp file and a rename, so readers never see a
/// partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("path has no file name")))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn matrix_csv(matrix: &ReproducibilityMatrix) -> String {
    let mut out = String::from("model");
    for m in matrix.models() {
        let _ = write!(out, ",{m}");
    }
    out.push('\n');
    for (i, m) in matrix.models().iter().enumerate() {
        out.push_str(m.name());
        for j in 0..matrix.size() {
            let _ = write!(out, ",{}", matrix.get(i, j));
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`matrix_csv`]; `k` is not stored in the table and must be supplied.
pub fn parse_matrix_csv(text: &str, k: usize) -> Result<ReproducibilityMatrix> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::format("empty matrix table"))?;
    let models = header
        .split(',')
        .skip(1)
        .map(str::parse::<ModelKind>)
        .collect::<Result<Vec<_>>>()?;
    let m = models.len();
    let mut values = Vec::with_capacity(m * m);
    for (i, line) in lines.enumerate() {
        let mut cells = line.split(',');
        let name = cells.next().unwrap_or_default();
        if name.parse::<ModelKind>()? != models[i.min(m - 1)] {
            return Err(Error::format(format!("row {i} is labelled {name}")));
        }
        for c in cells {
            values.push(c.parse::<f64>().map_err(|e| Error::format(format!("`{c}`: {e}")))?);
        }
    }
    ReproducibilityMatrix::new(Matrix::new(m, m, values)?, models, k)
}

/// Exports every table for every arm. Returns the written paths.
pub fn export_tables(result: &RunResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        written.push(path);
        Ok(())
    };

    let mut acc = String::from("mode,model,repeat,fold,hospital,accuracy\n");
    let mut summary = String::from("mode,model,mean,min,max\n");
    for arm in &result.arms {
        let mode = arm.mode.name();
        for a in &arm.accuracies {
            let _ = writeln!(
                acc,
                "{mode},{},{},{},{},{}",
                a.model, a.repeat, a.fold, a.hospital, a.accuracy
            );
        }
        for s in &arm.summary {
            let _ = writeln!(summary, "{mode},{},{},{},{}", s.model, s.mean, s.min, s.max);
        }
    }
    emit("accuracies.csv".into(), acc)?;
    emit("accuracy_summary.csv".into(), summary)?;

    for arm in &result.arms {
        let mode = arm.mode.name();
        for (h, m) in arm.hospital_matrices.iter().enumerate() {
            emit(format!("{mode}_hospital_{h}_matrix.csv"), matrix_csv(m))?;
        }
        emit(format!("{mode}_average_matrix.csv"), matrix_csv(&arm.average_matrix))?;
        emit(format!("{mode}_strengths.csv"), strengths_csv(arm))?;
        emit(format!("{mode}_biomarkers.csv"), biomarkers_csv(arm))?;
        emit(format!("{mode}_node_weights.csv"), node_weights_csv(arm))?;
        emit(format!("{mode}_hospital_rankings.csv"), rankings_csv(arm))?;
        if !arm.rounds.is_empty() {
            emit(format!("{mode}_rounds.csv"), rounds_csv(arm))?;
        }
    }
    Ok(written)
}

fn strengths_csv(arm: &ArmResult) -> String {
    let mut out = String::from("model,strength,selected\n");
    for (m, s) in arm.strengths.models.iter().zip(&arm.strengths.scores) {
        let _ = writeln!(out, "{m},{s},{}", *m == arm.selected_model);
    }
    out
}

fn biomarkers_csv(arm: &ArmResult) -> String {
    let mut out = String::from("rank,node,weight\n");
    for b in &arm.biomarkers {
        let _ = writeln!(out, "{},{},{}", b.rank, b.node, b.weight);
    }
    out
}

fn node_weights_csv(arm: &ArmResult) -> String {
    let mut out = String::from("model,hospital,node,weight\n");
    for per_model in &arm.node_weights {
        for w in per_model {
            for (n, v) in w.weights.iter().enumerate() {
                let _ = writeln!(out, "{},{},{n},{v}", w.model, w.hospital.unwrap_or_default());
            }
        }
    }
    out
}

fn rankings_csv(arm: &ArmResult) -> String {
    let mut out = String::from("model,hospital,rank,node\n");
    for r in &arm.hospital_rankings {
        for (i, n) in r.nodes.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{n}", r.model, r.hospital, i + 1);
        }
    }
    out
}

fn rounds_csv(arm: &ArmResult) -> String {
    let mut out = String::from("model,repeat,fold,round,hospital,train_loss,val_accuracy\n");
    for r in &arm.rounds {
        for (h, (loss, acc)) in r.train_loss.iter().zip(&r.val_accuracy).enumerate() {
            let _ = writeln!(out, "{},{},{},{},{h},{loss},{acc}", r.model, r.repeat, r.fold, r.round);
        }
    }
    out
}

/// M×M colored grid with 3-decimal cell labels and model names.
pub fn heatmap_svg(matrix: &ReproducibilityMatrix, title: &str) -> String {
    let m = matrix.size();
    let width = LEFT + m * CELL + 20;
    let height = TOP + m * CELL + 20;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-size="16" text-anchor="middle">{}</text>"#,
        width / 2,
        escape(title)
    );
    for (j, model) in matrix.models().iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{model}</text>"#,
            LEFT + j * CELL + CELL / 2,
            TOP - 10
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="13" text-anchor="end">{model}</text>"#,
            LEFT - 10,
            TOP + j * CELL + CELL / 2 + 5
        );
    }
    for i in 0..m {
        for j in 0..m {
            let v = matrix.get(i, j);
            let (x, y) = (LEFT + j * CELL, TOP + i * CELL);
            let _ = writeln!(
                svg,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}" stroke="white"/>"#,
                color(v)
            );
            let ink = if v > 0.5 { "white" } else { "black" };
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-size="14" text-anchor="middle" fill="{ink}">{v:.3}</text>"#,
                x + CELL / 2,
                y + CELL / 2 + 5
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn render_heatmap(matrix: &ReproducibilityMatrix, title: &str, path: &Path) -> Result<()> {
    write_atomic(path, heatmap_svg(matrix, title).as_bytes())
}

/// One heatmap per hospital matrix and per averaged matrix of every arm.
pub fn render_all_heatmaps(result: &RunResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for arm in &result.arms {
        let mode = arm.mode.name();
        for (h, m) in arm.hospital_matrices.iter().enumerate() {
            let path = dir.join(format!("{mode}_hospital_{h}_matrix.svg"));
            render_heatmap(m, &format!("{mode}: hospital {h}"), &path)?;
            written.push(path);
        }
        let path = dir.join(format!("{mode}_average_matrix.svg"));
        render_heatmap(&arm.average_matrix, &format!("{mode}: average over hospitals"), &path)?;
        written.push(path);
    }
    Ok(written)
}

// White at 0 to deep blue at 1.
fn color(v: f64) -> String {
    let t = v.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(247.0, 8.0),
        lerp(251.0, 48.0),
        lerp(255.0, 107.0)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

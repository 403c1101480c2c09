use crate::error::{Error, Result};
use crate::numerics::Matrix;

const MAX_INTENSITY: f64 = 255.0;

/// Fully connected pixel graph: `edge(p, q) = |I_p - I_q| / 255`.
pub fn image_to_graph(pixels: &[f64], side: usize) -> Result<Matrix> {
    if side == 0 || pixels.len() != side * side {
        return Err(Error::format(format!(
            "image of side {side} needs {} pixels, got {}",
            side * side,
            pixels.len()
        )));
    }
    if let Some(v) = pixels.iter().find(|v| !(0.0..=MAX_INTENSITY).contains(*v)) {
        return Err(Error::format(format!("intensity {v} outside [0, 255]")));
    }
    let n = pixels.len();
    let mut adj = Matrix::zeros(n, n);
    for p in 0..n {
        for q in (p + 1)..n {
            let w = (pixels[p] - pixels[q]).abs() / MAX_INTENSITY;
            adj.set(p, q, w);
            adj.set(q, p, w);
        }
    }
    Ok(adj)
}

/// Block-mean pooling of a square image by an integer factor.
pub fn downsample_image(pixels: &[f64], side: usize, factor: usize) -> Result<Vec<f64>> {
    if pixels.len() != side * side {
        return Err(Error::format(format!(
            "image of side {side} needs {} pixels, got {}",
            side * side,
            pixels.len()
        )));
    }
    if factor == 0 || !side.is_multiple_of(factor) {
        return Err(Error::Parameter(format!(
            "downsample factor {factor} does not divide image side {side}"
        )));
    }
    let out_side = side / factor;
    let area = (factor * factor) as f64;
    let mut out = Vec::with_capacity(out_side * out_side);
    for by in 0..out_side {
        for bx in 0..out_side {
            let mut total = 0.0;
            for y in by * factor..(by + 1) * factor {
                for x in bx * factor..(bx + 1) * factor {
                    total += pixels[y * side + x];
                }
            }
            out.push(total / area);
        }
    }
    Ok(out)
}

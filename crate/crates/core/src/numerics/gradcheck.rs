use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradDiscrepancy {
    pub param: usize,
    pub entry: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub tolerance: f64,
    /// Entry with the largest `|analytic - numeric| / max(1, |analytic|)`.
    pub worst: Option<GradDiscrepancy>,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.worst.as_ref().map_or(0.0, |w| w.error)
    }

    pub fn passed(&self) -> bool {
        self.max_error() <= self.tolerance
    }
}

/// Compares analytic gradients against central finite differences.
///
/// `loss_and_grad` maps a parameter list to `(loss, gradients)`, with one
/// gradient matrix per parameter in the same order and shape. Every entry of
/// every parameter is perturbed by `±step`.
pub fn gradient_check<F>(loss_and_grad: F, params: &[Matrix], tolerance: f64, step: f64) -> Result<GradCheckReport>
where
    F: Fn(&[Matrix]) -> Result<(f64, Vec<Matrix>)>,
{
    let (loss, analytic) = loss_and_grad(params)?;
    if !loss.is_finite() {
        return Err(Error::Domain(format!(
            "non-finite loss {loss} at unperturbed parameters"
        )));
    }
    if analytic.len() != params.len() {
        return Err(Error::Parameter(format!(
            "closure returned {} gradients for {} parameters",
            analytic.len(),
            params.len()
        )));
    }

    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        checked: 0,
        tolerance,
        worst: None,
    };
    for (p, grad) in analytic.iter().enumerate() {
        if grad.shape() != params[p].shape() {
            return Err(Error::Dimension {
                op: "gradient_check",
                left: grad.shape(),
                right: params[p].shape(),
            });
        }
        for entry in 0..params[p].len() {
            let original = params[p].as_slice()[entry];
            probe[p].as_mut_slice()[entry] = original + step;
            let (plus, _) = loss_and_grad(&probe)?;
            probe[p].as_mut_slice()[entry] = original - step;
            let (minus, _) = loss_and_grad(&probe)?;
            probe[p].as_mut_slice()[entry] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Domain(format!(
                    "non-finite loss while perturbing parameter {p} entry {entry}"
                )));
            }

            let numeric = (plus - minus) / (2.0 * step);
            let a = grad.as_slice()[entry];
            let error = (a - numeric).abs() / a.abs().max(1.0);
            report.checked += 1;
            if report.worst.as_ref().is_none_or(|w| error > w.error) {
                report.worst = Some(GradDiscrepancy {
                    param: p,
                    entry,
                    analytic: a,
                    numeric,
                    error,
                });
            }
        }
    }
    Ok(report)
}

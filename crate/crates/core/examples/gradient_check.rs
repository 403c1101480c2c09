//! Verifies the reverse-mode gradients of both model kinds against central
//! differences on random 6-node graphs.
//!
//! cargo run --example gradient_check

use fedrep::models::{Model, ModelKind, ModelSpec};
use fedrep::numerics::{gradient_check, DEFAULT_STEP};
use fedrep::selfcheck::gradient_fixture;

fn main() -> fedrep::Result<()> {
    for kind in [ModelKind::Gcn, ModelKind::DiffPool] {
        for seed in 0..3 {
            let (fixture, graph) = gradient_fixture(kind, 6, seed)?;
            let reference = Model::new(ModelSpec::new(kind, 6, seed))?;
            for (label, model) in [("reference init", &reference), ("large weights", &fixture)] {
                let report = gradient_check(
                    |p| model.batch_loss_and_grad(p, &[&graph]),
                    &model.snapshot().matrices(),
                    1e-4,
                    DEFAULT_STEP,
                )?;
                println!(
                    "{kind:<8} seed {seed} {label:<14} {:>4} entries  worst {:.2e}  {}",
                    report.checked,
                    report.max_error(),
                    if report.passed() { "ok" } else { "MISMATCH" }
                );
            }
        }
    }
    Ok(())
}

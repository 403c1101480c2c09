use super::{head, Forward, PreparedGraph};
use crate::error::Result;
use crate::numerics::{Tape, Var};

// params: conv1 (N×h), conv2 (h×1), head.weight (2×N), head.bias (1×2)
//
// Z₁ = relu(Â X W₁), z = Â Z₁ W₂ ∈ R^{N×1}, logits = (W_head z)ᵀ + b
pub(super) fn forward(tape: &mut Tape, params: &[Var], graph: &PreparedGraph) -> Result<Forward> {
    let [w1, w2, w_head, bias] = params else {
        unreachable!("GCN layout has four parameters")
    };
    let a_hat = tape.constant(graph.a_hat.clone());
    let ax = tape.constant(graph.propagated.clone());

    let h1 = tape.matmul(ax, *w1)?;
    let z1 = tape.relu(h1);
    let mixed = tape.matmul(a_hat, z1)?;
    let z = tape.matmul(mixed, *w2)?;
    let logits = head(tape, *w_head, *bias, z)?;
    Ok(Forward {
        logits,
        assignment: None,
    })
}

use super::{head, Forward, PreparedGraph};
use crate::error::Result;
use crate::numerics::{Tape, Var};

// params: embed (N×h), pool (N×c), readout (h×1), head.weight (2×c), head.bias (1×2)
//
// Z  = relu(Â X W_embed)          node embeddings, N×h
// S  = softmax_rows(Â X W_pool)   soft cluster assignment, N×c
// X' = Sᵀ Z,  A' = Sᵀ Â S         pooled graph
// z  = A' X' W_readout            one scalar per cluster
pub(super) fn forward(tape: &mut Tape, params: &[Var], graph: &PreparedGraph) -> Result<Forward> {
    let [w_embed, w_pool, w_readout, w_head, bias] = params else {
        unreachable!("DiffPool layout has five parameters")
    };
    let a_hat = tape.constant(graph.a_hat.clone());
    let ax = tape.constant(graph.propagated.clone());

    let pre_embed = tape.matmul(ax, *w_embed)?;
    let z = tape.relu(pre_embed);
    let pre_assign = tape.matmul(ax, *w_pool)?;
    let s = tape.softmax_rows(pre_assign);

    let s_t = tape.transpose(s);
    let x_pooled = tape.matmul(s_t, z)?;
    let s_t_a = tape.matmul(s_t, a_hat)?;
    let a_pooled = tape.matmul(s_t_a, s)?;

    let mixed = tape.matmul(a_pooled, x_pooled)?;
    let cluster_z = tape.matmul(mixed, *w_readout)?;
    let logits = head(tape, *w_head, *bias, cluster_z)?;
    Ok(Forward {
        logits,
        assignment: Some(s),
    })
}

//! Dense matrices, reverse-mode autodiff and a finite-difference gradient check.

mod gradcheck;
mod matrix;
mod tape;

pub use gradcheck::{gradient_check, GradCheckReport, GradDiscrepancy, DEFAULT_STEP};
pub use matrix::{compensated_sum, Matrix};
pub use tape::{softmax_rows, Node, Op, Tape, Var};

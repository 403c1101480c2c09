//! Tape-based reverse-mode automatic differentiation over dense matrices.
//!
//! Nodes are appended in evaluation order, so the tape itself is a
//! topological order: [`Tape::backward`] walks it once, from the output
//! back to the leaves, and visits every node exactly one time.
//!
//! ```
//! use fedrep::numerics::{Matrix, Tape};
//!
//! let mut tape = Tape::new();
//! let w = tape.param(Matrix::new(1, 2, vec![0.5, -0.5]).unwrap());
//! let x = tape.constant(Matrix::new(2, 1, vec![2.0, 1.0]).unwrap());
//! let y = tape.matmul(w, x).unwrap();
//! tape.backward(y).unwrap();
//! assert_eq!(tape.grad(w).unwrap().as_slice(), &[2.0, 1.0]);
//! ```

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The operation that produced a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Relu(Var),
    Scale(Var, f64),
    Transpose(Var),
    SoftmaxRows(Var),
    CrossEntropy(Var, usize),
}

/// One recorded value with its provenance and (after backward) gradient.
#[derive(Debug, Clone)]
pub struct Node {
    pub value: Matrix,
    pub grad: Option<Matrix>,
    pub op: Op,
    requires_grad: bool,
}

impl Node {
    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Every recorded node, in creation order.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` output with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.derived(value, Op::MatMul(a, b), &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.derived(value, Op::Add(a, b), &[a, b]))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        self.derived(value, Op::Relu(a), &[a])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).scale(factor);
        self.derived(value, Op::Scale(a, factor), &[a])
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.derived(value, Op::Transpose(a), &[a])
    }

    /// Row-wise softmax with per-row max subtraction.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = softmax_rows(self.value(a));
        self.derived(value, Op::SoftmaxRows(a), &[a])
    }

    /// `-log softmax(logits)[label]` for a 1×2 logit row.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let z = self.value(logits);
        if z.shape() != (1, 2) {
            return Err(Error::Dimension {
                op: "cross_entropy",
                left: z.shape(),
                right: (1, 2),
            });
        }
        if label > 1 {
            return Err(Error::Domain(format!("label {label} is not in {{0, 1}}")));
        }
        let loss = cross_entropy_value(z.as_slice(), label);
        Ok(self.derived(Matrix::scalar(loss), Op::CrossEntropy(logits, label), &[logits]))
    }

    /// Accumulates d(output)/d(node) into every node that requires a gradient.
    /// `output` must be 1×1. Gradients from a previous call are discarded.
    pub fn backward(&mut self, output: Var) -> Result<()> {
        let shape = self.value(output).shape();
        if shape != (1, 1) {
            return Err(Error::Dimension {
                op: "backward",
                left: shape,
                right: (1, 1),
            });
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[output.0].grad = Some(Matrix::scalar(1.0));

        for i in (0..=output.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[i].grad.take() else {
                continue;
            };
            match self.nodes[i].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    if self.nodes[a.0].requires_grad {
                        let ga = g.matmul_t(self.value(b))?;
                        self.accumulate(a, ga)?;
                    }
                    if self.nodes[b.0].requires_grad {
                        let gb = self.value(a).t_matmul(&g)?;
                        self.accumulate(b, gb)?;
                    }
                }
                Op::Add(a, b) => {
                    if self.nodes[a.0].requires_grad {
                        self.accumulate(a, g.clone())?;
                    }
                    if self.nodes[b.0].requires_grad {
                        self.accumulate(b, g.clone())?;
                    }
                }
                Op::Relu(a) => {
                    let input = self.value(a);
                    let mut ga = g.clone();
                    for (gv, &x) in ga.as_mut_slice().iter_mut().zip(input.as_slice()) {
                        if x <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    self.accumulate(a, ga)?;
                }
                Op::Scale(a, factor) => {
                    self.accumulate(a, g.scale(factor))?;
                }
                Op::Transpose(a) => {
                    self.accumulate(a, g.transpose())?;
                }
                Op::SoftmaxRows(a) => {
                    let s = &self.nodes[i].value;
                    let mut ga = Matrix::zeros(s.rows(), s.cols());
                    for r in 0..s.rows() {
                        let srow = s.row(r);
                        let grow = g.row(r);
                        let dot: f64 = srow.iter().zip(grow).map(|(a, b)| a * b).sum();
                        for c in 0..s.cols() {
                            ga.set(r, c, srow[c] * (grow[c] - dot));
                        }
                    }
                    self.accumulate(a, ga)?;
                }
                Op::CrossEntropy(a, label) => {
                    let upstream = g.get(0, 0);
                    let mut ga = softmax_rows(self.value(a));
                    let p = ga.get(0, label);
                    ga.set(0, label, p - 1.0);
                    self.accumulate(a, ga.scale(upstream))?;
                }
            }
            self.nodes[i].grad = Some(g);
        }
        Ok(())
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn derived(&mut self, value: Matrix, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(value, op, requires_grad)
    }

    fn accumulate(&mut self, v: Var, g: Matrix) -> Result<()> {
        let slot = &mut self.nodes[v.0].grad;
        match slot {
            Some(existing) => existing.add_assign(&g),
            None => {
                *slot = Some(g);
                Ok(())
            }
        }
    }
}

pub fn softmax_rows(z: &Matrix) -> Matrix {
    let mut out = z.clone();
    let cols = z.cols();
    for chunk in out.as_mut_slice().chunks_mut(cols) {
        let max = chunk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in chunk.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in chunk.iter_mut() {
            *v /= total;
        }
    }
    out
}

fn cross_entropy_value(z: &[f64], label: usize) -> f64 {
    let (top, max) = z.iter().copied().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
    );
    let rest: f64 = z
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, &v)| (v - max).exp())
        .sum();
    rest.ln_1p() + (max - z[label])
}

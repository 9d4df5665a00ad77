use crate::error::{AutodiffError, Result};
use crate::ops::{backward_op, forward_op, OpKind};
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
struct Node {
    op: Option<OpKind>,
    parents: Vec<usize>,
    value: Tensor,
    requires_grad: bool,
}

/// Append-only record of a forward computation.
///
/// Nodes are pushed in evaluation order, so every parent index is smaller
/// than its child's. Values computed only from constants carry
/// `requires_grad == false` and are skipped during replay.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradient buffers keyed by node id.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient of `var`, or zeros of `shape` when it did not influence the loss.
    pub fn get_or_zeros(&self, var: Var, shape: &[usize]) -> Tensor {
        self.get(var).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
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

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { op: None, parents: Vec::new(), value, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    /// Evaluates `op` on recorded inputs and records the result.
    pub fn apply(&mut self, op: OpKind, inputs: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
        let value = forward_op(&op, &values)?;
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            op: Some(op),
            parents: inputs.iter().map(|v| v.0).collect(),
            value,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::MatMul, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Add, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Mul, &[a, b])
    }

    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        self.apply(OpKind::AddBias, &[a, bias])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.apply(OpKind::Scale(s), &[a])
    }

    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Result<Var> {
        self.apply(OpKind::Affine { scale, shift }, &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Tanh, &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Sigmoid, &[a])
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Softmax, &[a])
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        if inputs.len() == 1 {
            return Ok(inputs[0]);
        }
        self.apply(OpKind::Concat { axis }, inputs)
    }

    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        self.apply(OpKind::Slice { axis, start, len }, &[a])
    }

    pub fn repeat_cols(&mut self, a: Var, n: usize) -> Result<Var> {
        self.apply(OpKind::RepeatCols(n), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Sum, &[a])
    }

    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Mse, &[a, b])
    }

    pub fn mae(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Mae, &[a, b])
    }

    pub fn cross_entropy(&mut self, probs: Var, one_hot: Var) -> Result<Var> {
        self.apply(OpKind::CrossEntropy, &[probs, one_hot])
    }

    /// Reverse-mode sweep from a scalar loss.
    ///
    /// Gradients of nodes with several consumers accumulate additively.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let node = &self.nodes[loss.0];
        if !node.value.is_scalar() {
            return Err(AutodiffError::NonScalarLoss(node.value.shape().to_vec()));
        }
        if !node.requires_grad {
            return Err(AutodiffError::DetachedLoss);
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(grad) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if let Some(op) = &node.op {
                let inputs: Vec<&Tensor> =
                    node.parents.iter().map(|&p| &self.nodes[p].value).collect();
                let needs: Vec<bool> =
                    node.parents.iter().map(|&p| self.nodes[p].requires_grad).collect();
                let parent_grads = backward_op(op, &inputs, &node.value, &grad, &needs);
                for (&p, pg) in node.parents.iter().zip(parent_grads) {
                    let Some(pg) = pg else { continue };
                    if !self.nodes[p].requires_grad {
                        continue;
                    }
                    match &mut grads[p] {
                        Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, g)| *a += g),
                        slot @ None => *slot = Some(pg),
                    }
                }
            }
            grads[idx] = Some(grad);
        }

        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                g.map(|data| {
                    Tensor::new(self.nodes[i].value.shape().to_vec(), data).expect("grad shape")
                })
            })
            .collect();
        Ok(Gradients { grads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::vector(vec![0.5, -1.0, 2.0, 3.0, 0.0]).unwrap());
        let loss = tape.sum(w).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[1.0; 5]);
        assert_eq!(grads.get(loss).unwrap().item(), 1.0);
    }

    #[test]
    fn mse_against_zero() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::vector(vec![2.0]).unwrap());
        let zero = tape.constant(Tensor::vector(vec![0.0]).unwrap());
        let loss = tape.mse(w, zero).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[4.0]);
        assert!(grads.get(zero).is_none());
    }

    #[test]
    fn detached_and_non_scalar_losses_error() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::scalar(3.0));
        let doubled = tape.scale(c, 2.0).unwrap();
        assert!(matches!(tape.backward(doubled), Err(AutodiffError::DetachedLoss)));
        let w = tape.param(Tensor::vector(vec![1.0, 2.0]).unwrap());
        let t = tape.tanh(w).unwrap();
        assert!(matches!(tape.backward(t), Err(AutodiffError::NonScalarLoss(_))));
    }

    #[test]
    fn shared_node_accumulates() {
        // loss = sum(w * w) => grad 2w
        let mut tape = Tape::new();
        let w = tape.param(Tensor::vector(vec![1.5, -3.0]).unwrap());
        let sq = tape.mul(w, w).unwrap();
        let loss = tape.sum(sq).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[3.0, -6.0]);
    }

    #[test]
    fn parents_precede_children() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::scalar(1.0));
        let b = tape.tanh(a).unwrap();
        let c = tape.add(a, b).unwrap();
        for node_idx in 0..tape.len() {
            for &p in &tape.nodes[node_idx].parents {
                assert!(p < node_idx);
            }
        }
        assert!(c.id() > b.id());
    }
}

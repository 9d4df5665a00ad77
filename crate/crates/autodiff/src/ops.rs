//! Primitive operations: forward evaluation and vector-Jacobian products.
//!
//! Every primitive is a pure function of its input tensors. The tape calls
//! [`forward_op`] while recording and [`backward_op`] while replaying.

use crate::error::{AutodiffError, Result};
use crate::tensor::Tensor;

/// Probabilities below this are clamped before taking a logarithm.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum OpKind {
    MatMul,
    Add,
    Sub,
    Mul,
    /// Matrix plus a row vector added to every row.
    AddBias,
    Scale(f64),
    /// `scale * x + shift`, elementwise.
    Affine { scale: f64, shift: f64 },
    Tanh,
    Sigmoid,
    /// Softmax along the last axis (row-wise for matrices).
    Softmax,
    Concat { axis: usize },
    Slice { axis: usize, start: usize, len: usize },
    /// Expands a `B x 1` column into `B x n` by repetition.
    RepeatCols(usize),
    Sum,
    Mse,
    Mae,
    /// Inputs: row-stochastic probabilities and one-hot targets of equal shape.
    /// Result is the negative mean over rows of the log-probability of the target.
    CrossEntropy,
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::AddBias => "add_bias",
            OpKind::Scale(_) => "scale",
            OpKind::Affine { .. } => "affine",
            OpKind::Tanh => "tanh",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Softmax => "softmax",
            OpKind::Concat { .. } => "concat",
            OpKind::Slice { .. } => "slice",
            OpKind::RepeatCols(_) => "repeat_cols",
            OpKind::Sum => "sum",
            OpKind::Mse => "mse",
            OpKind::Mae => "mae",
            OpKind::CrossEntropy => "cross_entropy",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            OpKind::MatMul
            | OpKind::Add
            | OpKind::Sub
            | OpKind::Mul
            | OpKind::AddBias
            | OpKind::Mse
            | OpKind::Mae
            | OpKind::CrossEntropy => Some(2),
            OpKind::Concat { .. } => None,
            _ => Some(1),
        }
    }
}

fn mismatch(op: &OpKind, inputs: &[&Tensor]) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op: op.name(),
        shapes: inputs.iter().map(|t| t.shape().to_vec()).collect(),
    }
}

fn as_matrix(t: &Tensor) -> (usize, usize) {
    match t.shape() {
        [r, c] => (*r, *c),
        [c] => (1, *c),
        _ => (0, 0),
    }
}

fn elementwise(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Evaluates a primitive on concrete tensors.
pub fn forward_op(kind: &OpKind, inputs: &[&Tensor]) -> Result<Tensor> {
    match kind.arity() {
        Some(n) if inputs.len() != n => {
            return Err(AutodiffError::InvalidArgument {
                op: kind.name(),
                reason: format!("expected {n} inputs, got {}", inputs.len()),
            })
        }
        None if inputs.is_empty() => {
            return Err(AutodiffError::InvalidArgument {
                op: kind.name(),
                reason: "no inputs".into(),
            })
        }
        _ => {}
    }
    if inputs.iter().any(|t| !t.all_finite()) {
        return Err(AutodiffError::NonFinite { op: kind.name() });
    }

    let out = match kind {
        OpKind::MatMul => {
            let (a, b) = (inputs[0], inputs[1]);
            if !a.is_matrix() || !b.is_matrix() || a.cols() != b.rows() {
                return Err(mismatch(kind, inputs));
            }
            let (n, k, m) = (a.rows(), a.cols(), b.cols());
            let mut out = vec![0.0; n * m];
            let (ad, bd) = (a.data(), b.data());
            for i in 0..n {
                let orow = &mut out[i * m..(i + 1) * m];
                for p in 0..k {
                    let av = ad[i * k + p];
                    if av == 0.0 {
                        continue;
                    }
                    let brow = &bd[p * m..(p + 1) * m];
                    for (o, &bv) in orow.iter_mut().zip(brow) {
                        *o += av * bv;
                    }
                }
            }
            Tensor::new(vec![n, m], out)?
        }
        OpKind::Add | OpKind::Sub | OpKind::Mul => {
            let (a, b) = (inputs[0], inputs[1]);
            if a.shape() != b.shape() {
                return Err(mismatch(kind, inputs));
            }
            match kind {
                OpKind::Add => elementwise(a, b, |x, y| x + y),
                OpKind::Sub => elementwise(a, b, |x, y| x - y),
                _ => elementwise(a, b, |x, y| x * y),
            }
        }
        OpKind::AddBias => {
            let (a, b) = (inputs[0], inputs[1]);
            let (_, cols) = as_matrix(a);
            let (brows, bcols) = as_matrix(b);
            if a.shape().len() > 2 || b.shape().len() > 2 || brows != 1 || bcols != cols {
                return Err(mismatch(kind, inputs));
            }
            let bias = b.data();
            let data = a.data().iter().enumerate().map(|(i, &x)| x + bias[i % cols]).collect();
            Tensor::new(a.shape().to_vec(), data)?
        }
        OpKind::Scale(s) => inputs[0].map(|x| x * s),
        OpKind::Affine { scale, shift } => inputs[0].map(|x| scale * x + shift),
        OpKind::Tanh => inputs[0].map(f64::tanh),
        OpKind::Sigmoid => inputs[0].map(sigmoid),
        OpKind::Softmax => {
            let x = inputs[0];
            if x.shape().len() > 2 {
                return Err(mismatch(kind, inputs));
            }
            let cols = x.cols();
            let mut data = x.data().to_vec();
            for row in data.chunks_mut(cols) {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    total += *v;
                }
                for v in row.iter_mut() {
                    *v /= total;
                }
            }
            Tensor::new(x.shape().to_vec(), data)?
        }
        OpKind::Concat { axis } => concat(kind, *axis, inputs)?,
        OpKind::Slice { axis, start, len } => {
            let x = inputs[0];
            let (rows, cols) = as_matrix(x);
            let extent = if *axis == 0 { rows } else { cols };
            if x.shape().len() > 2 || *axis > 1 || *len == 0 || start + len > extent {
                return Err(mismatch(kind, inputs));
            }
            if *axis == 0 {
                let data = x.data()[start * cols..(start + len) * cols].to_vec();
                Tensor::new(vec![*len, cols], data)?
            } else {
                let mut data = Vec::with_capacity(rows * len);
                for r in 0..rows {
                    data.extend_from_slice(&x.data()[r * cols + start..r * cols + start + len]);
                }
                Tensor::new(vec![rows, *len], data)?
            }
        }
        OpKind::RepeatCols(n) => {
            let x = inputs[0];
            if !x.is_matrix() || x.cols() != 1 || *n == 0 {
                return Err(mismatch(kind, inputs));
            }
            let mut data = Vec::with_capacity(x.rows() * n);
            for &v in x.data() {
                data.extend(std::iter::repeat_n(v, *n));
            }
            Tensor::new(vec![x.rows(), *n], data)?
        }
        OpKind::Sum => Tensor::scalar(inputs[0].sum()),
        OpKind::Mse | OpKind::Mae => {
            let (a, b) = (inputs[0], inputs[1]);
            if a.shape() != b.shape() {
                return Err(mismatch(kind, inputs));
            }
            let n = a.len() as f64;
            let total: f64 = if *kind == OpKind::Mse {
                a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum()
            } else {
                a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum()
            };
            Tensor::scalar(total / n)
        }
        OpKind::CrossEntropy => {
            let (p, t) = (inputs[0], inputs[1]);
            if p.shape() != t.shape() || p.shape().len() > 2 {
                return Err(mismatch(kind, inputs));
            }
            let cols = p.cols();
            for row in p.data().chunks(cols) {
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > 1e-6 || row.iter().any(|&v| v < 0.0) {
                    return Err(AutodiffError::InvalidArgument {
                        op: kind.name(),
                        reason: format!("probability row sums to {s}, expected 1"),
                    });
                }
            }
            let rows = p.rows() as f64;
            let total: f64 = p
                .data()
                .iter()
                .zip(t.data())
                .filter(|(_, &tv)| tv != 0.0)
                .map(|(&pv, &tv)| -tv * pv.max(PROB_CLAMP).ln())
                .sum();
            Tensor::scalar(total / rows)
        }
    };
    if !out.all_finite() {
        return Err(AutodiffError::NonFinite { op: kind.name() });
    }
    Ok(out)
}

fn concat(kind: &OpKind, axis: usize, inputs: &[&Tensor]) -> Result<Tensor> {
    let first = inputs[0];
    if first.shape().len() == 1 {
        if axis != 0 || inputs.iter().any(|t| t.shape().len() != 1) {
            return Err(mismatch(kind, inputs));
        }
        let data: Vec<f64> = inputs.iter().flat_map(|t| t.data().iter().copied()).collect();
        return Tensor::vector(data);
    }
    if axis > 1 || inputs.iter().any(|t| !t.is_matrix()) {
        return Err(mismatch(kind, inputs));
    }
    if axis == 0 {
        let cols = first.cols();
        if inputs.iter().any(|t| t.cols() != cols) {
            return Err(mismatch(kind, inputs));
        }
        let rows = inputs.iter().map(|t| t.rows()).sum();
        let data: Vec<f64> = inputs.iter().flat_map(|t| t.data().iter().copied()).collect();
        Tensor::new(vec![rows, cols], data)
    } else {
        let rows = first.rows();
        if inputs.iter().any(|t| t.rows() != rows) {
            return Err(mismatch(kind, inputs));
        }
        let cols: usize = inputs.iter().map(|t| t.cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for t in inputs {
                data.extend_from_slice(t.row(r));
            }
        }
        Tensor::new(vec![rows, cols], data)
    }
}

/// Vector-Jacobian product of a primitive.
///
/// Returns one gradient buffer per input (flat, same length as that input);
/// entries for inputs with `needs[i] == false` are `None`.
pub fn backward_op(
    kind: &OpKind,
    inputs: &[&Tensor],
    output: &Tensor,
    grad: &[f64],
    needs: &[bool],
) -> Vec<Option<Vec<f64>>> {
    let mut out: Vec<Option<Vec<f64>>> = vec![None; inputs.len()];
    match kind {
        OpKind::MatMul => {
            let (a, b) = (inputs[0], inputs[1]);
            let (n, k, m) = (a.rows(), a.cols(), b.cols());
            if needs[0] {
                // dA = G B^T
                let mut ga = vec![0.0; n * k];
                let bd = b.data();
                for i in 0..n {
                    let grow = &grad[i * m..(i + 1) * m];
                    for p in 0..k {
                        let brow = &bd[p * m..(p + 1) * m];
                        ga[i * k + p] = grow.iter().zip(brow).map(|(g, v)| g * v).sum();
                    }
                }
                out[0] = Some(ga);
            }
            if needs[1] {
                // dB = A^T G
                let mut gb = vec![0.0; k * m];
                let ad = a.data();
                for i in 0..n {
                    let grow = &grad[i * m..(i + 1) * m];
                    for p in 0..k {
                        let av = ad[i * k + p];
                        if av == 0.0 {
                            continue;
                        }
                        for (o, g) in gb[p * m..(p + 1) * m].iter_mut().zip(grow) {
                            *o += av * g;
                        }
                    }
                }
                out[1] = Some(gb);
            }
        }
        OpKind::Add => {
            out[0] = needs[0].then(|| grad.to_vec());
            out[1] = needs[1].then(|| grad.to_vec());
        }
        OpKind::Sub => {
            out[0] = needs[0].then(|| grad.to_vec());
            out[1] = needs[1].then(|| grad.iter().map(|g| -g).collect());
        }
        OpKind::Mul => {
            let (a, b) = (inputs[0], inputs[1]);
            out[0] = needs[0].then(|| grad.iter().zip(b.data()).map(|(g, v)| g * v).collect());
            out[1] = needs[1].then(|| grad.iter().zip(a.data()).map(|(g, v)| g * v).collect());
        }
        OpKind::AddBias => {
            out[0] = needs[0].then(|| grad.to_vec());
            if needs[1] {
                let cols = inputs[1].len();
                let mut gb = vec![0.0; cols];
                for row in grad.chunks(cols) {
                    for (o, g) in gb.iter_mut().zip(row) {
                        *o += g;
                    }
                }
                out[1] = Some(gb);
            }
        }
        OpKind::Scale(s) => out[0] = Some(grad.iter().map(|g| g * s).collect()),
        OpKind::Affine { scale, .. } => out[0] = Some(grad.iter().map(|g| g * scale).collect()),
        OpKind::Tanh => {
            out[0] = Some(grad.iter().zip(output.data()).map(|(g, y)| g * (1.0 - y * y)).collect())
        }
        OpKind::Sigmoid => {
            out[0] = Some(grad.iter().zip(output.data()).map(|(g, y)| g * y * (1.0 - y)).collect())
        }
        OpKind::Softmax => {
            let cols = output.cols();
            let mut gx = vec![0.0; output.len()];
            for ((gx_row, y_row), g_row) in
                gx.chunks_mut(cols).zip(output.data().chunks(cols)).zip(grad.chunks(cols))
            {
                let dot: f64 = y_row.iter().zip(g_row).map(|(y, g)| y * g).sum();
                for ((o, y), g) in gx_row.iter_mut().zip(y_row).zip(g_row) {
                    *o = y * (g - dot);
                }
            }
            out[0] = Some(gx);
        }
        OpKind::Concat { axis } => {
            if inputs[0].shape().len() == 1 || *axis == 0 {
                let mut offset = 0;
                for (i, t) in inputs.iter().enumerate() {
                    if needs[i] {
                        out[i] = Some(grad[offset..offset + t.len()].to_vec());
                    }
                    offset += t.len();
                }
            } else {
                let rows = output.rows();
                let total = output.cols();
                let mut col0 = 0;
                for (i, t) in inputs.iter().enumerate() {
                    let c = t.cols();
                    if needs[i] {
                        let mut g = Vec::with_capacity(rows * c);
                        for r in 0..rows {
                            g.extend_from_slice(&grad[r * total + col0..r * total + col0 + c]);
                        }
                        out[i] = Some(g);
                    }
                    col0 += c;
                }
            }
        }
        OpKind::Slice { axis, start, len } => {
            let x = inputs[0];
            let (rows, cols) = as_matrix(x);
            let mut gx = vec![0.0; x.len()];
            if *axis == 0 {
                gx[start * cols..(start + len) * cols].copy_from_slice(grad);
            } else {
                for r in 0..rows {
                    gx[r * cols + start..r * cols + start + len]
                        .copy_from_slice(&grad[r * len..(r + 1) * len]);
                }
            }
            out[0] = Some(gx);
        }
        OpKind::RepeatCols(n) => {
            out[0] = Some(grad.chunks(*n).map(|c| c.iter().sum()).collect());
        }
        OpKind::Sum => {
            out[0] = Some(vec![grad[0]; inputs[0].len()]);
        }
        OpKind::Mse => {
            let (a, b) = (inputs[0], inputs[1]);
            let scale = 2.0 * grad[0] / a.len() as f64;
            let d: Vec<f64> = a.data().iter().zip(b.data()).map(|(x, y)| scale * (x - y)).collect();
            out[1] = needs[1].then(|| d.iter().map(|v| -v).collect());
            out[0] = needs[0].then_some(d);
        }
        OpKind::Mae => {
            let (a, b) = (inputs[0], inputs[1]);
            let scale = grad[0] / a.len() as f64;
            let d: Vec<f64> = a
                .data()
                .iter()
                .zip(b.data())
                .map(|(x, y)| {
                    let diff = x - y;
                    if diff > 0.0 {
                        scale
                    } else if diff < 0.0 {
                        -scale
                    } else {
                        0.0
                    }
                })
                .collect();
            out[1] = needs[1].then(|| d.iter().map(|v| -v).collect());
            out[0] = needs[0].then_some(d);
        }
        OpKind::CrossEntropy => {
            let (p, t) = (inputs[0], inputs[1]);
            let rows = p.rows() as f64;
            if needs[0] {
                out[0] = Some(
                    p.data()
                        .iter()
                        .zip(t.data())
                        .map(|(&pv, &tv)| {
                            if tv == 0.0 || pv < PROB_CLAMP {
                                0.0
                            } else {
                                -grad[0] * tv / (rows * pv)
                            }
                        })
                        .collect(),
                );
            }
            if needs[1] {
                out[1] = Some(
                    p.data().iter().map(|&pv| -grad[0] * pv.max(PROB_CLAMP).ln() / rows).collect(),
                );
            }
        }
    }
    out
}

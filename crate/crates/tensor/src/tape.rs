use crate::error::{arg_err, Result};
use crate::ops::conv::{conv2d_backward, conv2d_forward_keep, ConvGeometry};
use crate::ops::elementwise::{self, elu_derivative};
use crate::ops::linear::{dense_backward, dense_forward};
use crate::ops::loss::{cross_entropy_index, softmax_rows};
use crate::ops::norm::{self, ChannelStats};
use crate::ops::pool;
use crate::ops::shape;
use crate::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    /// `cols` holds the unfolded input while the kernel needs a gradient.
    Conv2d { input: Var, kernel: Var, bias: Var, geom: ConvGeometry, cols: Option<Vec<f64>> },
    Elu { x: Var, alpha: f64 },
    Relu { x: Var },
    ZNorm { x: Var, epsilon: f64, stats: ChannelStats },
    Standardize { x: Var, epsilon: f64, stats: ChannelStats },
    Concat { parts: Vec<Var> },
    SliceChannels { x: Var, start: usize },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    MaxPool { x: Var, argmax: Vec<usize> },
    GlobalAvgPool { x: Var },
    Dense { x: Var, w: Var, b: Var },
    Sum { x: Var },
    CrossEntropy { logits: Var, targets: Vec<usize>, probs: Tensor },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Op,
    grad: Option<Tensor>,
}

/// Append-only record of executed operations.
///
/// Nodes are stored in execution order, so every node follows the producers
/// of its inputs and the reverse sweep in [`Tape::backward`] is a plain
/// reverse iteration. A tape belongs to one thread; build a fresh tape per
/// forward pass.
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

    /// Records an input or parameter.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, requires_grad, Op::Leaf)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of a leaf after [`Tape::backward`].
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    /// Batch statistics computed by a [`Tape::znorm`] node.
    pub fn znorm_stats(&self, v: Var) -> Option<&ChannelStats> {
        match &self.nodes[v.0].op {
            Op::ZNorm { stats, .. } => Some(stats),
            _ => None,
        }
    }

    /// Number of recorded z-normalization nodes.
    pub fn count_znorm(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.op, Op::ZNorm { .. } | Op::Standardize { .. }))
            .count()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var, stride: usize, padding: usize) -> Result<Var> {
        let keep = self.nodes[kernel.0].requires_grad;
        let (y, geom, cols) =
            conv2d_forward_keep(self.value(input), self.value(kernel), self.value(bias), stride, padding, keep)?;
        let rg = self.any_grad(&[input, kernel, bias]);
        Ok(self.push(y, rg, Op::Conv2d { input, kernel, bias, geom, cols }))
    }

    pub fn elu(&mut self, x: Var, alpha: f64) -> Result<Var> {
        let y = elementwise::elu_forward(self.value(x), alpha)?;
        let rg = self.any_grad(&[x]);
        Ok(self.push(y, rg, Op::Elu { x, alpha }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = elementwise::relu_forward(self.value(x));
        let rg = self.any_grad(&[x]);
        self.push(y, rg, Op::Relu { x })
    }

    /// Per-channel standardization with statistics of this batch.
    pub fn znorm(&mut self, x: Var, epsilon: f64) -> Result<Var> {
        let (y, stats) = norm::znorm_forward(self.value(x), epsilon)?;
        let rg = self.any_grad(&[x]);
        Ok(self.push(y, rg, Op::ZNorm { x, epsilon, stats }))
    }

    /// Per-channel standardization with externally supplied statistics.
    pub fn standardize(&mut self, x: Var, stats: ChannelStats, epsilon: f64) -> Result<Var> {
        let y = norm::standardize(self.value(x), &stats, epsilon)?;
        let rg = self.any_grad(&[x]);
        Ok(self.push(y, rg, Op::Standardize { x, epsilon, stats }))
    }

    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let y = shape::concat_channels(&values)?;
        let rg = self.any_grad(parts);
        Ok(self.push(y, rg, Op::Concat { parts: parts.to_vec() }))
    }

    pub fn slice_channels(&mut self, x: Var, start: usize, count: usize) -> Result<Var> {
        let y = shape::slice_channels(self.value(x), start, count)?;
        let rg = self.any_grad(&[x]);
        Ok(self.push(y, rg, Op::SliceChannels { x, start }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = elementwise::add_forward(self.value(a), self.value(b))?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(y, rg, Op::Add { a, b }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = elementwise::mul_forward(self.value(a), self.value(b))?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(y, rg, Op::Mul { a, b }))
    }

    pub fn maxpool(&mut self, x: Var, kernel: usize, stride: usize, padding: usize) -> Result<Var> {
        let (y, argmax) = pool::maxpool_forward(self.value(x), kernel, stride, padding)?;
        let rg = self.any_grad(&[x]);
        Ok(self.push(y, rg, Op::MaxPool { x, argmax }))
    }

    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let y = pool::global_avg_pool_forward(self.value(x))?;
        let rg = self.any_grad(&[x]);
        Ok(self.push(y, rg, Op::GlobalAvgPool { x }))
    }

    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = dense_forward(self.value(x), self.value(w), self.value(b))?;
        let rg = self.any_grad(&[x, w, b]);
        Ok(self.push(y, rg, Op::Dense { x, w, b }))
    }

    /// Sum of all elements, as a rank-0 tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.value(x).data().iter().sum();
        let rg = self.any_grad(&[x]);
        self.push(Tensor::scalar(total), rg, Op::Sum { x })
    }

    /// Batch-mean cross-entropy of `[B, N]` logits against class indices,
    /// computed through log-sum-exp.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let value = cross_entropy_index(self.value(logits), targets)?;
        let probs = softmax_rows(self.value(logits))?;
        let rg = self.any_grad(&[logits]);
        Ok(self.push(
            Tensor::scalar(value),
            rg,
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        ))
    }

    /// Clears leaf gradients, then fills them with ∂loss/∂leaf.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        self.zero_grad();
        self.backward_accumulate(loss)
    }

    /// Adds ∂loss/∂leaf onto any gradients already held by the leaves.
    pub fn backward_accumulate(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.len() != 1 {
            return arg_err(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            ));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if let Op::Leaf = self.nodes[i].op {
                let node = &mut self.nodes[i];
                match &mut node.grad {
                    Some(existing) => existing.data_mut().iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    None => node.grad = Some(Tensor::new(node.value.shape(), g)?),
                }
                continue;
            }
            self.propagate(i, &g, &mut grads);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let rg = |v: Var| self.nodes[v.0].requires_grad;
        let mut send = |v: Var, contribution: Vec<f64>| accumulate(grads, v, contribution);
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { input, kernel, bias, geom, cols } => {
                let need = [rg(*input), rg(*kernel), rg(*bias)];
                let x = self.value(*input).data();
                let out = conv2d_backward(geom, x, cols.as_deref(), self.value(*kernel).data(), g, need);
                if let Some(d) = out.input {
                    send(*input, d);
                }
                if let Some(d) = out.kernel {
                    send(*kernel, d);
                }
                if let Some(d) = out.bias {
                    send(*bias, d);
                }
            }
            Op::Elu { x, alpha } => {
                let d = self
                    .value(*x)
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(&v, gi)| gi * elu_derivative(v, *alpha))
                    .collect();
                send(*x, d);
            }
            Op::Relu { x } => {
                let d = self
                    .value(*x)
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(&v, &gi)| if v > 0.0 { gi } else { 0.0 })
                    .collect();
                send(*x, d);
            }
            Op::ZNorm { x, epsilon, stats } => {
                send(*x, norm::znorm_backward(&node.value, stats, *epsilon, g));
            }
            Op::Standardize { x, epsilon, stats } => {
                send(*x, norm::standardize_backward(node.value.shape(), stats, *epsilon, g));
            }
            Op::Concat { parts } => {
                let (b, _, h, w) = node.value.dims4().expect("rank 4");
                let plane = h * w;
                let total = node.value.shape()[1];
                let mut offset = 0;
                for &p in parts {
                    let c = self.value(p).shape()[1];
                    if rg(p) {
                        let mut d = Vec::with_capacity(b * c * plane);
                        for n in 0..b {
                            let base = (n * total + offset) * plane;
                            d.extend_from_slice(&g[base..base + c * plane]);
                        }
                        send(p, d);
                    }
                    offset += c;
                }
            }
            Op::SliceChannels { x, start } => {
                let src = self.value(*x);
                let (b, c, h, w) = src.dims4().expect("rank 4");
                let plane = h * w;
                let count = node.value.shape()[1];
                let mut d = vec![0.0; src.len()];
                for n in 0..b {
                    let dst = (n * c + start) * plane;
                    d[dst..dst + count * plane].copy_from_slice(&g[n * count * plane..(n + 1) * count * plane]);
                }
                send(*x, d);
            }
            Op::Add { a, b } => {
                if rg(*a) {
                    send(*a, g.to_vec());
                }
                if rg(*b) {
                    send(*b, g.to_vec());
                }
            }
            Op::Mul { a, b } => {
                if rg(*a) {
                    send(*a, g.iter().zip(self.value(*b).data()).map(|(x, y)| x * y).collect());
                }
                if rg(*b) {
                    send(*b, g.iter().zip(self.value(*a).data()).map(|(x, y)| x * y).collect());
                }
            }
            Op::MaxPool { x, argmax } => {
                send(*x, pool::maxpool_backward(self.value(*x).len(), argmax, g));
            }
            Op::GlobalAvgPool { x } => {
                send(*x, pool::global_avg_pool_backward(self.value(*x).shape(), g));
            }
            Op::Dense { x, w, b } => {
                let need = [rg(*x), rg(*w), rg(*b)];
                let (dx, dw, db) = dense_backward(self.value(*x), self.value(*w), g, need);
                if let Some(d) = dx {
                    send(*x, d);
                }
                if let Some(d) = dw {
                    send(*w, d);
                }
                if let Some(d) = db {
                    send(*b, d);
                }
            }
            Op::Sum { x } => {
                send(*x, vec![g[0]; self.value(*x).len()]);
            }
            Op::CrossEntropy { logits, targets, probs } => {
                let n = probs.shape()[1];
                let scale = g[0] / targets.len() as f64;
                let mut d: Vec<f64> = probs.data().iter().map(|p| p * scale).collect();
                for (row, &t) in targets.iter().enumerate() {
                    d[row * n + t] -= scale;
                }
                send(*logits, d);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, contribution: Vec<f64>) {
    match &mut grads[v.0] {
        Some(existing) => existing.iter_mut().zip(&contribution).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(contribution),
    }
}

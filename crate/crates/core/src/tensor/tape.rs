use super::{check_keep, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Constant,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    MatMul(usize, usize),
    Concat(Vec<usize>, usize),
    Sigmoid(usize),
    Tanh(usize),
    Exp(usize),
    Ln(usize),
    Scale(usize, f64),
    AddScalar(usize),
    Clamp(usize, f64, f64),
    Sum(usize),
    SumSq(usize),
    SumAxis(usize, usize),
    MeanAxis(usize, usize),
    Softmax(usize, usize),
    Dropout(usize, Tensor),
    Row(usize, usize),
    Stack(Vec<usize>),
    GatherRows(usize, Vec<usize>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run record of one forward pass.
///
/// Nodes are appended in evaluation order, so every node's parents precede
/// it and a single reverse sweep visits each node once.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node of a tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `var`; zeros when the loss does not depend on it.
    pub fn wrt(&self, var: Var) -> Tensor {
        let shape = self.shapes[var.0].clone();
        match &self.grads[var.0] {
            Some(g) => Tensor::from_parts(shape, g.clone()),
            None => Tensor::zeros(&shape),
        }
    }

    /// Consumes the gradient buffer for `var` without copying.
    pub fn take(&mut self, var: Var) -> Tensor {
        let shape = self.shapes[var.0].clone();
        match self.grads[var.0].take() {
            Some(g) => Tensor::from_parts(shape, g),
            None => Tensor::zeros(&shape),
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn is_taped(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn derived(&mut self, value: Tensor, op: Op, parents: &[usize]) -> Var {
        let requires_grad = parents.iter().any(|&p| self.nodes[p].requires_grad);
        self.push(value, op, requires_grad)
    }

    fn v(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.v(a).add(self.v(b))?;
        Ok(self.derived(value, Op::Add(a.0, b.0), &[a.0, b.0]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.v(a).sub(self.v(b))?;
        Ok(self.derived(value, Op::Sub(a.0, b.0), &[a.0, b.0]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.v(a).mul(self.v(b))?;
        Ok(self.derived(value, Op::Mul(a.0, b.0), &[a.0, b.0]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.v(a).matmul(self.v(b))?;
        Ok(self.derived(value, Op::MatMul(a.0, b.0), &[a.0, b.0]))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let values: Vec<&Tensor> = parts.iter().map(|p| self.v(*p)).collect();
        let value = Tensor::concat(&values, axis)?;
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        Ok(self.derived(value, Op::Concat(ids.clone(), axis), &ids))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.v(a).sigmoid();
        self.derived(value, Op::Sigmoid(a.0), &[a.0])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.v(a).tanh();
        self.derived(value, Op::Tanh(a.0), &[a.0])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.v(a).exp();
        self.derived(value, Op::Exp(a.0), &[a.0])
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let value = self.v(a).ln();
        self.derived(value, Op::Ln(a.0), &[a.0])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.v(a).scale(c);
        self.derived(value, Op::Scale(a.0, c), &[a.0])
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.v(a).add_scalar(c);
        self.derived(value, Op::AddScalar(a.0), &[a.0])
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let neg = self.scale(a, -1.0);
        self.add_scalar(neg, 1.0)
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let value = self.v(a).clamp(lo, hi);
        self.derived(value, Op::Clamp(a.0, lo, hi), &[a.0])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = self.v(a).sum();
        self.derived(value, Op::Sum(a.0), &[a.0])
    }

    pub fn sum_sq(&mut self, a: Var) -> Var {
        let value = self.v(a).sum_sq();
        self.derived(value, Op::SumSq(a.0), &[a.0])
    }

    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let value = self.v(a).sum_axis(axis)?;
        Ok(self.derived(value, Op::SumAxis(a.0, axis), &[a.0]))
    }

    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let value = self.v(a).mean_axis(axis)?;
        Ok(self.derived(value, Op::MeanAxis(a.0, axis), &[a.0]))
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let value = self.v(a).softmax(axis)?;
        Ok(self.derived(value, Op::Softmax(a.0, axis), &[a.0]))
    }

    /// Inverted dropout with a fixed 0/1 `mask`.
    pub fn dropout(&mut self, a: Var, keep: f64, mask: &Tensor) -> Result<Var> {
        check_keep(keep)?;
        let scaled = mask.scale(1.0 / keep);
        let value = self.v(a).mul(&scaled).map_err(|_| Error::Shape {
            op: "dropout",
            lhs: self.v(a).shape().to_vec(),
            rhs: mask.shape().to_vec(),
        })?;
        Ok(self.derived(value, Op::Dropout(a.0, scaled), &[a.0]))
    }

    pub fn row(&mut self, a: Var, index: usize) -> Result<Var> {
        let value = self.v(a).row(index)?;
        Ok(self.derived(value, Op::Row(a.0, index), &[a.0]))
    }

    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor> = rows.iter().map(|r| self.v(*r)).collect();
        let value = Tensor::stack(&values)?;
        let ids: Vec<usize> = rows.iter().map(|r| r.0).collect();
        Ok(self.derived(value, Op::Stack(ids.clone()), &ids))
    }

    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let value = self.v(a).gather_rows(indices)?;
        Ok(self.derived(value, Op::GatherRows(a.0, indices.to_vec()), &[a.0]))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = &self.nodes[loss.0];
        if root.value.len() != 1 {
            return Err(Error::Shape {
                op: "backward",
                lhs: root.value.shape().to_vec(),
                rhs: vec![1],
            });
        }
        if !root.requires_grad {
            return Err(Error::Untaped);
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }

        grads.resize(self.nodes.len(), None);
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], target: usize, contribution: impl FnOnce(&mut [f64])) {
        if !self.nodes[target].requires_grad {
            return;
        }
        let slot = grads[target].get_or_insert_with(|| vec![0.0; self.nodes[target].value.len()]);
        contribution(slot);
    }

    fn propagate(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[id];
        let y = node.value.data();
        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |s| axpy(s, 1.0, g));
                self.accumulate(grads, *b, |s| axpy(s, 1.0, g));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, |s| axpy(s, 1.0, g));
                self.accumulate(grads, *b, |s| axpy(s, -1.0, g));
            }
            Op::Mul(a, b) => {
                let av = self.nodes[*a].value.data();
                let bv = self.nodes[*b].value.data();
                self.accumulate(grads, *a, |s| {
                    for ((s, gi), bi) in s.iter_mut().zip(g).zip(bv) {
                        *s += gi * bi;
                    }
                });
                self.accumulate(grads, *b, |s| {
                    for ((s, gi), ai) in s.iter_mut().zip(g).zip(av) {
                        *s += gi * ai;
                    }
                });
            }
            Op::MatMul(a, b) => self.matmul_backward(*a, *b, g, grads),
            Op::Concat(parts, axis) => {
                let mut offset = 0;
                let out_cols = node.value.cols();
                for &p in parts {
                    let pv = &self.nodes[p].value;
                    if pv.rank() == 1 || *axis == 0 {
                        let n = pv.len();
                        self.accumulate(grads, p, |s| axpy(s, 1.0, &g[offset..offset + n]));
                        offset += n;
                    } else {
                        let (rows, cols) = (pv.rows(), pv.cols());
                        let col0 = offset;
                        self.accumulate(grads, p, |s| {
                            for r in 0..rows {
                                let src = &g[r * out_cols + col0..r * out_cols + col0 + cols];
                                axpy(&mut s[r * cols..(r + 1) * cols], 1.0, src);
                            }
                        });
                        offset += cols;
                    }
                }
            }
            Op::Sigmoid(a) => self.accumulate(grads, *a, |s| {
                for ((s, gi), yi) in s.iter_mut().zip(g).zip(y) {
                    *s += gi * yi * (1.0 - yi);
                }
            }),
            Op::Tanh(a) => self.accumulate(grads, *a, |s| {
                for ((s, gi), yi) in s.iter_mut().zip(g).zip(y) {
                    *s += gi * (1.0 - yi * yi);
                }
            }),
            Op::Exp(a) => self.accumulate(grads, *a, |s| {
                for ((s, gi), yi) in s.iter_mut().zip(g).zip(y) {
                    *s += gi * yi;
                }
            }),
            Op::Ln(a) => {
                let x = self.nodes[*a].value.data();
                self.accumulate(grads, *a, |s| {
                    for ((s, gi), xi) in s.iter_mut().zip(g).zip(x) {
                        *s += gi / xi;
                    }
                })
            }
            Op::Scale(a, c) => self.accumulate(grads, *a, |s| axpy(s, *c, g)),
            Op::AddScalar(a) => self.accumulate(grads, *a, |s| axpy(s, 1.0, g)),
            Op::Clamp(a, lo, hi) => {
                let x = self.nodes[*a].value.data();
                self.accumulate(grads, *a, |s| {
                    for ((s, gi), xi) in s.iter_mut().zip(g).zip(x) {
                        if *xi >= *lo && *xi <= *hi {
                            *s += gi;
                        }
                    }
                })
            }
            Op::Sum(a) => self.accumulate(grads, *a, |s| s.iter_mut().for_each(|v| *v += g[0])),
            Op::SumSq(a) => {
                let x = self.nodes[*a].value.data();
                self.accumulate(grads, *a, |s| {
                    for (s, xi) in s.iter_mut().zip(x) {
                        *s += 2.0 * xi * g[0];
                    }
                })
            }
            Op::SumAxis(a, axis) | Op::MeanAxis(a, axis) => {
                let input = &self.nodes[*a].value;
                let scale = if matches!(node.op, Op::MeanAxis(..)) {
                    1.0 / input.shape()[*axis] as f64
                } else {
                    1.0
                };
                let lanes = reduction_lanes(input, *axis);
                self.accumulate(grads, *a, |s| {
                    for (k, lane) in lanes.iter().enumerate() {
                        for &i in lane {
                            s[i] += g[k] * scale;
                        }
                    }
                })
            }
            Op::Softmax(a, axis) => {
                let lanes = node.value.lanes(*axis);
                self.accumulate(grads, *a, |s| {
                    for lane in &lanes {
                        let inner: f64 = lane.iter().map(|&i| g[i] * y[i]).sum();
                        for &i in lane {
                            s[i] += y[i] * (g[i] - inner);
                        }
                    }
                })
            }
            Op::Dropout(a, scaled) => self.accumulate(grads, *a, |s| {
                for ((s, gi), m) in s.iter_mut().zip(g).zip(scaled.data()) {
                    *s += gi * m;
                }
            }),
            Op::Row(a, index) => {
                let c = g.len();
                self.accumulate(grads, *a, |s| axpy(&mut s[index * c..(index + 1) * c], 1.0, g))
            }
            Op::Stack(rows) => {
                let c = node.value.cols();
                for (r, &p) in rows.iter().enumerate() {
                    self.accumulate(grads, p, |s| axpy(s, 1.0, &g[r * c..(r + 1) * c]));
                }
            }
            Op::GatherRows(a, indices) => {
                let c = node.value.cols();
                self.accumulate(grads, *a, |s| {
                    for (r, &src) in indices.iter().enumerate() {
                        axpy(&mut s[src * c..(src + 1) * c], 1.0, &g[r * c..(r + 1) * c]);
                    }
                })
            }
        }
    }

    fn matmul_backward(&self, a: usize, b: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let av = &self.nodes[a].value;
        let bv = &self.nodes[b].value;
        let (m, k) = (av.rows(), av.cols());
        let ad = av.data();
        let bd = bv.data();
        if bv.rank() == 1 {
            // y = A x: dA = g x^T, dx = A^T g
            self.accumulate(grads, a, |s| {
                for i in 0..m {
                    let gi = g[i];
                    if gi == 0.0 {
                        continue;
                    }
                    for (sv, xv) in s[i * k..(i + 1) * k].iter_mut().zip(bd) {
                        *sv += gi * xv;
                    }
                }
            });
            self.accumulate(grads, b, |s| {
                for i in 0..m {
                    let gi = g[i];
                    if gi == 0.0 {
                        continue;
                    }
                    for (sv, av) in s.iter_mut().zip(&ad[i * k..(i + 1) * k]) {
                        *sv += gi * av;
                    }
                }
            });
            return;
        }
        let n = bv.cols();
        // dA = G B^T
        self.accumulate(grads, a, |s| {
            for i in 0..m {
                for p in 0..k {
                    s[i * k + p] += super::dot(&g[i * n..(i + 1) * n], &bd[p * n..(p + 1) * n]);
                }
            }
        });
        // dB = A^T G
        self.accumulate(grads, b, |s| {
            for i in 0..m {
                for p in 0..k {
                    let aip = ad[i * k + p];
                    if aip == 0.0 {
                        continue;
                    }
                    axpy(&mut s[p * n..(p + 1) * n], aip, &g[i * n..(i + 1) * n]);
                }
            }
        });
    }
}

fn axpy(dst: &mut [f64], alpha: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}

/// For each output element of a reduction over `axis`, the input indices it sums.
fn reduction_lanes(input: &Tensor, axis: usize) -> Vec<Vec<usize>> {
    if input.rank() == 1 {
        return vec![(0..input.len()).collect()];
    }
    // lanes(0) walks down columns, one lane per column: exactly the axis-0 reduction groups.
    input.lanes(axis)
}

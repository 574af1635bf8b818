use std::borrow::Cow;

use super::kernels::{
    conv2d_backward, conv2d_forward, gelu, gelu_derivative, matmul_grad_lhs, matmul_grad_rhs, ConvDims, Padding,
};
use super::{DiffError, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MatMul(Var, Var),
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        dims: ConvDims,
    },
    Cos(Var),
    Sin(Var),
    Gelu(Var),
    Sum(Var),
    Mean(Var),
    Reshape(Var),
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    Scale(Var, Var),
    ScaleConst(Var, f64),
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run tape. Parameters are borrowed, intermediates owned; the
/// graph is rebuilt for every forward pass.
#[derive(Default)]
pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
}

/// Result of [`Graph::backward`]: one optional gradient per node.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; `None` when `v` does not
    /// influence the loss or was not tracked.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Like [`get`](Self::get) but yields a zero tensor of the right shape.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Tensor>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn owned(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(Cow::Owned(value), op, rg)
    }

    /// Tracked leaf borrowing an existing tensor.
    pub fn param(&mut self, t: &'a Tensor) -> Var {
        self.push(Cow::Borrowed(t), Op::Leaf, true)
    }

    /// Tracked leaf owning its tensor.
    pub fn variable(&mut self, t: Tensor) -> Var {
        self.push(Cow::Owned(t), Op::Leaf, true)
    }

    /// Untracked leaf.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Cow::Owned(t), Op::Leaf, false)
    }

    /// Untracked leaf borrowing an existing tensor.
    pub fn constant_ref(&mut self, t: &'a Tensor) -> Var {
        self.push(Cow::Borrowed(t), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), DiffError> {
        if self.shape(a) != self.shape(b) {
            return Err(DiffError::ShapeMismatch {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    fn zip(&mut self, op: Op, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Var {
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| f(*x, *y)).collect();
        let t = Tensor::new(data, va.shape().to_vec()).expect("same shape");
        self.owned(t, op, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("add", a, b)?;
        Ok(self.zip(Op::Add(a, b), a, b, |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip(Op::Sub(a, b), a, b, |x, y| x - y))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip(Op::Mul(a, b), a, b, |x, y| x * y))
    }

    /// Adds a length-`n` vector to every row of an `[m, n]` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, DiffError> {
        let (sa, sr) = (self.shape(a), self.shape(row));
        if sa.len() != 2 || sr.len() != 1 || sa[1] != sr[0] {
            return Err(DiffError::ShapeMismatch {
                op: "add_row",
                lhs: sa.to_vec(),
                rhs: sr.to_vec(),
            });
        }
        let n = sr[0];
        let bias = self.value(row).data();
        let mut out = self.value(a).clone();
        for r in out.data_mut().chunks_mut(n) {
            for (o, b) in r.iter_mut().zip(bias) {
                *o += b;
            }
        }
        Ok(self.owned(out, Op::AddRow(a, row), &[a, row]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.owned(out, Op::MatMul(a, b), &[a, b]))
    }

    /// Stride-1 convolution of a `[C, H, W]` input with an `[O, C, KH, KW]`
    /// kernel and optional length-`O` bias.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Option<Var>, padding: Padding) -> Result<Var, DiffError> {
        let dims = ConvDims::new(self.shape(input), self.shape(kernel), padding)?;
        if let Some(b) = bias {
            if self.shape(b) != [dims.o] {
                return Err(DiffError::ShapeMismatch {
                    op: "conv2d bias",
                    lhs: vec![dims.o],
                    rhs: self.shape(b).to_vec(),
                });
            }
        }
        let data = conv2d_forward(
            &dims,
            self.value(input).data(),
            self.value(kernel).data(),
            bias.map(|b| self.value(b).data()),
        );
        let out = Tensor::new(data, vec![dims.o, dims.oh, dims.ow])?;
        let mut inputs = vec![input, kernel];
        inputs.extend(bias);
        Ok(self.owned(
            out,
            Op::Conv2d {
                input,
                kernel,
                bias,
                dims,
            },
            &inputs,
        ))
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::cos);
        self.owned(out, Op::Cos(a), &[a])
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::sin);
        self.owned(out, Op::Sin(a), &[a])
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(gelu);
        self.owned(out, Op::Gelu(a), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.owned(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.numel() as f64;
        self.owned(Tensor::scalar(s), Op::Mean(a), &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, DiffError> {
        let out = self.value(a).clone().reshaped(shape)?;
        Ok(self.owned(out, Op::Reshape(a), &[a]))
    }

    /// Concatenates tensors of equal rank along `axis`.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, DiffError> {
        let first = parts.first().ok_or(DiffError::Invalid("concat of zero tensors"))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(DiffError::Invalid("concat axis out of range"));
        }
        let mut total = 0;
        for p in parts {
            let s = self.shape(*p);
            let compatible = s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(DiffError::ShapeMismatch {
                    op: "concat",
                    lhs: base,
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let len = self.shape(*p)[axis] * inner;
                data.extend_from_slice(&self.value(*p).data()[o * len..(o + 1) * len]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let out = Tensor::new(data, shape)?;
        Ok(self.owned(
            out,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            parts,
        ))
    }

    /// Multiplies every entry of `a` by the one-element tensor `s`.
    pub fn scale(&mut self, a: Var, s: Var) -> Result<Var, DiffError> {
        if self.value(s).numel() != 1 {
            return Err(DiffError::NotScalar(self.shape(s).to_vec()));
        }
        let k = self.value(s).data()[0];
        let out = self.value(a).map(|x| k * x);
        Ok(self.owned(out, Op::Scale(a, s), &[a, s]))
    }

    /// Multiplies by a fixed constant.
    pub fn scale_const(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).map(|x| k * x);
        self.owned(out, Op::ScaleConst(a, k), &[a])
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, DiffError> {
        let lv = self.value(loss);
        if lv.numel() != 1 {
            return Err(DiffError::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::filled(lv.shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(&node.op, &g, &node.value, &mut grads);
            grads[i] = Some(g);
        }
        for (g, n) in grads.iter_mut().zip(&self.nodes) {
            if !n.requires_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let slot = grads[v.0].get_or_insert_with(|| Tensor::zeros(self.shape(v)));
        f(slot.data_mut());
    }

    fn propagate(&self, op: &Op, g: &Tensor, out: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |d| axpy(d, 1.0, gd));
                self.accumulate(grads, *b, |d| axpy(d, 1.0, gd));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, |d| axpy(d, 1.0, gd));
                self.accumulate(grads, *b, |d| axpy(d, -1.0, gd));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, |d| {
                    for ((o, gi), y) in d.iter_mut().zip(gd).zip(vb) {
                        *o += gi * y;
                    }
                });
                self.accumulate(grads, *b, |d| {
                    for ((o, gi), x) in d.iter_mut().zip(gd).zip(va) {
                        *o += gi * x;
                    }
                });
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, |d| axpy(d, 1.0, gd));
                let n = self.shape(*row)[0];
                self.accumulate(grads, *row, |d| {
                    for r in gd.chunks(n) {
                        axpy(d, 1.0, r);
                    }
                });
            }
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, |d| matmul_grad_lhs(gd, vb, d, m, k, n));
                self.accumulate(grads, *b, |d| matmul_grad_rhs(va, gd, d, m, k, n));
            }
            Op::Conv2d {
                input,
                kernel,
                bias,
                dims,
            } => {
                let (vi, vk) = (self.value(*input).data(), self.value(*kernel).data());
                let want_i = self.nodes[input.0].requires_grad;
                let want_k = self.nodes[kernel.0].requires_grad;
                let want_b = bias.is_some_and(|b| self.nodes[b.0].requires_grad);
                let mut gi = want_i.then(|| grads[input.0].take().unwrap_or_else(|| Tensor::zeros(self.shape(*input))));
                let mut gk =
                    want_k.then(|| grads[kernel.0].take().unwrap_or_else(|| Tensor::zeros(self.shape(*kernel))));
                let mut gb = if want_b {
                    let b = bias.expect("bias present");
                    Some(grads[b.0].take().unwrap_or_else(|| Tensor::zeros(self.shape(b))))
                } else {
                    None
                };
                conv2d_backward(
                    dims,
                    vi,
                    vk,
                    gd,
                    gi.as_mut().map(Tensor::data_mut),
                    gk.as_mut().map(Tensor::data_mut),
                    gb.as_mut().map(Tensor::data_mut),
                );
                if let Some(t) = gi {
                    grads[input.0] = Some(t);
                }
                if let Some(t) = gk {
                    grads[kernel.0] = Some(t);
                }
                if let (Some(t), Some(b)) = (gb, bias) {
                    grads[b.0] = Some(t);
                }
            }
            Op::Cos(a) => {
                let x = self.value(*a).data();
                self.accumulate(grads, *a, |d| {
                    for ((o, gi), xi) in d.iter_mut().zip(gd).zip(x) {
                        *o -= gi * xi.sin();
                    }
                });
            }
            Op::Sin(a) => {
                let x = self.value(*a).data();
                self.accumulate(grads, *a, |d| {
                    for ((o, gi), xi) in d.iter_mut().zip(gd).zip(x) {
                        *o += gi * xi.cos();
                    }
                });
            }
            Op::Gelu(a) => {
                let x = self.value(*a).data();
                self.accumulate(grads, *a, |d| {
                    for ((o, gi), xi) in d.iter_mut().zip(gd).zip(x) {
                        *o += gi * gelu_derivative(*xi);
                    }
                });
            }
            Op::Sum(a) => {
                let s = gd[0];
                self.accumulate(grads, *a, |d| d.iter_mut().for_each(|o| *o += s));
            }
            Op::Mean(a) => {
                let s = gd[0] / self.value(*a).numel() as f64;
                self.accumulate(grads, *a, |d| d.iter_mut().for_each(|o| *o += s));
            }
            Op::Reshape(a) => self.accumulate(grads, *a, |d| axpy(d, 1.0, gd)),
            Op::Concat { parts, axis } => {
                let shape = out.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let row = shape[*axis] * inner;
                let mut offset = 0;
                for p in parts {
                    let len = self.shape(*p)[*axis] * inner;
                    self.accumulate(grads, *p, |d| {
                        for o in 0..outer {
                            axpy(&mut d[o * len..(o + 1) * len], 1.0, &gd[o * row + offset..o * row + offset + len]);
                        }
                    });
                    offset += len;
                }
            }
            Op::Scale(a, s) => {
                let k = self.value(*s).data()[0];
                let x = self.value(*a).data();
                self.accumulate(grads, *a, |d| axpy(d, k, gd));
                let dot: f64 = gd.iter().zip(x).map(|(p, q)| p * q).sum();
                self.accumulate(grads, *s, |d| d[0] += dot);
            }
            Op::ScaleConst(a, k) => self.accumulate(grads, *a, |d| axpy(d, *k, gd)),
        }
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

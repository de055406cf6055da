//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation in creation order, so the tape is
//! already topologically sorted; [`Graph::backward`] walks it in reverse and
//! accumulates gradients additively. Parameters are borrowed, not copied.

use std::borrow::Cow;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Row(Var, usize),
    Conv1d { input: Var, filters: Var, bias: Var },
    MaxOverTime { input: Var, argmax: Vec<usize> },
    Dropout { input: Var, mask: Vec<f64> },
    Bce { prob: Var, target: f64 },
    Sum(Var),
    Dot(Var, Var),
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    needs_grad: bool,
}

/// Probabilities are clamped to [BCE_EPS, 1 - BCE_EPS] inside the loss.
pub const BCE_EPS: f64 = 1e-12;

#[derive(Default)]
pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
}

fn shape_err(op: &'static str, detail: String) -> Error {
    Error::ShapeMismatch { op, detail }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Tensor>, op: Op) -> Var {
        let needs_grad = op_inputs(&op).iter().any(|v| self.nodes[v.0].needs_grad);
        self.push_node(value, op, needs_grad)
    }

    fn push_node(&mut self, value: Cow<'a, Tensor>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// Borrowed leaf that receives a gradient, typically a model parameter.
    pub fn param(&mut self, t: &'a Tensor) -> Var {
        self.push_node(Cow::Borrowed(t), Op::Leaf, true)
    }

    /// Owned leaf that receives a gradient.
    pub fn variable(&mut self, t: Tensor) -> Var {
        self.push_node(Cow::Owned(t), Op::Leaf, true)
    }

    /// Constant leaf; no gradient flows into it.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push_node(Cow::Owned(t), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn dims2(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        let t = self.value(v);
        t.dims2()
            .ok_or_else(|| shape_err(op, format!("expected a 2-D operand, got shape {:?}", t.shape())))
    }

    /// `(n x k) * (k x m) -> (n x m)`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, k) = self.dims2(a, "matmul")?;
        let (k2, m) = self.dims2(b, "matmul")?;
        if k != k2 {
            return Err(shape_err("matmul", format!("inner dimensions {k} and {k2} differ")));
        }
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let row = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let x = av[i * k + p];
                if x == 0.0 {
                    continue;
                }
                for (o, &w) in row.iter_mut().zip(&bv[p * m..(p + 1) * m]) {
                    *o += x * w;
                }
            }
        }
        let t = Tensor::from_vec(&[n, m], out)?;
        Ok(self.push(Cow::Owned(t), Op::MatMul(a, b)))
    }

    /// Adds a bias vector of length m to every row of an `(n x m)` tensor.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (n, m) = self.dims2(a, "add_bias")?;
        if self.value(bias).len() != m {
            return Err(shape_err(
                "add_bias",
                format!("bias of length {} for {m} columns", self.value(bias).len()),
            ));
        }
        let bv = self.value(bias).data();
        let mut out = self.value(a).clone();
        for i in 0..n {
            for (o, b) in out.data_mut()[i * m..(i + 1) * m].iter_mut().zip(bv) {
                *o += b;
            }
        }
        Ok(self.push(Cow::Owned(out), Op::AddBias(a, bias)))
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(shape_err(op, format!("shapes {sa:?} and {sb:?} differ")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let mut out = self.value(a).clone();
        out.add_scaled(self.value(b), 1.0);
        Ok(self.push(Cow::Owned(out), Op::Add(a, b)))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let mut out = self.value(a).clone();
        for (o, y) in out.data_mut().iter_mut().zip(self.value(b).data()) {
            *o *= y;
        }
        Ok(self.push(Cow::Owned(out), Op::Mul(a, b)))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| 1.0 - v);
        self.push(Cow::Owned(out), Op::OneMinus(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(Cow::Owned(out), Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(Cow::Owned(out), Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| v.max(0.0));
        self.push(Cow::Owned(out), Op::Relu(a))
    }

    /// Row `t` of an `(n x m)` tensor as a `(1 x m)` tensor.
    pub fn row(&mut self, a: Var, t: usize) -> Result<Var> {
        let (n, m) = self.dims2(a, "row")?;
        if t >= n {
            return Err(shape_err("row", format!("row {t} of {n}")));
        }
        let data = self.value(a).data()[t * m..(t + 1) * m].to_vec();
        let out = Tensor::from_vec(&[1, m], data)?;
        Ok(self.push(Cow::Owned(out), Op::Row(a, t)))
    }

    /// Valid 1-D convolution over time. `input` is `(T x D)`, `filters` is
    /// `[W, D, F]`, `bias` has length F; the result is `(T - W + 1) x F`.
    pub fn conv1d(&mut self, input: Var, filters: Var, bias: Var) -> Result<Var> {
        let (t_len, d) = self.dims2(input, "conv1d")?;
        let (w, d2, f) = match self.value(filters).shape()[..] {
            [w, d2, f] => (w, d2, f),
            ref s => return Err(shape_err("conv1d", format!("filters must be 3-D, got {s:?}"))),
        };
        if d != d2 {
            return Err(shape_err("conv1d", format!("input width {d} vs filter depth {d2}")));
        }
        if self.value(bias).len() != f {
            return Err(shape_err("conv1d", format!("bias length {} for {f} filters", self.value(bias).len())));
        }
        if t_len < w {
            return Err(shape_err(
                "conv1d",
                format!("sequence of length {t_len} is shorter than kernel width {w}"),
            ));
        }
        let out_len = t_len - w + 1;
        let (x, k, b) = (
            self.value(input).data(),
            self.value(filters).data(),
            self.value(bias).data(),
        );
        let wd = w * d;
        let mut out = vec![0.0; out_len * f];
        for t in 0..out_len {
            let row = &mut out[t * f..(t + 1) * f];
            row.copy_from_slice(b);
            // Rows t..t+W of a row-major (T x D) input are one contiguous window.
            let window = &x[t * d..t * d + wd];
            for (p, &xv) in window.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                for (o, &kv) in row.iter_mut().zip(&k[p * f..(p + 1) * f]) {
                    *o += xv * kv;
                }
            }
        }
        let t = Tensor::from_vec(&[out_len, f], out)?;
        Ok(self.push(Cow::Owned(t), Op::Conv1d { input, filters, bias }))
    }

    /// Column-wise maximum of a `(T x F)` tensor, as `(1 x F)`. Ties keep the
    /// earliest position.
    pub fn max_over_time(&mut self, a: Var) -> Result<Var> {
        let (n, m) = self.dims2(a, "max_over_time")?;
        if n == 0 {
            return Err(shape_err("max_over_time", "empty time axis".into()));
        }
        let v = self.value(a).data();
        let mut argmax = vec![0usize; m];
        let mut out = v[..m].to_vec();
        for t in 1..n {
            for j in 0..m {
                if v[t * m + j] > out[j] {
                    out[j] = v[t * m + j];
                    argmax[j] = t;
                }
            }
        }
        let t = Tensor::from_vec(&[1, m], out)?;
        Ok(self.push(Cow::Owned(t), Op::MaxOverTime { input: a, argmax }))
    }

    /// Multiplies by a fixed mask. Inverted dropout passes masks holding 0
    /// or `1 / (1 - rate)`.
    pub fn dropout(&mut self, a: Var, mask: Vec<f64>) -> Result<Var> {
        if mask.len() != self.value(a).len() {
            return Err(shape_err("dropout", format!("mask of {} for {} values", mask.len(), self.value(a).len())));
        }
        let mut out = self.value(a).clone();
        for (o, m) in out.data_mut().iter_mut().zip(&mask) {
            *o *= m;
        }
        Ok(self.push(Cow::Owned(out), Op::Dropout { input: a, mask }))
    }

    /// Binary cross-entropy of a single probability against a 0/1 target.
    pub fn bce(&mut self, prob: Var, target: f64) -> Result<Var> {
        if self.value(prob).len() != 1 {
            return Err(shape_err("bce", format!("expected one probability, got shape {:?}", self.value(prob).shape())));
        }
        let p = self.value(prob).item().clamp(BCE_EPS, 1.0 - BCE_EPS);
        let loss = -(target * p.ln() + (1.0 - target) * (1.0 - p).ln());
        Ok(self.push(Cow::Owned(Tensor::scalar(loss)), Op::Bce { prob, target }))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Cow::Owned(Tensor::scalar(s)), Op::Sum(a))
    }

    /// Inner product of two tensors with the same number of values.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).len() != self.value(b).len() {
            return Err(shape_err("dot", format!("{} vs {} values", self.value(a).len(), self.value(b).len())));
        }
        let s = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x * y).sum();
        Ok(self.push(Cow::Owned(Tensor::scalar(s)), Op::Dot(a, b)))
    }

    /// Gradients of the scalar `loss` with respect to every node that
    /// depends on a parameter or variable.
    pub fn backward(&self, loss: Var) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.nodes[loss.0].needs_grad {
            let mut seed = Tensor::zeros(self.value(loss).shape());
            seed.fill(1.0);
            grads[loss.0] = Some(seed);
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = node.value.data();
            let gv = g.data();
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (n, k) = self.value(*a).dims2().unwrap();
                    let m = self.value(*b).dims2().unwrap().1;
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    if let Some(ga) = self.acc(&mut grads, *a) {
                        for i in 0..n {
                            let grow = &gv[i * m..(i + 1) * m];
                            for p in 0..k {
                                ga[i * k + p] += dot(grow, &bv[p * m..(p + 1) * m]);
                            }
                        }
                    }
                    if let Some(gb) = self.acc(&mut grads, *b) {
                        for i in 0..n {
                            let grow = &gv[i * m..(i + 1) * m];
                            for p in 0..k {
                                let x = av[i * k + p];
                                if x != 0.0 {
                                    axpy(&mut gb[p * m..(p + 1) * m], x, grow);
                                }
                            }
                        }
                    }
                }
                Op::AddBias(a, bias) => {
                    if let Some(ga) = self.acc(&mut grads, *a) {
                        axpy(ga, 1.0, gv);
                    }
                    let m = self.value(*bias).len();
                    if let Some(gb) = self.acc(&mut grads, *bias) {
                        for row in gv.chunks(m) {
                            axpy(gb, 1.0, row);
                        }
                    }
                }
                Op::Add(a, b) => {
                    for v in [a, b] {
                        if let Some(gx) = self.acc(&mut grads, *v) {
                            axpy(gx, 1.0, gv);
                        }
                    }
                }
                Op::Mul(a, b) => {
                    for (v, other) in [(a, b), (b, a)] {
                        let ov = self.value(*other).data();
                        if let Some(gx) = self.acc(&mut grads, *v) {
                            for ((o, gg), w) in gx.iter_mut().zip(gv).zip(ov) {
                                *o += gg * w;
                            }
                        }
                    }
                }
                Op::OneMinus(a) => {
                    if let Some(ga) = self.acc(&mut grads, *a) {
                        axpy(ga, -1.0, gv);
                    }
                }
                Op::Sigmoid(a) => {
                    if let Some(ga) = self.acc(&mut grads, *a) {
                        for ((o, gg), s) in ga.iter_mut().zip(gv).zip(y) {
                            *o += gg * s * (1.0 - s);
                        }
                    }
                }
                Op::Tanh(a) => {
                    if let Some(ga) = self.acc(&mut grads, *a) {
                        for ((o, gg), t) in ga.iter_mut().zip(gv).zip(y) {
                            *o += gg * (1.0 - t * t);
                        }
                    }
                }
                Op::Relu(a) => {
                    let xv = self.value(*a).data();
                    if let Some(ga) = self.acc(&mut grads, *a) {
                        for ((o, gg), x) in ga.iter_mut().zip(gv).zip(xv) {
                            if *x > 0.0 {
                                *o += gg;
                            }
                        }
                    }
                }
                Op::Row(a, t) => {
                    let m = g.len();
                    if let Some(ga) = self.acc(&mut grads, *a) {
                        axpy(&mut ga[t * m..(t + 1) * m], 1.0, gv);
                    }
                }
                Op::Conv1d { input, filters, bias } => {
                    let d = self.value(*input).dims2().unwrap().1;
                    let (w, f) = (self.value(*filters).shape()[0], self.value(*filters).shape()[2]);
                    let wd = w * d;
                    let out_len = g.len() / f;
                    let (xv, kv) = (self.value(*input).data(), self.value(*filters).data());

                    if let Some(gb) = self.acc(&mut grads, *bias) {
                        for row in gv.chunks(f) {
                            axpy(gb, 1.0, row);
                        }
                    }
                    if let Some(gk) = self.acc(&mut grads, *filters) {
                        for t in 0..out_len {
                            let grow = &gv[t * f..(t + 1) * f];
                            if grow.iter().all(|&v| v == 0.0) {
                                continue;
                            }
                            for (p, &x) in xv[t * d..t * d + wd].iter().enumerate() {
                                if x != 0.0 {
                                    axpy(&mut gk[p * f..(p + 1) * f], x, grow);
                                }
                            }
                        }
                    }
                    if let Some(gx) = self.acc(&mut grads, *input) {
                        for t in 0..out_len {
                            let grow = &gv[t * f..(t + 1) * f];
                            for (p, o) in gx[t * d..t * d + wd].iter_mut().enumerate() {
                                *o += dot(grow, &kv[p * f..(p + 1) * f]);
                            }
                        }
                    }
                }
                Op::MaxOverTime { input, argmax } => {
                    let m = argmax.len();
                    if let Some(ga) = self.acc(&mut grads, *input) {
                        for (j, &t) in argmax.iter().enumerate() {
                            ga[t * m + j] += gv[j];
                        }
                    }
                }
                Op::Dropout { input, mask } => {
                    if let Some(ga) = self.acc(&mut grads, *input) {
                        for ((o, gg), mm) in ga.iter_mut().zip(gv).zip(mask) {
                            *o += gg * mm;
                        }
                    }
                }
                Op::Bce { prob, target } => {
                    let p = self.value(*prob).item().clamp(BCE_EPS, 1.0 - BCE_EPS);
                    let dp = -target / p + (1.0 - target) / (1.0 - p);
                    if let Some(gp) = self.acc(&mut grads, *prob) {
                        gp[0] += g.item() * dp;
                    }
                }
                Op::Sum(a) => {
                    let gg = g.item();
                    if let Some(ga) = self.acc(&mut grads, *a) {
                        ga.iter_mut().for_each(|o| *o += gg);
                    }
                }
                Op::Dot(a, b) => {
                    let gg = g.item();
                    for (v, other) in [(a, b), (b, a)] {
                        let ov = self.value(*other).data();
                        if let Some(gx) = self.acc(&mut grads, *v) {
                            axpy(gx, gg, ov);
                        }
                    }
                }
            }
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    /// Gradient buffer of `v`, allocated on first use; `None` for constants.
    fn acc<'g>(&self, grads: &'g mut [Option<Tensor>], v: Var) -> Option<&'g mut [f64]> {
        if !self.nodes[v.0].needs_grad {
            return None;
        }
        Some(
            grads[v.0]
                .get_or_insert_with(|| Tensor::zeros(self.value(v).shape()))
                .data_mut(),
        )
    }
}

fn op_inputs(op: &Op) -> Vec<Var> {
    match op {
        Op::Leaf => vec![],
        Op::MatMul(a, b) | Op::AddBias(a, b) | Op::Add(a, b) | Op::Mul(a, b) | Op::Dot(a, b) => vec![*a, *b],
        Op::OneMinus(a) | Op::Sigmoid(a) | Op::Tanh(a) | Op::Relu(a) | Op::Row(a, _) | Op::Sum(a) => vec![*a],
        Op::Conv1d { input, filters, bias } => vec![*input, *filters, *bias],
        Op::MaxOverTime { input, .. } | Op::Dropout { input, .. } => vec![*input],
        Op::Bce { prob, .. } => vec![*prob],
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(out: &mut [f64], alpha: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; `None` when `v` does not
    /// influence the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Gradient with respect to `v`, zeros when it has none.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn sigmoid_value_and_slope() {
        let x = t(&[1], &[0.0]);
        let mut g = Graph::new();
        let v = g.param(&x);
        let s = g.sigmoid(v);
        assert_eq!(g.value(s).item(), 0.5);
        let grads = g.backward(s);
        assert_eq!(grads.get(v).unwrap().item(), 0.25);
    }

    #[test]
    fn max_over_time_routes_gradient() {
        let x = t(&[3, 1], &[3.0, -1.0, 7.0]);
        let mut g = Graph::new();
        let v = g.param(&x);
        let m = g.max_over_time(v).unwrap();
        assert_eq!(g.value(m).data(), &[7.0]);
        let s = g.sum(m);
        let grads = g.backward(s);
        assert_eq!(grads.get(v).unwrap().data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn bce_at_half() {
        let x = t(&[1], &[0.5]);
        let mut g = Graph::new();
        let p = g.param(&x);
        let l = g.bce(p, 1.0).unwrap();
        assert!((g.value(l).item() - 2f64.ln()).abs() < 1e-15);
        assert!((g.backward(l).get(p).unwrap().item() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn shape_errors_name_the_op() {
        let a = t(&[2, 3], &[0.0; 6]);
        let b = t(&[2, 3], &[0.0; 6]);
        let mut g = Graph::new();
        let (va, vb) = (g.param(&a), g.param(&b));
        let err = g.matmul(va, vb).unwrap_err();
        assert!(err.to_string().contains("matmul"));
        let k = t(&[5, 3, 1], &[0.0; 15]);
        let bias = t(&[1], &[0.0]);
        let (vk, vbias) = (g.param(&k), g.param(&bias));
        let err = g.conv1d(va, vk, vbias).unwrap_err();
        assert!(err.to_string().contains("shorter than kernel width"), "{err}");
    }

    #[test]
    fn gradients_accumulate_over_reuse() {
        // f = sum(x * x) -> df/dx = 2x
        let x = t(&[3], &[1.0, -2.0, 0.5]);
        let mut g = Graph::new();
        let v = g.param(&x);
        let sq = g.mul(v, v).unwrap();
        let s = g.sum(sq);
        assert_eq!(g.backward(s).get(v).unwrap().data(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn conv_matches_direct_sum() {
        // T = 3, D = 2, W = 2, F = 1
        let x = t(&[3, 2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let k = t(&[2, 2, 1], &[1.0, 0.0, 0.0, -1.0]);
        let b = t(&[1], &[0.5]);
        let mut g = Graph::new();
        let (vx, vk, vb) = (g.param(&x), g.param(&k), g.param(&b));
        let c = g.conv1d(vx, vk, vb).unwrap();
        // t=0: 1*1 + 4*(-1) + 0.5 = -2.5 ; t=1: 3 - 6 + 0.5 = -2.5
        assert_eq!(g.value(c).data(), &[-2.5, -2.5]);
    }
}

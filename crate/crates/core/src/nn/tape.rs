//! Reverse-mode automatic differentiation over a linear tape of 2-D tensors.
//!
//! Every operation appends a node holding its forward value. A single
//! backward pass walks the tape in reverse, accumulating gradients for the
//! nodes that (transitively) depend on a trainable leaf.

use super::activation::Activation;
use super::linalg::gemm;
use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    Act(Var, Activation),
    Clamp(Var, f64, f64),
    Ln(Var),
    Sum(Var),
    GatherRows(Var, Vec<usize>),
    GatherMatVec(Var, Vec<usize>, Var),
    ConcatCols(Var, Var),
    SoftmaxXent(Var, Vec<usize>, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
    source: Option<(String, String)>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    consumed: bool,
}

fn dims2(t: &Tensor) -> (usize, usize) {
    (t.rows(), t.cols())
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last backward pass with respect to `v`, if `v` was on
    /// a trainable path.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
            source: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Constant input; never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, false)
    }

    /// Trainable leaf whose gradient can later be routed into `store`.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        let value = store.get(name)?.clone();
        let v = self.push(Op::Leaf, value, true);
        self.nodes[v.0].source = Some((store.label().to_string(), name.to_string()));
        Ok(v)
    }

    /// A parameter read as a constant (e.g. the discriminator during a
    /// generator update).
    pub fn frozen(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        Ok(self.constant(store.get(name)?.clone()))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = dims2(self.value(a));
        let (k2, n) = dims2(self.value(b));
        if k != k2 {
            return Err(Error::Dimension(format!(
                "matmul of {m}x{k} by {k2}x{n}"
            )));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            (k as isize, 1),
            self.value(b).data(),
            (n as isize, 1),
            &mut out,
            false,
        );
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::MatMul(a, b), Tensor::new(vec![m, n], out)?, rg))
    }

    /// Adds a length-`n` bias to every row of an `m×n` matrix.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (m, n) = dims2(self.value(a));
        let b = self.value(bias).data();
        if b.len() != n {
            return Err(Error::Dimension(format!(
                "bias of length {} for {m}x{n} input",
                b.len()
            )));
        }
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_mut(n.max(1)) {
            row.iter_mut().zip(b).for_each(|(x, bi)| *x += bi);
        }
        let rg = self.rg(a) || self.rg(bias);
        Ok(self.push(Op::AddBias(a, bias), Tensor::new(vec![m, n], out)?, rg))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::Dimension(format!(
                "{what}: shapes {:?} and {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Add(a, b), Tensor::new(shape, out)?, rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Mul(a, b), Tensor::new(shape, out)?, rg))
    }

    /// `scale · a + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let t = self.value(a);
        let out: Vec<f64> = t.data().iter().map(|x| scale * x + shift).collect();
        let value = Tensor::new(t.shape().to_vec(), out).expect("same shape");
        let rg = self.rg(a);
        self.push(Op::Affine(a, scale), value, rg)
    }

    pub fn activation(&mut self, a: Var, act: Activation) -> Var {
        let t = self.value(a);
        let out: Vec<f64> = t.data().iter().map(|&x| act.apply(x)).collect();
        let value = Tensor::new(t.shape().to_vec(), out).expect("same shape");
        let rg = self.rg(a);
        self.push(Op::Act(a, act), value, rg)
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where clamping is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let t = self.value(a);
        let out: Vec<f64> = t.data().iter().map(|x| x.clamp(lo, hi)).collect();
        let value = Tensor::new(t.shape().to_vec(), out).expect("same shape");
        let rg = self.rg(a);
        self.push(Op::Clamp(a, lo, hi), value, rg)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let out: Vec<f64> = t.data().iter().map(|x| x.ln()).collect();
        let value = Tensor::new(t.shape().to_vec(), out).expect("same shape");
        let rg = self.rg(a);
        self.push(Op::Ln(a), value, rg)
    }

    /// Sum of all entries, as a 1-element tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(a);
        self.push(Op::Sum(a), Tensor::scalar(s), rg)
    }

    /// Row gather: `out[i] = src[indices[i]]`.
    pub fn gather_rows(&mut self, src: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(src);
        let rows = t.rows();
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::Parameter(format!(
                "row index {bad} out of range for {rows} rows"
            )));
        }
        let c = t.cols();
        let value = t.select_rows(indices).reshape(vec![indices.len(), c])?;
        let rg = self.rg(src);
        Ok(self.push(Op::GatherRows(src, indices.to_vec()), value, rg))
    }

    /// Batched matrix-vector product with per-row matrix selection:
    /// `out[b] = mats[indices[b]] · vecs[b]`, where `mats` has shape `K×d×d`.
    pub fn gather_matvec(&mut self, mats: Var, indices: &[usize], vecs: Var) -> Result<Var> {
        let m = self.value(mats);
        let shape = m.shape();
        if shape.len() != 3 || shape[1] != shape[2] {
            return Err(Error::Dimension(format!(
                "gather_matvec expects K×d×d matrices, got {shape:?}"
            )));
        }
        let (k, d) = (shape[0], shape[1]);
        let v = self.value(vecs);
        if v.rows() != indices.len() || v.cols() != d {
            return Err(Error::Dimension(format!(
                "gather_matvec: {} indices and {:?} vectors for d={d}",
                indices.len(),
                v.shape()
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= k) {
            return Err(Error::Parameter(format!("matrix index {bad} out of range for {k}")));
        }
        let mut out = vec![0.0; indices.len() * d];
        for (b, &idx) in indices.iter().enumerate() {
            let a = &m.data()[idx * d * d..(idx + 1) * d * d];
            let x = v.row(b);
            for i in 0..d {
                out[b * d + i] = a[i * d..(i + 1) * d].iter().zip(x).map(|(p, q)| p * q).sum();
            }
        }
        let rg = self.rg(mats) || self.rg(vecs);
        let value = Tensor::new(vec![indices.len(), d], out)?;
        Ok(self.push(Op::GatherMatVec(mats, indices.to_vec(), vecs), value, rg))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ra, ca) = dims2(self.value(a));
        let (rb, cb) = dims2(self.value(b));
        if ra != rb {
            return Err(Error::Dimension(format!("concat of {ra} and {rb} rows")));
        }
        let mut out = Vec::with_capacity(ra * (ca + cb));
        for i in 0..ra {
            out.extend_from_slice(self.value(a).row(i));
            out.extend_from_slice(self.value(b).row(i));
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::ConcatCols(a, b), Tensor::new(vec![ra, ca + cb], out)?, rg))
    }

    /// Summed softmax cross-entropy of `logits` (B×C) against integer labels.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let t = self.value(logits);
        let (b, c) = dims2(t);
        if labels.len() != b {
            return Err(Error::Dimension(format!("{} labels for {b} rows", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::Parameter(format!("label {bad} out of range for {c} classes")));
        }
        let mut probs = vec![0.0; b * c];
        let mut loss = 0.0;
        for i in 0..b {
            let row = t.row(i);
            let p = &mut probs[i * c..(i + 1) * c];
            let lse = log_softmax_into(row, p);
            loss += lse - row[labels[i]];
        }
        let rg = self.rg(logits);
        Ok(self.push(
            Op::SoftmaxXent(logits, labels.to_vec(), probs),
            Tensor::scalar(loss),
            rg,
        ))
    }

    /// Backpropagates from a scalar node.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.backward_with(loss, vec![1.0])
    }

    /// Backpropagates an arbitrary upstream gradient `seed` = dL/d`out`.
    /// A tape can be consumed only once.
    pub fn backward_with(&mut self, out: Var, seed: Vec<f64>) -> Result<()> {
        if self.consumed {
            return Err(Error::Usage("computation trace already consumed".into()));
        }
        if seed.len() != self.value(out).len() {
            return Err(Error::Dimension(format!(
                "seed gradient of length {} for output of shape {:?}",
                seed.len(),
                self.value(out).shape()
            )));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(seed);
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        // Trainable leaves that the loss does not depend on get zero gradients.
        for (i, node) in self.nodes.iter().enumerate() {
            if node.source.is_some() && grads[i].is_none() {
                grads[i] = Some(vec![0.0; node.value.len()]);
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = dims2(self.value(*a));
                let n = self.value(*b).cols();
                if self.rg(*a) {
                    // dA = G · Bᵀ
                    let ga = acc(grads, *a, m * k);
                    gemm(m, n, k, g, (n as isize, 1), self.value(*b).data(), (1, n as isize), ga, true);
                }
                if self.rg(*b) {
                    // dB = Aᵀ · G
                    let gb = acc(grads, *b, k * n);
                    gemm(k, m, n, self.value(*a).data(), (1, k as isize), g, (n as isize, 1), gb, true);
                }
            }
            Op::AddBias(a, bias) => {
                let n = self.value(*bias).len();
                if self.rg(*a) {
                    add_into(acc(grads, *a, g.len()), g);
                }
                if self.rg(*bias) {
                    let gb = acc(grads, *bias, n);
                    for row in g.chunks(n.max(1)) {
                        gb.iter_mut().zip(row).for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if self.rg(*v) {
                        add_into(acc(grads, *v, g.len()), g);
                    }
                }
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    let other = self.value(*b).data();
                    let ga = acc(grads, *a, g.len());
                    for ((x, gi), o) in ga.iter_mut().zip(g).zip(other) {
                        *x += gi * o;
                    }
                }
                if self.rg(*b) {
                    let other = self.value(*a).data();
                    let gb = acc(grads, *b, g.len());
                    for ((x, gi), o) in gb.iter_mut().zip(g).zip(other) {
                        *x += gi * o;
                    }
                }
            }
            Op::Affine(a, scale) => {
                let ga = acc(grads, *a, g.len());
                ga.iter_mut().zip(g).for_each(|(x, gi)| *x += scale * gi);
            }
            Op::Act(a, act) => {
                let y = node.value.data();
                let ga = acc(grads, *a, g.len());
                for ((x, gi), yi) in ga.iter_mut().zip(g).zip(y) {
                    *x += gi * act.derivative_from_output(*yi);
                }
            }
            Op::Clamp(a, lo, hi) => {
                let input = self.value(*a).data();
                let ga = acc(grads, *a, g.len());
                for ((x, gi), xi) in ga.iter_mut().zip(g).zip(input) {
                    if *xi > *lo && *xi < *hi {
                        *x += gi;
                    }
                }
            }
            Op::Ln(a) => {
                let input = self.value(*a).data();
                let ga = acc(grads, *a, g.len());
                for ((x, gi), xi) in ga.iter_mut().zip(g).zip(input) {
                    *x += gi / xi;
                }
            }
            Op::Sum(a) => {
                let len = self.value(*a).len();
                let ga = acc(grads, *a, len);
                ga.iter_mut().for_each(|x| *x += g[0]);
            }
            Op::GatherRows(src, indices) => {
                let t = self.value(*src);
                let c = t.cols();
                let gs = acc(grads, *src, t.len());
                for (r, &idx) in indices.iter().enumerate() {
                    let dst = &mut gs[idx * c..(idx + 1) * c];
                    dst.iter_mut().zip(&g[r * c..(r + 1) * c]).for_each(|(x, y)| *x += y);
                }
            }
            Op::GatherMatVec(mats, indices, vecs) => {
                let m = self.value(*mats);
                let d = m.shape()[1];
                let v = self.value(*vecs);
                if self.rg(*mats) {
                    let gm = acc(grads, *mats, m.len());
                    for (b, &idx) in indices.iter().enumerate() {
                        let x = v.row(b);
                        let gb = &g[b * d..(b + 1) * d];
                        let block = &mut gm[idx * d * d..(idx + 1) * d * d];
                        for i in 0..d {
                            for j in 0..d {
                                block[i * d + j] += gb[i] * x[j];
                            }
                        }
                    }
                }
                if self.rg(*vecs) {
                    let md = m.data().to_vec();
                    let gv = acc(grads, *vecs, v.len());
                    for (b, &idx) in indices.iter().enumerate() {
                        let a = &md[idx * d * d..(idx + 1) * d * d];
                        for i in 0..d {
                            for j in 0..d {
                                gv[b * d + j] += a[i * d + j] * g[b * d + i];
                            }
                        }
                    }
                }
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                let rows = self.value(*a).rows();
                if self.rg(*a) {
                    let ga = acc(grads, *a, rows * ca);
                    for r in 0..rows {
                        let src = &g[r * (ca + cb)..r * (ca + cb) + ca];
                        ga[r * ca..(r + 1) * ca].iter_mut().zip(src).for_each(|(x, y)| *x += y);
                    }
                }
                if self.rg(*b) {
                    let gb = acc(grads, *b, rows * cb);
                    for r in 0..rows {
                        let src = &g[r * (ca + cb) + ca..(r + 1) * (ca + cb)];
                        gb[r * cb..(r + 1) * cb].iter_mut().zip(src).for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::SoftmaxXent(logits, labels, probs) => {
                let c = self.value(*logits).cols();
                let gl = acc(grads, *logits, probs.len());
                for (r, &y) in labels.iter().enumerate() {
                    for j in 0..c {
                        let target = if j == y { 1.0 } else { 0.0 };
                        gl[r * c + j] += g[0] * (probs[r * c + j] - target);
                    }
                }
            }
        }
    }

    /// Adds the gradients of every trainable leaf that came from `store`
    /// into that store's gradient buffers.
    pub fn accumulate_into(&self, store: &mut ParamStore) -> Result<()> {
        if !self.consumed {
            return Err(Error::Usage("no backward pass has been run".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some((label, name)) = &node.source {
                if label == store.label() {
                    if let Some(g) = &self.grads[i] {
                        store.get_mut(name)?.accumulate_grad(g)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(x, y)| *x += y);
}

/// Writes the softmax of `logits` into `out` and returns the log-sum-exp.
pub(crate) fn log_softmax_into(logits: &[f64], out: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(logits) {
        *o = (x - max).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    max + total.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    /// Central differences of `f` with respect to every entry of `x0`.
    fn numeric_grad(x0: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let h = 1e-6;
        (0..x0.len())
            .map(|i| {
                let mut p = x0.to_vec();
                let mut m = x0.to_vec();
                p[i] += h;
                m[i] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn second_backward_is_a_usage_error() {
        let mut store = ParamStore::new("p");
        store.insert("w", t(&[1], &[2.0])).unwrap();
        let mut tape = Tape::new();
        let w = tape.param(&store, "w").unwrap();
        let s = tape.sum(w);
        tape.backward(s).unwrap();
        assert!(matches!(tape.backward(s), Err(Error::Usage(_))));
    }

    #[test]
    fn matmul_and_bias_gradients() {
        let x = [0.5, -1.0, 2.0, 0.25, 1.5, -0.75];
        let w = [0.3, -0.2, 0.8, 0.1, -0.5, 0.4];
        let f = |xv: &[f64], wv: &[f64]| {
            let mut tape = Tape::new();
            let a = tape.constant(t(&[2, 3], xv));
            let b = tape.constant(t(&[3, 2], wv));
            let y = tape.matmul(a, b).unwrap();
            let y = tape.activation(y, Activation::Tanh);
            let s = tape.sum(y);
            tape.value(s).data()[0]
        };
        let mut store = ParamStore::new("p");
        store.insert("x", t(&[2, 3], &x)).unwrap();
        store.insert("w", t(&[3, 2], &w)).unwrap();
        let mut tape = Tape::new();
        let a = tape.param(&store, "x").unwrap();
        let b = tape.param(&store, "w").unwrap();
        let y = tape.matmul(a, b).unwrap();
        let y = tape.activation(y, Activation::Tanh);
        let s = tape.sum(y);
        tape.backward(s).unwrap();
        let gx = numeric_grad(&x, |xv| f(xv, &w));
        let gw = numeric_grad(&w, |wv| f(&x, wv));
        for (a, n) in tape.grad(a).unwrap().iter().zip(&gx) {
            assert!((a - n).abs() < 1e-8);
        }
        for (a, n) in tape.grad(b).unwrap().iter().zip(&gw) {
            assert!((a - n).abs() < 1e-8);
        }
    }

    #[test]
    fn gather_matvec_gradients() {
        let mats = [1.0, 0.5, -0.3, 2.0, 0.2, 0.0, 0.7, -1.1];
        let eps = [0.4, -0.6, 1.2, 0.9, -0.2, 0.3];
        let idx = [1usize, 0, 1];
        let eval = |m: &[f64]| {
            let mut tape = Tape::new();
            let a = tape.constant(t(&[2, 2, 2], m));
            let e = tape.constant(t(&[3, 2], &eps));
            let z = tape.gather_matvec(a, &idx, e).unwrap();
            let z2 = tape.mul(z, z).unwrap();
            let s = tape.sum(z2);
            tape.value(s).data()[0]
        };
        let mut store = ParamStore::new("p");
        store.insert("a", t(&[2, 2, 2], &mats)).unwrap();
        let mut tape = Tape::new();
        let a = tape.param(&store, "a").unwrap();
        let e = tape.constant(t(&[3, 2], &eps));
        let z = tape.gather_matvec(a, &idx, e).unwrap();
        let z2 = tape.mul(z, z).unwrap();
        let s = tape.sum(z2);
        tape.backward(s).unwrap();
        let num = numeric_grad(&mats, eval);
        for (x, y) in tape.grad(a).unwrap().iter().zip(&num) {
            assert!((x - y).abs() < 1e-7, "{x} vs {y}");
        }
    }

    #[test]
    fn softmax_cross_entropy_gradient() {
        let logits = [0.2, -1.0, 0.5, 1.5, 0.0, -0.3];
        let labels = [2usize, 0];
        let eval = |l: &[f64]| {
            let mut tape = Tape::new();
            let v = tape.constant(t(&[2, 3], l));
            let s = tape.softmax_cross_entropy(v, &labels).unwrap();
            tape.value(s).data()[0]
        };
        let mut store = ParamStore::new("p");
        store.insert("l", t(&[2, 3], &logits)).unwrap();
        let mut tape = Tape::new();
        let v = tape.param(&store, "l").unwrap();
        let s = tape.softmax_cross_entropy(v, &labels).unwrap();
        tape.backward(s).unwrap();
        let num = numeric_grad(&logits, eval);
        for (x, y) in tape.grad(v).unwrap().iter().zip(&num) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn clamp_blocks_gradient_outside_range() {
        let mut store = ParamStore::new("p");
        store.insert("x", t(&[3], &[-1.0, 0.5, 2.0])).unwrap();
        let mut tape = Tape::new();
        let x = tape.param(&store, "x").unwrap();
        let c = tape.clamp(x, 0.0, 1.0);
        let s = tape.sum(c);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn gradients_route_to_owning_store_only() {
        let mut g = ParamStore::new("g");
        g.insert("w", t(&[1], &[3.0])).unwrap();
        let mut d = ParamStore::new("d");
        d.insert("w", t(&[1], &[5.0])).unwrap();
        let mut tape = Tape::new();
        let a = tape.param(&g, "w").unwrap();
        let b = tape.frozen(&d, "w").unwrap();
        let p = tape.mul(a, b).unwrap();
        let s = tape.sum(p);
        tape.backward(s).unwrap();
        tape.accumulate_into(&mut g).unwrap();
        tape.accumulate_into(&mut d).unwrap();
        assert_eq!(g.get("w").unwrap().grad().unwrap(), &[5.0]);
        assert!(d.get("w").unwrap().grad().is_none());
    }
}

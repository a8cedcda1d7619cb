//! Wengert tape: append-only op recording during the forward pass, replayed
//! in reverse for exact chain-rule gradients.
//!
//! Every op appends a node holding its forward value, so values of untracked
//! subgraphs still flow; backward only visits nodes reachable from tracked
//! leaves. Node ids referenced as inputs always precede the referencing node,
//! so a single reverse sweep touches each node exactly once.

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Matmul(Var, Var),
    Conv2d { input: Var, kernel: Var },
    Relu(Var),
    MaxPool { input: Var, argmax: Vec<usize> },
    Flatten(Var),
    AffineBias { input: Var, bias: Var },
    Scale { input: Var, factor: T },
    LogSoftmax { input: Var, tau: T },
    Mean(Var),
    Sum(Var),
    Exp(Var),
    RowSum(Var),
    RowMax { input: Var, argmax: Vec<usize> },
}

#[derive(Debug)]
struct Node<T> {
    op: Op<T>,
    value: Tensor<T>,
    needs_grad: bool,
}

/// Recorded computation for one forward pass.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Per-node gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    slots: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the backward output with respect to `v`, if `v` was
    /// tracked and reachable.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.slots.get(v.id()).and_then(Option::as_ref)
    }

    /// Like [`Gradients::wrt`] but materializes zeros for tracked leaves the
    /// output did not depend on.
    pub fn wrt_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor<T> {
        match self.wrt(v) {
            Some(g) => g.clone(),
            None => Tensor::zeros(shape.to_vec()),
        }
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Forward value of a node.
    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.id()].value
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.id()].needs_grad
    }

    /// Bind a tensor as a leaf; it participates in gradients iff its
    /// `requires_grad` flag is set.
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        let needs = t.requires_grad();
        self.push(Op::Leaf, t, needs)
    }

    /// Bind a tensor as a constant leaf regardless of its grad flag.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(Op::Leaf, t.detached(), false)
    }

    /// Constant copy of an existing node's value: the stop-gradient primitive.
    pub fn detach(&mut self, v: Var) -> Var {
        let val = self.nodes[v.id()].value.clone().detached();
        self.push(Op::Leaf, val, false)
    }

    // ── elementwise binary ───────────────────────────────────────────

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::ShapeMismatch {
                op,
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = zip_with(self.value(a), self.value(b), |x, y| x + y);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Add(a, b), data, needs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let data = zip_with(self.value(a), self.value(b), |x, y| x - y);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Sub(a, b), data, needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let data = zip_with(self.value(a), self.value(b), |x, y| x * y);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Mul(a, b), data, needs))
    }

    // ── linear algebra ───────────────────────────────────────────────

    /// `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for p in 0..k {
                let x = av[i * k + p];
                for j in 0..n {
                    out[i * n + j] += x * bv[p * n + j];
                }
            }
        }
        let needs = self.needs(a) || self.needs(b);
        let value = Tensor::from_vec(vec![m, n], out)?;
        Ok(self.push(Op::Matmul(a, b), value, needs))
    }

    /// 3x3 convolution, stride 1, zero padding 1.
    /// Input `[b, c_in, h, w]`, kernel `[c_out, c_in, 3, 3]` -> `[b, c_out, h, w]`.
    pub fn conv2d(&mut self, input: Var, kernel: Var) -> Result<Var> {
        let (si, sk) = (self.value(input).shape(), self.value(kernel).shape());
        if si.len() != 4 || sk.len() != 4 || sk[2] != 3 || sk[3] != 3 || si[1] != sk[1] {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                lhs: si.to_vec(),
                rhs: sk.to_vec(),
            });
        }
        let (b, ci, h, w) = (si[0], si[1], si[2], si[3]);
        let co = sk[0];
        let (xv, kv) = (self.value(input).data(), self.value(kernel).data());
        let mut out = vec![T::zero(); b * co * h * w];
        for bi in 0..b {
            for o in 0..co {
                for c in 0..ci {
                    let kbase = ((o * ci) + c) * 9;
                    let xbase = ((bi * ci) + c) * h * w;
                    let obase = ((bi * co) + o) * h * w;
                    for i in 0..h {
                        for j in 0..w {
                            let mut acc = T::zero();
                            for u in 0..3usize {
                                let ii = i as isize + u as isize - 1;
                                if ii < 0 || ii >= h as isize {
                                    continue;
                                }
                                for v in 0..3usize {
                                    let jj = j as isize + v as isize - 1;
                                    if jj < 0 || jj >= w as isize {
                                        continue;
                                    }
                                    acc += xv[xbase + ii as usize * w + jj as usize]
                                        * kv[kbase + u * 3 + v];
                                }
                            }
                            out[obase + i * w + j] += acc;
                        }
                    }
                }
            }
        }
        let needs = self.needs(input) || self.needs(kernel);
        let value = Tensor::from_vec(vec![b, co, h, w], out)?;
        Ok(self.push(Op::Conv2d { input, kernel }, value, needs))
    }

    // ── activations / pooling / shape ────────────────────────────────

    pub fn relu(&mut self, input: Var) -> Result<Var> {
        let value = self.value(input).map(|v| if v > T::zero() { v } else { T::zero() });
        let needs = self.needs(input);
        Ok(self.push(Op::Relu(input), value, needs))
    }

    /// 2x2 max pooling over `[b, c, h, w]`; `h` and `w` must be even.
    /// Ties resolve to the first (row-major lowest) index.
    pub fn max_pool(&mut self, input: Var) -> Result<Var> {
        let s = self.value(input).shape().to_vec();
        if s.len() != 4 || s[2] % 2 != 0 || s[3] % 2 != 0 || s[2] == 0 || s[3] == 0 {
            return Err(Error::BadShape {
                op: "max-pool",
                shape: s,
                reason: "expects [b,c,h,w] with even h and w".into(),
            });
        }
        let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
        let (oh, ow) = (h / 2, w / 2);
        let xv = self.value(input).data();
        let mut out = vec![T::zero(); b * c * oh * ow];
        let mut argmax = vec![0usize; out.len()];
        for bc in 0..b * c {
            let ibase = bc * h * w;
            let obase = bc * oh * ow;
            for i in 0..oh {
                for j in 0..ow {
                    let mut best_idx = ibase + (2 * i) * w + 2 * j;
                    let mut best = xv[best_idx];
                    for (du, dv) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = ibase + (2 * i + du) * w + 2 * j + dv;
                        if xv[idx] > best {
                            best = xv[idx];
                            best_idx = idx;
                        }
                    }
                    out[obase + i * ow + j] = best;
                    argmax[obase + i * ow + j] = best_idx;
                }
            }
        }
        let needs = self.needs(input);
        let value = Tensor::from_vec(vec![b, c, oh, ow], out)?;
        Ok(self.push(Op::MaxPool { input, argmax }, value, needs))
    }

    /// `[b, rest..] -> [b, prod(rest)]`.
    pub fn flatten(&mut self, input: Var) -> Result<Var> {
        let s = self.value(input).shape().to_vec();
        if s.is_empty() {
            return Err(Error::BadShape {
                op: "flatten",
                shape: s,
                reason: "expects a batch dimension".into(),
            });
        }
        let b = s[0];
        let rest: usize = s[1..].iter().product();
        let value = self.value(input).reshaped(vec![b, rest])?.detached();
        let needs = self.needs(input);
        Ok(self.push(Op::Flatten(input), value, needs))
    }

    /// Broadcast bias add: `[b,f] + [f]`, or `[b,c,h,w] + [c]` per channel.
    pub fn affine_bias(&mut self, input: Var, bias: Var) -> Result<Var> {
        let (si, sb) = (
            self.value(input).shape().to_vec(),
            self.value(bias).shape().to_vec(),
        );
        let ok = sb.len() == 1
            && ((si.len() == 2 && si[1] == sb[0]) || (si.len() == 4 && si[1] == sb[0]));
        if !ok {
            return Err(Error::ShapeMismatch {
                op: "affine-bias",
                lhs: si,
                rhs: sb,
            });
        }
        let xv = self.value(input).data();
        let bv = self.value(bias).data();
        let mut out = Vec::with_capacity(xv.len());
        if si.len() == 2 {
            let f = si[1];
            for (i, &x) in xv.iter().enumerate() {
                out.push(x + bv[i % f]);
            }
        } else {
            let (c, hw) = (si[1], si[2] * si[3]);
            for (i, &x) in xv.iter().enumerate() {
                out.push(x + bv[(i / hw) % c]);
            }
        }
        let needs = self.needs(input) || self.needs(bias);
        let value = Tensor::from_vec(si, out)?;
        Ok(self.push(Op::AffineBias { input, bias }, value, needs))
    }

    pub fn scale(&mut self, input: Var, factor: T) -> Result<Var> {
        let value = self.value(input).map(|v| v * factor);
        let needs = self.needs(input);
        Ok(self.push(Op::Scale { input, factor }, value, needs))
    }

    /// Rowwise log-softmax of `[b,k]` logits divided by temperature `tau`,
    /// computed with max subtraction.
    pub fn log_softmax(&mut self, input: Var, tau: T) -> Result<Var> {
        if !(tau > T::zero()) {
            return Err(Error::BadTemperature(tau.as_f64()));
        }
        let s = self.value(input).shape().to_vec();
        if s.len() != 2 || s[1] == 0 {
            return Err(Error::BadShape {
                op: "log-softmax",
                shape: s,
                reason: "expects [b,k] with k > 0".into(),
            });
        }
        let (b, k) = (s[0], s[1]);
        let xv = self.value(input).data();
        let mut out = vec![T::zero(); b * k];
        for i in 0..b {
            let row = &xv[i * k..(i + 1) * k];
            let mut m = row[0] / tau;
            for &v in row {
                if v / tau > m {
                    m = v / tau;
                }
            }
            let mut lse = T::zero();
            for &v in row {
                lse += (v / tau - m).exp();
            }
            let lse = lse.ln() + m;
            for j in 0..k {
                out[i * k + j] = row[j] / tau - lse;
            }
        }
        let needs = self.needs(input);
        let value = Tensor::from_vec(vec![b, k], out)?;
        Ok(self.push(Op::LogSoftmax { input, tau }, value, needs))
    }

    // ── reductions / unary ───────────────────────────────────────────

    pub fn mean(&mut self, input: Var) -> Result<Var> {
        let n = self.value(input).numel();
        if n == 0 {
            return Err(Error::BadShape {
                op: "mean",
                shape: self.value(input).shape().to_vec(),
                reason: "empty tensor".into(),
            });
        }
        let total = self
            .value(input)
            .data()
            .iter()
            .fold(T::zero(), |acc, &v| acc + v);
        let value = Tensor::scalar(total / T::from_f64(n as f64));
        let needs = self.needs(input);
        Ok(self.push(Op::Mean(input), value, needs))
    }

    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let total = self
            .value(input)
            .data()
            .iter()
            .fold(T::zero(), |acc, &v| acc + v);
        let value = Tensor::scalar(total);
        let needs = self.needs(input);
        Ok(self.push(Op::Sum(input), value, needs))
    }

    pub fn exp(&mut self, input: Var) -> Result<Var> {
        let value = self.value(input).map(|v| v.exp());
        let needs = self.needs(input);
        Ok(self.push(Op::Exp(input), value, needs))
    }

    /// `[b,k] -> [b]`, summing each row.
    pub fn row_sum(&mut self, input: Var) -> Result<Var> {
        let s = self.value(input).shape().to_vec();
        if s.len() != 2 {
            return Err(Error::BadShape {
                op: "row-sum",
                shape: s,
                reason: "expects [b,k]".into(),
            });
        }
        let (b, k) = (s[0], s[1]);
        let xv = self.value(input).data();
        let mut out = vec![T::zero(); b];
        for i in 0..b {
            for j in 0..k {
                out[i] += xv[i * k + j];
            }
        }
        let needs = self.needs(input);
        let value = Tensor::from_vec(vec![b], out)?;
        Ok(self.push(Op::RowSum(input), value, needs))
    }

    /// `[b,k] -> [b]`, max of each row; ties resolve to the lowest index.
    pub fn row_max(&mut self, input: Var) -> Result<Var> {
        let s = self.value(input).shape().to_vec();
        if s.len() != 2 || s[1] == 0 {
            return Err(Error::BadShape {
                op: "row-max",
                shape: s,
                reason: "expects [b,k] with k > 0".into(),
            });
        }
        let (b, k) = (s[0], s[1]);
        let xv = self.value(input).data();
        let mut out = vec![T::zero(); b];
        let mut argmax = vec![0usize; b];
        for i in 0..b {
            let mut best = xv[i * k];
            let mut arg = 0usize;
            for j in 1..k {
                if xv[i * k + j] > best {
                    best = xv[i * k + j];
                    arg = j;
                }
            }
            out[i] = best;
            argmax[i] = i * k + arg;
        }
        let needs = self.needs(input);
        let value = Tensor::from_vec(vec![b], out)?;
        Ok(self.push(Op::RowMax { input, argmax }, value, needs))
    }

    // ── backward ─────────────────────────────────────────────────────

    /// Reverse sweep from scalar `output` with seed 1.
    pub fn backward(&self, output: Var) -> Result<Gradients<T>> {
        self.backward_seeded(output, T::one())
    }

    pub fn backward_seeded(&self, output: Var, seed: T) -> Result<Gradients<T>> {
        let out_val = self.value(output);
        if out_val.numel() != 1 {
            return Err(Error::NonScalarOutput(out_val.shape().to_vec()));
        }
        let mut slots: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        slots[output.id()] = Some(vec![seed]);

        for id in (0..=output.id()).rev() {
            if !self.nodes[id].needs_grad {
                continue;
            }
            let g = match slots[id].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(id, &g, &mut slots);
            slots[id] = Some(g);
        }

        let grads = slots
            .iter()
            .enumerate()
            .map(|(id, s)| {
                s.as_ref().and_then(|g| {
                    if self.nodes[id].needs_grad {
                        Some(
                            Tensor::from_vec(self.nodes[id].value.shape().to_vec(), g.clone())
                                .expect("gradient shape mirrors node value"),
                        )
                    } else {
                        None
                    }
                })
            })
            .collect();
        Ok(Gradients { slots: grads })
    }

    fn accum(&self, slots: &mut [Option<Vec<T>>], v: Var, add: impl Fn(&mut [T])) {
        if !self.needs(v) {
            return;
        }
        let slot = &mut slots[v.id()];
        if slot.is_none() {
            *slot = Some(vec![T::zero(); self.value(v).numel()]);
        }
        add(slot.as_mut().expect("just initialized"));
    }

    fn propagate(&self, id: usize, g: &[T], slots: &mut [Option<Vec<T>>]) {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accum(slots, *a, |ga| {
                    for (o, &gi) in ga.iter_mut().zip(g) {
                        *o += gi;
                    }
                });
                self.accum(slots, *b, |gb| {
                    for (o, &gi) in gb.iter_mut().zip(g) {
                        *o += gi;
                    }
                });
            }
            Op::Sub(a, b) => {
                self.accum(slots, *a, |ga| {
                    for (o, &gi) in ga.iter_mut().zip(g) {
                        *o += gi;
                    }
                });
                self.accum(slots, *b, |gb| {
                    for (o, &gi) in gb.iter_mut().zip(g) {
                        *o -= gi;
                    }
                });
            }
            Op::Mul(a, b) => {
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                self.accum(slots, *a, |ga| {
                    for i in 0..g.len() {
                        ga[i] += g[i] * bv[i];
                    }
                });
                self.accum(slots, *b, |gb| {
                    for i in 0..g.len() {
                        gb[i] += g[i] * av[i];
                    }
                });
            }
            Op::Matmul(a, b) => {
                let sa = self.value(*a).shape();
                let (m, k) = (sa[0], sa[1]);
                let n = self.value(*b).shape()[1];
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                // dA = g . B^T
                self.accum(slots, *a, |ga| {
                    for i in 0..m {
                        for p in 0..k {
                            let mut acc = T::zero();
                            for j in 0..n {
                                acc += g[i * n + j] * bv[p * n + j];
                            }
                            ga[i * k + p] += acc;
                        }
                    }
                });
                // dB = A^T . g
                self.accum(slots, *b, |gb| {
                    for p in 0..k {
                        for j in 0..n {
                            let mut acc = T::zero();
                            for i in 0..m {
                                acc += av[i * k + p] * g[i * n + j];
                            }
                            gb[p * n + j] += acc;
                        }
                    }
                });
            }
            Op::Conv2d { input, kernel } => {
                let si = self.value(*input).shape();
                let (b, ci, h, w) = (si[0], si[1], si[2], si[3]);
                let co = self.value(*kernel).shape()[0];
                let xv = self.value(*input).data();
                let kv = self.value(*kernel).data();
                self.accum(slots, *input, |gx| {
                    for bi in 0..b {
                        for o in 0..co {
                            let obase = ((bi * co) + o) * h * w;
                            for c in 0..ci {
                                let kbase = ((o * ci) + c) * 9;
                                let xbase = ((bi * ci) + c) * h * w;
                                for i in 0..h {
                                    for j in 0..w {
                                        let go = g[obase + i * w + j];
                                        for u in 0..3usize {
                                            let ii = i as isize + u as isize - 1;
                                            if ii < 0 || ii >= h as isize {
                                                continue;
                                            }
                                            for v in 0..3usize {
                                                let jj = j as isize + v as isize - 1;
                                                if jj < 0 || jj >= w as isize {
                                                    continue;
                                                }
                                                gx[xbase + ii as usize * w + jj as usize] +=
                                                    go * kv[kbase + u * 3 + v];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                });
                self.accum(slots, *kernel, |gk| {
                    for bi in 0..b {
                        for o in 0..co {
                            let obase = ((bi * co) + o) * h * w;
                            for c in 0..ci {
                                let kbase = ((o * ci) + c) * 9;
                                let xbase = ((bi * ci) + c) * h * w;
                                for i in 0..h {
                                    for j in 0..w {
                                        let go = g[obase + i * w + j];
                                        for u in 0..3usize {
                                            let ii = i as isize + u as isize - 1;
                                            if ii < 0 || ii >= h as isize {
                                                continue;
                                            }
                                            for v in 0..3usize {
                                                let jj = j as isize + v as isize - 1;
                                                if jj < 0 || jj >= w as isize {
                                                    continue;
                                                }
                                                gk[kbase + u * 3 + v] += go
                                                    * xv[xbase + ii as usize * w + jj as usize];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                });
            }
            Op::Relu(input) => {
                let xv = self.value(*input).data();
                self.accum(slots, *input, |gx| {
                    for i in 0..g.len() {
                        if xv[i] > T::zero() {
                            gx[i] += g[i];
                        }
                    }
                });
            }
            Op::MaxPool { input, argmax } => {
                self.accum(slots, *input, |gx| {
                    for (o, &src) in argmax.iter().enumerate() {
                        gx[src] += g[o];
                    }
                });
            }
            Op::Flatten(input) => {
                self.accum(slots, *input, |gx| {
                    for i in 0..g.len() {
                        gx[i] += g[i];
                    }
                });
            }
            Op::AffineBias { input, bias } => {
                let si = self.value(*input).shape().to_vec();
                let f = self.value(*bias).numel();
                self.accum(slots, *input, |gx| {
                    for i in 0..g.len() {
                        gx[i] += g[i];
                    }
                });
                self.accum(slots, *bias, |gb| {
                    if si.len() == 2 {
                        for (i, &gi) in g.iter().enumerate() {
                            gb[i % f] += gi;
                        }
                    } else {
                        let hw = si[2] * si[3];
                        for (i, &gi) in g.iter().enumerate() {
                            gb[(i / hw) % f] += gi;
                        }
                    }
                });
            }
            Op::Scale { input, factor } => {
                let factor = *factor;
                self.accum(slots, *input, |gx| {
                    for i in 0..g.len() {
                        gx[i] += g[i] * factor;
                    }
                });
            }
            Op::LogSoftmax { input, tau } => {
                let y = self.nodes[id].value.data();
                let k = self.nodes[id].value.shape()[1];
                let b = self.nodes[id].value.shape()[0];
                let tau = *tau;
                self.accum(slots, *input, |gx| {
                    for i in 0..b {
                        let mut row_sum = T::zero();
                        for j in 0..k {
                            row_sum += g[i * k + j];
                        }
                        for j in 0..k {
                            let p = y[i * k + j].exp();
                            gx[i * k + j] += (g[i * k + j] - p * row_sum) / tau;
                        }
                    }
                });
            }
            Op::Mean(input) => {
                let n = self.value(*input).numel();
                let gi = g[0] / T::from_f64(n as f64);
                self.accum(slots, *input, |gx| {
                    for o in gx.iter_mut() {
                        *o += gi;
                    }
                });
            }
            Op::Sum(input) => {
                let gi = g[0];
                self.accum(slots, *input, |gx| {
                    for o in gx.iter_mut() {
                        *o += gi;
                    }
                });
            }
            Op::Exp(input) => {
                let y = self.nodes[id].value.data();
                self.accum(slots, *input, |gx| {
                    for i in 0..g.len() {
                        gx[i] += g[i] * y[i];
                    }
                });
            }
            Op::RowSum(input) => {
                let k = self.value(*input).shape()[1];
                self.accum(slots, *input, |gx| {
                    for (i, x) in gx.iter_mut().enumerate() {
                        *x += g[i / k];
                    }
                });
            }
            Op::RowMax { input, argmax } => {
                self.accum(slots, *input, |gx| {
                    for (row, &src) in argmax.iter().enumerate() {
                        gx[src] += g[row];
                    }
                });
            }
        }
    }
}

fn zip_with<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::from_vec(a.shape().to_vec(), data).expect("shapes already checked")
}

//! Tape-based reverse-mode differentiation over dense tensors.
//!
//! A [`Tape`] records every operation of a forward pass as a node holding its
//! output values. [`Tape::backward`] walks the nodes in reverse order and
//! returns [`Gradients`] for every node reachable from a scalar loss. The
//! operator set is exactly what the forecasting networks use: affine maps,
//! the three gate nonlinearities, column slicing and concatenation, sequence
//! step selection, valid 1-D convolution, pairwise max pooling and the
//! squared-error loss.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node recorded on a particular tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

impl Var {
    pub fn index(self) -> usize {
        self.index
    }
}

/// Pointwise nonlinearity applied after an affine map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
    Tanh,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Concat(Vec<Var>),
    SliceCols { src: Var, start: usize },
    TimeStep { src: Var, step: usize },
    StackChannels(Vec<Var>),
    Conv1d { input: Var, filters: Var, bias: Var },
    MaxPool { input: Var, argmax: Vec<usize> },
    Reshape(Var),
    Mse(Var, Var),
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
}

/// Recording of one forward pass.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn node(&self, v: Var) -> Result<&Node> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(Error::State(format!(
                "variable {} was not recorded on this tape",
                v.index
            )));
        }
        Ok(&self.nodes[v.index])
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node { shape, value, op });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    /// Values of a recorded node.
    ///
    /// Panics if `v` belongs to a different tape.
    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).expect("foreign variable").value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).expect("foreign variable").shape
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let n = self.node(v).expect("foreign variable");
        Tensor::new(n.shape.clone(), n.value.clone()).expect("node shape")
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.values().to_vec(), Op::Leaf)
    }

    /// `[m×k] · [k×n] → [m×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, nb) = (self.node(a)?, self.node(b)?);
        if na.shape.len() != 2 || nb.shape.len() != 2 || na.shape[1] != nb.shape[0] {
            return Err(Error::dim("matmul", &na.shape, &nb.shape));
        }
        let (m, k, n) = (na.shape[0], na.shape[1], nb.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let x = na.value[i * k + p];
                if x == 0.0 {
                    continue;
                }
                let brow = &nb.value[p * n..(p + 1) * n];
                for (o, w) in row.iter_mut().zip(brow) {
                    *o += x * w;
                }
            }
        }
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b)))
    }

    /// Adds a bias vector along the last axis.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (nx, nb) = (self.node(x)?, self.node(bias)?);
        let width = *nx.shape.last().unwrap_or(&0);
        if nb.value.len() != width || width == 0 {
            return Err(Error::dim("add_bias", &nx.shape, &nb.shape));
        }
        let mut out = nx.value.clone();
        for row in out.chunks_mut(width) {
            for (o, b) in row.iter_mut().zip(&nb.value) {
                *o += b;
            }
        }
        let shape = nx.shape.clone();
        Ok(self.push(shape, out, Op::AddBias(x, bias)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, nb) = (self.node(a)?, self.node(b)?);
        if na.shape != nb.shape {
            return Err(Error::dim("add", &na.shape, &nb.shape));
        }
        let out = na.value.iter().zip(&nb.value).map(|(x, y)| x + y).collect();
        let shape = na.shape.clone();
        Ok(self.push(shape, out, Op::Add(a, b)))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, nb) = (self.node(a)?, self.node(b)?);
        if na.shape != nb.shape {
            return Err(Error::dim("mul", &na.shape, &nb.shape));
        }
        let out = na.value.iter().zip(&nb.value).map(|(x, y)| x * y).collect();
        let shape = na.shape.clone();
        Ok(self.push(shape, out, Op::Mul(a, b)))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let n = self.node(x)?;
        let out = n.value.iter().map(|&v| sigmoid(v)).collect();
        let shape = n.shape.clone();
        Ok(self.push(shape, out, Op::Sigmoid(x)))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let n = self.node(x)?;
        let out = n.value.iter().map(|v| v.tanh()).collect();
        let shape = n.shape.clone();
        Ok(self.push(shape, out, Op::Tanh(x)))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let n = self.node(x)?;
        let out = n.value.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let shape = n.shape.clone();
        Ok(self.push(shape, out, Op::Relu(x)))
    }

    pub fn activate(&mut self, x: Var, activation: Activation) -> Result<Var> {
        match activation {
            Activation::Linear => Ok(x),
            Activation::Relu => self.relu(x),
            Activation::Sigmoid => self.sigmoid(x),
            Activation::Tanh => self.tanh(x),
        }
    }

    /// Concatenates `[m×n_i]` matrices along columns.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Argument("concat of zero tensors".into()))?;
        let rows = self.node(*first)?.shape[0];
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let n = self.node(p)?;
            if n.shape.len() != 2 || n.shape[0] != rows {
                return Err(Error::dim("concat", &[rows], &n.shape));
            }
            widths.push(n.shape[1]);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.nodes[p.index].value[r * w..(r + 1) * w]);
            }
        }
        Ok(self.push(vec![rows, total], out, Op::Concat(parts.to_vec())))
    }

    /// Columns `start..start + len` of a `[m×n]` matrix.
    pub fn slice_cols(&mut self, src: Var, start: usize, len: usize) -> Result<Var> {
        let n = self.node(src)?;
        if n.shape.len() != 2 || start + len > n.shape[1] || len == 0 {
            return Err(Error::dim("slice_cols", &n.shape, &[start, len]));
        }
        let (rows, width) = (n.shape[0], n.shape[1]);
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&n.value[r * width + start..r * width + start + len]);
        }
        Ok(self.push(vec![rows, len], out, Op::SliceCols { src, start }))
    }

    /// Row `step` of every sequence in a `[batch×steps×features]` tensor.
    pub fn time_step(&mut self, src: Var, step: usize) -> Result<Var> {
        let n = self.node(src)?;
        if n.shape.len() != 3 || step >= n.shape[1] {
            return Err(Error::dim("time_step", &n.shape, &[step]));
        }
        let (b, w, f) = (n.shape[0], n.shape[1], n.shape[2]);
        let mut out = Vec::with_capacity(b * f);
        for i in 0..b {
            let at = (i * w + step) * f;
            out.extend_from_slice(&n.value[at..at + f]);
        }
        Ok(self.push(vec![b, f], out, Op::TimeStep { src, step }))
    }

    /// Stacks `V` matrices `[batch×N]` into a `[batch×N×V]` channel map.
    pub fn stack_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Argument("feature map needs at least one station".into()))?;
        let shape = self.node(*first)?.shape.clone();
        if shape.len() != 2 {
            return Err(Error::dim("stack_channels", &shape, &[2]));
        }
        for &p in parts {
            let s = &self.node(p)?.shape;
            if *s != shape {
                return Err(Error::dim("stack_channels", &shape, s));
            }
        }
        let (b, len, v) = (shape[0], shape[1], parts.len());
        let mut out = vec![0.0; b * len * v];
        for (c, &p) in parts.iter().enumerate() {
            let src = &self.nodes[p.index].value;
            for i in 0..b * len {
                out[i * v + c] = src[i];
            }
        }
        Ok(self.push(vec![b, len, v], out, Op::StackChannels(parts.to_vec())))
    }

    /// Valid 1-D convolution: `[B×L×C] ⊛ [k×C×F] + [F] → [B×(L−k+1)×F]`.
    pub fn conv1d(&mut self, input: Var, filters: Var, bias: Var) -> Result<Var> {
        let (ni, nf, nb) = (self.node(input)?, self.node(filters)?, self.node(bias)?);
        if ni.shape.len() != 3 || nf.shape.len() != 3 || ni.shape[2] != nf.shape[1] {
            return Err(Error::dim("conv1d", &ni.shape, &nf.shape));
        }
        let (b, l, c) = (ni.shape[0], ni.shape[1], ni.shape[2]);
        let (k, f) = (nf.shape[0], nf.shape[2]);
        if nb.value.len() != f {
            return Err(Error::dim("conv1d bias", &nf.shape, &nb.shape));
        }
        if k == 0 || l < k {
            return Err(Error::Argument(format!(
                "conv1d needs input length {l} >= kernel size {k}"
            )));
        }
        let p_out = l - k + 1;
        let mut out = vec![0.0; b * p_out * f];
        for bi in 0..b {
            for p in 0..p_out {
                let o = &mut out[(bi * p_out + p) * f..(bi * p_out + p + 1) * f];
                o.copy_from_slice(&nb.value);
                for j in 0..k {
                    let row = &ni.value[(bi * l + p + j) * c..(bi * l + p + j + 1) * c];
                    for (ci, &x) in row.iter().enumerate() {
                        let w = &nf.value[(j * c + ci) * f..(j * c + ci + 1) * f];
                        for (ov, wv) in o.iter_mut().zip(w) {
                            *ov += x * wv;
                        }
                    }
                }
            }
        }
        Ok(self.push(vec![b, p_out, f], out, Op::Conv1d { input, filters, bias }))
    }

    /// Non-overlapping max pooling of width 2 along the length axis of
    /// `[B×L×F]`; a trailing odd row is dropped.
    pub fn maxpool2(&mut self, input: Var) -> Result<Var> {
        let n = self.node(input)?;
        if n.shape.len() != 3 {
            return Err(Error::dim("maxpool1d", &n.shape, &[3]));
        }
        let (b, l, f) = (n.shape[0], n.shape[1], n.shape[2]);
        if l < 2 {
            return Err(Error::Argument(format!("maxpool1d needs length >= 2, got {l}")));
        }
        let half = l / 2;
        let mut out = Vec::with_capacity(b * half * f);
        let mut argmax = Vec::with_capacity(b * half * f);
        for bi in 0..b {
            for p in 0..half {
                for fi in 0..f {
                    let first = (bi * l + 2 * p) * f + fi;
                    let second = first + f;
                    let pick = if n.value[second] > n.value[first] {
                        second
                    } else {
                        first
                    };
                    out.push(n.value[pick]);
                    argmax.push(pick);
                }
            }
        }
        Ok(self.push(vec![b, half, f], out, Op::MaxPool { input, argmax }))
    }

    pub fn reshape(&mut self, src: Var, shape: Vec<usize>) -> Result<Var> {
        let n = self.node(src)?;
        if shape.iter().product::<usize>() != n.value.len() {
            return Err(Error::dim("reshape", &n.shape, &shape));
        }
        let value = n.value.clone();
        Ok(self.push(shape, value, Op::Reshape(src)))
    }

    /// Mean of squared element-wise differences, as a one-element node.
    pub fn mse(&mut self, truth: Var, pred: Var) -> Result<Var> {
        let (nt, np) = (self.node(truth)?, self.node(pred)?);
        if nt.shape != np.shape {
            return Err(Error::dim("mse", &nt.shape, &np.shape));
        }
        if nt.value.is_empty() {
            return Err(Error::Argument("mse of empty tensors".into()));
        }
        let sum: f64 = nt.value.iter().zip(&np.value).map(|(t, p)| (t - p) * (t - p)).sum();
        let loss = sum / nt.value.len() as f64;
        Ok(self.push(vec![1], vec![loss], Op::Mse(truth, pred)))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total = self.node(x)?.value.iter().sum();
        Ok(self.push(vec![1], vec![total], Op::Sum(x)))
    }

    /// `activation(x · W + b)`.
    pub fn dense(&mut self, x: Var, weights: Var, bias: Option<Var>, activation: Activation) -> Result<Var> {
        let mut y = self.matmul(x, weights)?;
        if let Some(b) = bias {
            y = self.add_bias(y, b)?;
        }
        self.activate(y, activation)
    }

    /// One LSTM step. Gate columns of the stacked kernels are ordered
    /// input, forget, candidate, output.
    pub fn lstm_cell(&mut self, x: Var, h_prev: Var, c_prev: Var, params: &LstmVars) -> Result<(Var, Var)> {
        let hidden = self.shape(params.bias).first().copied().unwrap_or(0) / 4;
        let hs = self.node(h_prev)?.shape.clone();
        let cs = self.node(c_prev)?.shape.clone();
        if hidden == 0 || hs.len() != 2 || hs[1] != hidden || cs != hs {
            return Err(Error::dim("lstm_cell", &hs, &[hidden]));
        }
        let zx = self.matmul(x, params.input_kernel)?;
        let zh = self.matmul(h_prev, params.recurrent_kernel)?;
        let z = self.add(zx, zh)?;
        let z = self.add_bias(z, params.bias)?;
        let i = self.slice_cols(z, 0, hidden)?;
        let i = self.sigmoid(i)?;
        let f = self.slice_cols(z, hidden, hidden)?;
        let f = self.sigmoid(f)?;
        let g = self.slice_cols(z, 2 * hidden, hidden)?;
        let g = self.tanh(g)?;
        let o = self.slice_cols(z, 3 * hidden, hidden)?;
        let o = self.sigmoid(o)?;
        let keep = self.mul(f, c_prev)?;
        let write = self.mul(i, g)?;
        let c = self.add(keep, write)?;
        let tc = self.tanh(c)?;
        let h = self.mul(o, tc)?;
        Ok((h, c))
    }

    /// Runs the cell over `[batch×steps×features]` from a zero state and
    /// returns the hidden state of the last step.
    pub fn lstm_forward(&mut self, sequence: Var, params: &LstmVars) -> Result<Var> {
        let shape = self.node(sequence)?.shape.clone();
        if shape.len() != 3 {
            return Err(Error::dim("lstm_forward", &shape, &[3]));
        }
        if shape[1] == 0 {
            return Err(Error::Argument("lstm_forward on an empty sequence".into()));
        }
        let hidden = self.shape(params.bias)[0] / 4;
        let zero = Tensor::zeros(&[shape[0], hidden]);
        let mut h = self.leaf(&zero);
        let mut c = self.leaf(&zero);
        for step in 0..shape[1] {
            let x = self.time_step(sequence, step)?;
            (h, c) = self.lstm_cell(x, h, c, params)?;
        }
        Ok(h)
    }

    /// Reverse sweep from a one-element `loss` node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = self.node(loss)?;
        if root.value.len() != 1 {
            return Err(Error::State(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.shape
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.index + 1];
        grads[loss.index] = Some(vec![1.0]);
        for idx in (0..=loss.index).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { tape: self.id, grads })
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let value = |v: Var| &self.nodes[v.index].value;
        macro_rules! grad_of {
            ($v:expr) => {
                grad_slot(&self.nodes, grads, $v)
            };
        }
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (&self.nodes[a.index].shape, &self.nodes[b.index].shape);
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (av, bv) = (value(*a), value(*b));
                let ga = grad_of!(*a);
                for i in 0..m {
                    let grow = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let brow = &bv[p * n..(p + 1) * n];
                        ga[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
                let gb = grad_of!(*b);
                for i in 0..m {
                    let grow = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let x = av[i * k + p];
                        if x == 0.0 {
                            continue;
                        }
                        for (o, gv) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                            *o += x * gv;
                        }
                    }
                }
            }
            Op::AddBias(x, b) => {
                let gx = grad_of!(*x);
                for (o, gv) in gx.iter_mut().zip(g) {
                    *o += gv;
                }
                let gb = grad_of!(*b);
                let width = gb.len();
                for row in g.chunks(width) {
                    for (o, gv) in gb.iter_mut().zip(row) {
                        *o += gv;
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    let gv = grad_of!(v);
                    for (o, d) in gv.iter_mut().zip(g) {
                        *o += d;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (value(*a), value(*b));
                let ga = grad_of!(*a);
                for ((o, d), y) in ga.iter_mut().zip(g).zip(bv.iter()) {
                    *o += d * y;
                }
                let gb = grad_of!(*b);
                for ((o, d), x) in gb.iter_mut().zip(g).zip(av.iter()) {
                    *o += d * x;
                }
            }
            Op::Sigmoid(x) => {
                let gx = grad_of!(*x);
                for ((o, d), y) in gx.iter_mut().zip(g).zip(&node.value) {
                    *o += d * y * (1.0 - y);
                }
            }
            Op::Tanh(x) => {
                let gx = grad_of!(*x);
                for ((o, d), y) in gx.iter_mut().zip(g).zip(&node.value) {
                    *o += d * (1.0 - y * y);
                }
            }
            Op::Relu(x) => {
                let gx = grad_of!(*x);
                for ((o, d), y) in gx.iter_mut().zip(g).zip(&node.value) {
                    if *y > 0.0 {
                        *o += d;
                    }
                }
            }
            Op::Concat(parts) => {
                let rows = node.shape[0];
                let total = node.shape[1];
                let mut offset = 0;
                for &p in parts {
                    let w = self.nodes[p.index].shape[1];
                    let gp = grad_of!(p);
                    for r in 0..rows {
                        for c in 0..w {
                            gp[r * w + c] += g[r * total + offset + c];
                        }
                    }
                    offset += w;
                }
            }
            Op::SliceCols { src, start } => {
                let (rows, len) = (node.shape[0], node.shape[1]);
                let width = self.nodes[src.index].shape[1];
                let gs = grad_of!(*src);
                for r in 0..rows {
                    for c in 0..len {
                        gs[r * width + start + c] += g[r * len + c];
                    }
                }
            }
            Op::TimeStep { src, step } => {
                let s = &self.nodes[src.index].shape;
                let (b, w, f) = (s[0], s[1], s[2]);
                let gs = grad_of!(*src);
                for i in 0..b {
                    let at = (i * w + step) * f;
                    for c in 0..f {
                        gs[at + c] += g[i * f + c];
                    }
                }
            }
            Op::StackChannels(parts) => {
                let v = parts.len();
                for (c, &p) in parts.iter().enumerate() {
                    let gp = grad_of!(p);
                    for (i, o) in gp.iter_mut().enumerate() {
                        *o += g[i * v + c];
                    }
                }
            }
            Op::Conv1d { input, filters, bias } => {
                let si = &self.nodes[input.index].shape;
                let sf = &self.nodes[filters.index].shape;
                let (b, l, c) = (si[0], si[1], si[2]);
                let (k, f) = (sf[0], sf[2]);
                let p_out = l - k + 1;
                let (iv, fv) = (value(*input), value(*filters));
                let gb = grad_of!(*bias);
                for row in g.chunks(f) {
                    for (o, d) in gb.iter_mut().zip(row) {
                        *o += d;
                    }
                }
                let gf = grad_of!(*filters);
                for bi in 0..b {
                    for p in 0..p_out {
                        let grow = &g[(bi * p_out + p) * f..(bi * p_out + p + 1) * f];
                        for j in 0..k {
                            for ci in 0..c {
                                let x = iv[(bi * l + p + j) * c + ci];
                                let base = (j * c + ci) * f;
                                for (o, d) in gf[base..base + f].iter_mut().zip(grow) {
                                    *o += x * d;
                                }
                            }
                        }
                    }
                }
                let gi = grad_of!(*input);
                for bi in 0..b {
                    for p in 0..p_out {
                        let grow = &g[(bi * p_out + p) * f..(bi * p_out + p + 1) * f];
                        for j in 0..k {
                            for ci in 0..c {
                                let base = (j * c + ci) * f;
                                let s: f64 = fv[base..base + f].iter().zip(grow).map(|(w, d)| w * d).sum();
                                gi[(bi * l + p + j) * c + ci] += s;
                            }
                        }
                    }
                }
            }
            Op::MaxPool { input, argmax } => {
                let gi = grad_of!(*input);
                for (&at, d) in argmax.iter().zip(g) {
                    gi[at] += d;
                }
            }
            Op::Reshape(src) => {
                let gs = grad_of!(*src);
                for (o, d) in gs.iter_mut().zip(g) {
                    *o += d;
                }
            }
            Op::Mse(truth, pred) => {
                let n = value(*truth).len() as f64;
                let diff: Vec<f64> = value(*pred)
                    .iter()
                    .zip(value(*truth))
                    .map(|(p, t)| 2.0 * (p - t) / n * g[0])
                    .collect();
                let gp = grad_of!(*pred);
                for (o, d) in gp.iter_mut().zip(&diff) {
                    *o += d;
                }
                let gt = grad_of!(*truth);
                for (o, d) in gt.iter_mut().zip(&diff) {
                    *o -= d;
                }
            }
            Op::Sum(x) => {
                let gx = grad_of!(*x);
                for o in gx.iter_mut() {
                    *o += g[0];
                }
            }
        }
    }
}

fn grad_slot<'a>(nodes: &[Node], grads: &'a mut [Option<Vec<f64>>], v: Var) -> &'a mut Vec<f64> {
    let len = nodes[v.index].value.len();
    grads[v.index].get_or_insert_with(|| vec![0.0; len])
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Tape handles for an LSTM layer's parameters.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub input_kernel: Var,
    pub recurrent_kernel: Var,
    pub bias: Var,
}

/// Result of a reverse sweep.
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, if `v` influenced it.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.index).and_then(|g| g.as_deref())
    }

    /// Adds the gradients of `vars` into the accumulators of `params`,
    /// pairing them positionally. Unreached variables contribute zero.
    pub fn accumulate(&self, vars: &[Var], params: Vec<&mut Tensor>) -> Result<()> {
        if vars.len() != params.len() {
            return Err(Error::dim("accumulate", &[vars.len()], &[params.len()]));
        }
        for (v, p) in vars.iter().zip(params) {
            if v.tape != self.tape {
                return Err(Error::State("gradient from a different tape".into()));
            }
            match self.get(*v) {
                Some(g) => p.accumulate_grad(g)?,
                None => {
                    if p.grad().is_none() {
                        p.zero_grad();
                    }
                }
            }
        }
        Ok(())
    }
}

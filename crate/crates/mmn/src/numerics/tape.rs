//! Reverse-mode autodiff over a linear operation tape.
//!
//! The tape is an arena: every operation appends a node owning its output
//! buffer, and `backward` replays nodes in exact reverse execution order,
//! accumulating vector-Jacobian products into the inputs. Only the operations
//! the summarizer needs exist here; there is no broadcasting beyond the
//! row-broadcast the decoder conditioning requires.
//!
//! Shape violations are programming errors and panic; non-finite values are
//! rejected at node creation (every forward value must stay finite).

use super::kernels::{self, Padding};
use super::scalar::Scalar;
use super::tensor::Tensor;

/// Handle to a tensor stored on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T: Scalar> {
    Leaf,
    Add { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { x: usize, c: T },
    /// `x: [n, d] + v: [d]` broadcast over rows.
    AddRowBroadcast { x: usize, v: usize },
    Tanh { x: usize },
    Sigmoid { x: usize },
    /// `a: [m, k] · b: [k, n]`
    MatMul { a: usize, b: usize, m: usize, k: usize, n: usize },
    /// `a: [m, k] · b: [n, k]ᵀ`
    MatMulBT { a: usize, b: usize, m: usize, k: usize, n: usize },
    /// Row lookup: `out[r] = table[ids[r]]`.
    GatherRows { table: usize, ids: Vec<usize> },
    Conv1d {
        x: usize,
        w: usize,
        b: usize,
        k: usize,
        d_in: usize,
        d_out: usize,
        dilation: usize,
        padding: Padding,
        n: usize,
    },
    /// `w = g · v / ‖v‖` per output channel (last axis of `v`).
    WeightNorm { v: usize, g: usize, channels: usize },
    LayerNorm { x: usize, gain: usize, bias: usize, eps: T, n: usize, d: usize },
    /// Row-wise softmax; `mask[j] == true` excludes column j from every row.
    MaskedSoftmaxRows { x: usize, n: usize, m: usize },
    /// Per-channel max over rows; ties resolve to the lowest row index.
    MaxPoolTime { x: usize, d: usize, argmax: Vec<usize> },
    /// Column-wise concatenation of `[n, w_i]` blocks.
    ConcatCols { parts: Vec<usize>, n: usize, widths: Vec<usize> },
    /// Mean over positions of −Σ_y q(y)·log p(y) with the smoothed target
    /// q(gt) = 1−ε, q(y≠gt) = ε/V. Saves the softmax probabilities.
    LabelSmoothedCrossEntropy { logits: usize, targets: Vec<usize>, eps: T, probs: Vec<T> },
    /// Same data, new extents.
    Reshape { x: usize },
}

#[derive(Debug)]
struct Node<T: Scalar> {
    shape: Vec<usize>,
    data: Vec<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients<T: Scalar> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads[v.0].as_deref()
    }
}

/// Linear record of executed operations.
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
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

    fn push(&mut self, shape: Vec<usize>, data: Vec<T>, op: Op<T>, needs_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        assert!(
            data.iter().all(|x| x.is_finite()),
            "non-finite value produced by {:?}",
            op_name(&op)
        );
        self.nodes.push(Node { shape, data, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// Constant leaf: participates in the forward pass, receives no gradient.
    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<T>) -> Var {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "constant shape mismatch");
        self.push(shape, data, Op::Leaf, false)
    }

    /// Leaf initialized from a tensor; tracked iff the tensor requires grad.
    pub fn input(&mut self, t: &Tensor<T>) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, t.requires_grad())
    }

    /// Leaf that always receives a gradient.
    pub fn variable(&mut self, shape: Vec<usize>, data: Vec<T>) -> Var {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "variable shape mismatch");
        self.push(shape, data, Op::Leaf, true)
    }

    pub fn data(&self, v: Var) -> &[T] {
        &self.nodes[v.0].data
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn scalar(&self, v: Var) -> T {
        assert_eq!(self.nodes[v.0].data.len(), 1, "scalar() on non-scalar node");
        self.nodes[v.0].data[0]
    }

    fn needs(&self, id: usize) -> bool {
        self.nodes[id].needs_grad
    }

    // ── forward ops ─────────────────────────────────────────────────────

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add: shape mismatch");
        let data = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| x + y).collect();
        let needs = self.needs(a.0) || self.needs(b.0);
        self.push(self.nodes[a.0].shape.clone(), data, Op::Add { a: a.0, b: b.0 }, needs)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul: shape mismatch");
        let data = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| x * y).collect();
        let needs = self.needs(a.0) || self.needs(b.0);
        self.push(self.nodes[a.0].shape.clone(), data, Op::Mul { a: a.0, b: b.0 }, needs)
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let data = self.data(x).iter().map(|&v| v * c).collect();
        let needs = self.needs(x.0);
        self.push(self.nodes[x.0].shape.clone(), data, Op::Scale { x: x.0, c }, needs)
    }

    pub fn add_row_broadcast(&mut self, x: Var, v: Var) -> Var {
        let (n, d) = self.dims2(x);
        assert_eq!(self.data(v).len(), d, "add_row_broadcast: vector width mismatch");
        let mut data = self.data(x).to_vec();
        let vv = self.data(v);
        for r in 0..n {
            for c in 0..d {
                data[r * d + c] += vv[c];
            }
        }
        let needs = self.needs(x.0) || self.needs(v.0);
        self.push(vec![n, d], data, Op::AddRowBroadcast { x: x.0, v: v.0 }, needs)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let data = self.data(x).iter().map(|v| v.tanh()).collect();
        let needs = self.needs(x.0);
        self.push(self.nodes[x.0].shape.clone(), data, Op::Tanh { x: x.0 }, needs)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let one = T::one();
        let data = self.data(x).iter().map(|&v| one / (one + (-v).exp())).collect();
        let needs = self.needs(x.0);
        self.push(self.nodes[x.0].shape.clone(), data, Op::Sigmoid { x: x.0 }, needs)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.dims2(a);
        let (k2, n) = self.dims2(b);
        assert_eq!(k, k2, "matmul: inner dims {} vs {}", k, k2);
        let (da, db) = (self.data(a), self.data(b));
        let mut data = vec![T::zero(); m * n];
        for i in 0..m {
            for p in 0..k {
                let aip = da[i * k + p];
                let b_row = &db[p * n..(p + 1) * n];
                let out_row = &mut data[i * n..(i + 1) * n];
                for j in 0..n {
                    out_row[j] += aip * b_row[j];
                }
            }
        }
        let needs = self.needs(a.0) || self.needs(b.0);
        self.push(vec![m, n], data, Op::MatMul { a: a.0, b: b.0, m, k, n }, needs)
    }

    /// `a · bᵀ` with `b: [n, k]`; the attention score layout.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.dims2(a);
        let (n, k2) = self.dims2(b);
        assert_eq!(k, k2, "matmul_bt: inner dims {} vs {}", k, k2);
        let (da, db) = (self.data(a), self.data(b));
        let mut data = vec![T::zero(); m * n];
        for i in 0..m {
            let a_row = &da[i * k..(i + 1) * k];
            for j in 0..n {
                let b_row = &db[j * k..(j + 1) * k];
                let mut acc = T::zero();
                for p in 0..k {
                    acc += a_row[p] * b_row[p];
                }
                data[i * n + j] = acc;
            }
        }
        let needs = self.needs(a.0) || self.needs(b.0);
        self.push(vec![m, n], data, Op::MatMulBT { a: a.0, b: b.0, m, k, n }, needs)
    }

    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Var {
        let (v, d) = self.dims2(table);
        assert!(!ids.is_empty(), "gather_rows: empty id list");
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            assert!(id < v, "token id {} out of range for table with {} rows", id, v);
            data.extend_from_slice(&self.data(table)[id * d..(id + 1) * d]);
        }
        let needs = self.needs(table.0);
        self.push(
            vec![ids.len(), d],
            data,
            Op::GatherRows { table: table.0, ids: ids.to_vec() },
            needs,
        )
    }

    /// Dilated 1-D convolution, same-length output.
    ///
    /// `x: [n, d_in]`, `w: [k, d_in, d_out]`, `b: [d_out]`. `k` must be odd
    /// for centered padding and `dilation ≥ 1` always.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, dilation: usize, padding: Padding) -> Var {
        let (n, d_in) = self.dims2(x);
        let ws = self.shape(w);
        assert_eq!(ws.len(), 3, "conv1d: filter must be [k, d_in, d_out]");
        let (k, wd_in, d_out) = (ws[0], ws[1], ws[2]);
        assert_eq!(d_in, wd_in, "conv1d: input width {} vs filter {}", d_in, wd_in);
        assert_eq!(self.data(b).len(), d_out, "conv1d: bias width mismatch");
        assert!(dilation >= 1, "conv1d: dilation must be positive");
        if padding == Padding::Centered {
            assert!(k % 2 == 1, "conv1d: centered padding needs odd kernel, got {}", k);
        }
        let mut data = vec![T::zero(); n * d_out];
        for s in 0..n {
            kernels::conv1d_row(
                self.data(x),
                n,
                d_in,
                self.data(w),
                self.data(b),
                k,
                dilation,
                padding,
                s,
                &mut data[s * d_out..(s + 1) * d_out],
            );
        }
        let needs = self.needs(x.0) || self.needs(w.0) || self.needs(b.0);
        self.push(
            vec![n, d_out],
            data,
            Op::Conv1d { x: x.0, w: w.0, b: b.0, k, d_in, d_out, dilation, padding, n },
            needs,
        )
    }

    pub fn weight_norm(&mut self, v: Var, g: Var) -> Var {
        let vs = self.shape(v).to_vec();
        let channels = *vs.last().expect("weight_norm: scalar filter");
        assert_eq!(self.data(g).len(), channels, "weight_norm: g must have one entry per channel");
        assert!(
            self.data(g).iter().all(|x| *x > T::zero()),
            "weight_norm: g must be positive"
        );
        let data = kernels::weight_norm_filter(self.data(v), self.data(g), channels);
        let needs = self.needs(v.0) || self.needs(g.0);
        self.push(vs, data, Op::WeightNorm { v: v.0, g: g.0, channels }, needs)
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: T) -> Var {
        let (n, d) = self.dims2(x);
        assert_eq!(self.data(gain).len(), d, "layer_norm: gain width mismatch");
        assert_eq!(self.data(bias).len(), d, "layer_norm: bias width mismatch");
        let mut data = vec![T::zero(); n * d];
        for r in 0..n {
            kernels::layer_norm_row(
                &self.data(x)[r * d..(r + 1) * d],
                self.data(gain),
                self.data(bias),
                eps,
                &mut data[r * d..(r + 1) * d],
            );
        }
        let needs = self.needs(x.0) || self.needs(gain.0) || self.needs(bias.0);
        self.push(vec![n, d], data, Op::LayerNorm { x: x.0, gain: gain.0, bias: bias.0, eps, n, d }, needs)
    }

    /// Row-wise softmax over `[n, m]`, with columns where `mask` is true
    /// excluded (probability exactly zero).
    pub fn masked_softmax_rows(&mut self, x: Var, mask: Option<&[bool]>) -> Var {
        let (n, m) = self.dims2(x);
        if let Some(mk) = mask {
            assert_eq!(mk.len(), m, "masked_softmax_rows: mask width mismatch");
            assert!(mk.iter().any(|&b| !b), "masked_softmax_rows: all positions masked");
        }
        let mut data = self.data(x).to_vec();
        for r in 0..n {
            let row = &mut data[r * m..(r + 1) * m];
            if let Some(mk) = mask {
                for (j, &masked) in mk.iter().enumerate() {
                    if masked {
                        row[j] = T::neg_infinity();
                    }
                }
            }
            kernels::softmax_in_place(row);
        }
        let needs = self.needs(x.0);
        self.push(vec![n, m], data, Op::MaskedSoftmaxRows { x: x.0, n, m }, needs)
    }

    /// Per-channel maximum over rows of `[n, d]`; gradient flows to the
    /// argmax row only, lowest index on ties.
    pub fn maxpool_time(&mut self, x: Var) -> Var {
        let (n, d) = self.dims2(x);
        assert!(n >= 1, "maxpool_time: empty input");
        let xd = self.data(x);
        let mut data = xd[..d].to_vec();
        let mut argmax = vec![0usize; d];
        for r in 1..n {
            for c in 0..d {
                if xd[r * d + c] > data[c] {
                    data[c] = xd[r * d + c];
                    argmax[c] = r;
                }
            }
        }
        let needs = self.needs(x.0);
        self.push(vec![d], data, Op::MaxPoolTime { x: x.0, d, argmax }, needs)
    }

    /// Concatenates `[n, w_i]` blocks along the column axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols: no parts");
        let n = self.dims2(parts[0]).0;
        let widths: Vec<usize> = parts
            .iter()
            .map(|&p| {
                let (pn, pd) = self.dims2(p);
                assert_eq!(pn, n, "concat_cols: row count mismatch");
                pd
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(n * total);
        for r in 0..n {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.data(p)[r * w..(r + 1) * w]);
            }
        }
        let needs = parts.iter().any(|&p| self.needs(p.0));
        self.push(
            vec![n, total],
            data,
            Op::ConcatCols { parts: parts.iter().map(|p| p.0).collect(), n, widths },
            needs,
        )
    }

    /// Label-smoothed cross-entropy, mean over positions.
    ///
    /// The target distribution is the literal smoothed construction:
    /// q(gt) = 1−ε and q(y') = ε/V for every other word, which sums to
    /// 1 − ε/V rather than 1.
    pub fn label_smoothed_cross_entropy(&mut self, logits: Var, targets: &[usize], eps: T) -> Var {
        let (t, v) = self.dims2(logits);
        assert_eq!(t, targets.len(), "loss: one target per position");
        assert!(targets.iter().all(|&y| y < v), "loss: target id out of range");
        assert!(eps >= T::zero() && eps < T::one(), "loss: eps must be in [0, 1)");
        let vt = T::from_f64(v as f64);
        let uniform = eps / vt;
        let gt_mass = T::one() - eps;
        let mut probs = vec![T::zero(); t * v];
        let mut total = T::zero();
        for (r, &gt) in targets.iter().enumerate() {
            let row = &self.data(logits)[r * v..(r + 1) * v];
            let max = row.iter().copied().fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
            let mut log_z = T::zero();
            for &z in row {
                log_z += (z - max).exp();
            }
            let log_z = log_z.ln() + max;
            let mut sum_logp = T::zero();
            for (y, &z) in row.iter().enumerate() {
                let logp = z - log_z;
                probs[r * v + y] = logp.exp();
                sum_logp += logp;
            }
            let logp_gt = row[gt] - log_z;
            // −[(1−ε)·log p(gt) + (ε/V)·Σ_{y≠gt} log p(y)]
            total -= gt_mass * logp_gt + uniform * (sum_logp - logp_gt);
        }
        let loss = total / T::from_f64(t as f64);
        let needs = self.needs(logits.0);
        self.push(
            vec![1],
            vec![loss],
            Op::LabelSmoothedCrossEntropy { logits: logits.0, targets: targets.to_vec(), eps, probs },
            needs,
        )
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Var {
        assert_eq!(
            shape.iter().product::<usize>(),
            self.data(x).len(),
            "reshape: element count mismatch"
        );
        let data = self.data(x).to_vec();
        let needs = self.needs(x.0);
        self.push(shape, data, Op::Reshape { x: x.0 }, needs)
    }

    fn dims2(&self, v: Var) -> (usize, usize) {
        let s = self.shape(v);
        assert_eq!(s.len(), 2, "expected a 2-D tensor, got shape {:?}", s);
        (s[0], s[1])
    }

    // ── backward ────────────────────────────────────────────────────────

    /// Backpropagates from a scalar output with seed gradient 1.
    pub fn backward(&self, output: Var) -> Gradients<T> {
        assert_eq!(self.nodes[output.0].data.len(), 1, "backward: output must be scalar");
        self.backward_seeded(output, &[T::one()])
    }

    /// Backpropagates an arbitrary output gradient (vector-Jacobian product).
    pub fn backward_seeded(&self, output: Var, seed: &[T]) -> Gradients<T> {
        assert_eq!(seed.len(), self.nodes[output.0].data.len(), "backward: seed length mismatch");
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(seed.to_vec());
        for id in (0..=output.0).rev() {
            if grads[id].is_none() || !self.nodes[id].needs_grad {
                continue;
            }
            let g = grads[id].take().unwrap();
            self.accumulate_into_parents(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        // values reachable from the output must have stayed finite
        for go in grads.iter().flatten() {
            assert!(go.iter().all(|x| x.is_finite()), "non-finite gradient after backward");
        }
        Gradients { grads }
    }

    fn add_grad(&self, grads: &mut [Option<Vec<T>>], id: usize, delta: &[T]) {
        if !self.nodes[id].needs_grad {
            return;
        }
        let slot = grads[id].get_or_insert_with(|| vec![T::zero(); self.nodes[id].data.len()]);
        for (s, d) in slot.iter_mut().zip(delta) {
            *s += *d;
        }
    }

    fn accumulate_into_parents(&self, id: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Add { a, b } => {
                self.add_grad(grads, *a, g);
                self.add_grad(grads, *b, g);
            }
            Op::Mul { a, b } => {
                let da: Vec<T> =
                    g.iter().zip(&self.nodes[*b].data).map(|(&gi, &bi)| gi * bi).collect();
                let db: Vec<T> =
                    g.iter().zip(&self.nodes[*a].data).map(|(&gi, &ai)| gi * ai).collect();
                self.add_grad(grads, *a, &da);
                self.add_grad(grads, *b, &db);
            }
            Op::Scale { x, c } => {
                let dx: Vec<T> = g.iter().map(|&gi| gi * *c).collect();
                self.add_grad(grads, *x, &dx);
            }
            Op::AddRowBroadcast { x, v } => {
                self.add_grad(grads, *x, g);
                let d = self.nodes[*v].data.len();
                let n = g.len() / d;
                let mut dv = vec![T::zero(); d];
                for r in 0..n {
                    for c in 0..d {
                        dv[c] += g[r * d + c];
                    }
                }
                self.add_grad(grads, *v, &dv);
            }
            Op::Tanh { x } => {
                let y = &self.nodes[id].data;
                let dx: Vec<T> =
                    g.iter().zip(y).map(|(&gi, &yi)| gi * (T::one() - yi * yi)).collect();
                self.add_grad(grads, *x, &dx);
            }
            Op::Sigmoid { x } => {
                let y = &self.nodes[id].data;
                let dx: Vec<T> =
                    g.iter().zip(y).map(|(&gi, &yi)| gi * yi * (T::one() - yi)).collect();
                self.add_grad(grads, *x, &dx);
            }
            Op::MatMul { a, b, m, k, n } => {
                let (m, k, n) = (*m, *k, *n);
                let (da_in, db_in) = (&self.nodes[*a].data, &self.nodes[*b].data);
                if self.nodes[*a].needs_grad {
                    // dA = g · Bᵀ
                    let mut da = vec![T::zero(); m * k];
                    for i in 0..m {
                        for p in 0..k {
                            let mut acc = T::zero();
                            for j in 0..n {
                                acc += g[i * n + j] * db_in[p * n + j];
                            }
                            da[i * k + p] = acc;
                        }
                    }
                    self.add_grad(grads, *a, &da);
                }
                if self.nodes[*b].needs_grad {
                    // dB = Aᵀ · g
                    let mut db = vec![T::zero(); k * n];
                    for p in 0..k {
                        for i in 0..m {
                            let aip = da_in[i * k + p];
                            for j in 0..n {
                                db[p * n + j] += aip * g[i * n + j];
                            }
                        }
                    }
                    self.add_grad(grads, *b, &db);
                }
            }
            Op::MatMulBT { a, b, m, k, n } => {
                let (m, k, n) = (*m, *k, *n);
                let (da_in, db_in) = (&self.nodes[*a].data, &self.nodes[*b].data);
                if self.nodes[*a].needs_grad {
                    // dA = g · B
                    let mut da = vec![T::zero(); m * k];
                    for i in 0..m {
                        for j in 0..n {
                            let gij = g[i * n + j];
                            for p in 0..k {
                                da[i * k + p] += gij * db_in[j * k + p];
                            }
                        }
                    }
                    self.add_grad(grads, *a, &da);
                }
                if self.nodes[*b].needs_grad {
                    // dB = gᵀ · A
                    let mut db = vec![T::zero(); n * k];
                    for j in 0..n {
                        for i in 0..m {
                            let gij = g[i * n + j];
                            for p in 0..k {
                                db[j * k + p] += gij * da_in[i * k + p];
                            }
                        }
                    }
                    self.add_grad(grads, *b, &db);
                }
            }
            Op::GatherRows { table, ids } => {
                let d = self.nodes[*table].shape[1];
                let mut dt = vec![T::zero(); self.nodes[*table].data.len()];
                for (r, &id_row) in ids.iter().enumerate() {
                    for c in 0..d {
                        dt[id_row * d + c] += g[r * d + c];
                    }
                }
                self.add_grad(grads, *table, &dt);
            }
            Op::Conv1d { x, w, b, k, d_in, d_out, dilation, padding, n } => {
                let (k, d_in, d_out, n) = (*k, *d_in, *d_out, *n);
                let (xd, wd) = (&self.nodes[*x].data, &self.nodes[*w].data);
                let need_x = self.nodes[*x].needs_grad;
                let need_w = self.nodes[*w].needs_grad;
                let need_b = self.nodes[*b].needs_grad;
                let mut dx = if need_x { vec![T::zero(); n * d_in] } else { Vec::new() };
                let mut dw = if need_w { vec![T::zero(); k * d_in * d_out] } else { Vec::new() };
                let mut db = if need_b { vec![T::zero(); d_out] } else { Vec::new() };
                for s in 0..n {
                    let g_row = &g[s * d_out..(s + 1) * d_out];
                    if need_b {
                        for o in 0..d_out {
                            db[o] += g_row[o];
                        }
                    }
                    for i in 0..k {
                        let pos = s as isize + kernels::tap_offset(*padding, k, *dilation, i);
                        if pos < 0 || pos >= n as isize {
                            continue;
                        }
                        let pos = pos as usize;
                        for c in 0..d_in {
                            let xv = xd[pos * d_in + c];
                            let w_row = &wd[(i * d_in + c) * d_out..(i * d_in + c + 1) * d_out];
                            if need_x {
                                let mut acc = T::zero();
                                for o in 0..d_out {
                                    acc += w_row[o] * g_row[o];
                                }
                                dx[pos * d_in + c] += acc;
                            }
                            if need_w {
                                let dw_row =
                                    &mut dw[(i * d_in + c) * d_out..(i * d_in + c + 1) * d_out];
                                for o in 0..d_out {
                                    dw_row[o] += xv * g_row[o];
                                }
                            }
                        }
                    }
                }
                if need_x {
                    self.add_grad(grads, *x, &dx);
                }
                if need_w {
                    self.add_grad(grads, *w, &dw);
                }
                if need_b {
                    self.add_grad(grads, *b, &db);
                }
            }
            Op::WeightNorm { v, g: gv, channels } => {
                let channels = *channels;
                let vd = &self.nodes[*v].data;
                let gd = &self.nodes[*gv].data;
                let rows = vd.len() / channels;
                let mut norms = vec![T::zero(); channels];
                let mut dots = vec![T::zero(); channels]; // Σ_r grad_rc · v_rc
                for r in 0..rows {
                    for c in 0..channels {
                        let x = vd[r * channels + c];
                        norms[c] += x * x;
                        dots[c] += g[r * channels + c] * x;
                    }
                }
                for n in norms.iter_mut() {
                    *n = n.sqrt();
                }
                if self.nodes[*v].needs_grad {
                    let mut dv = vec![T::zero(); vd.len()];
                    for c in 0..channels {
                        let n = norms[c];
                        let scale = gd[c] / n;
                        let corr = gd[c] * dots[c] / (n * n * n);
                        for r in 0..rows {
                            dv[r * channels + c] =
                                scale * g[r * channels + c] - corr * vd[r * channels + c];
                        }
                    }
                    self.add_grad(grads, *v, &dv);
                }
                if self.nodes[*gv].needs_grad {
                    let dg: Vec<T> = (0..channels).map(|c| dots[c] / norms[c]).collect();
                    self.add_grad(grads, *gv, &dg);
                }
            }
            Op::LayerNorm { x, gain, bias, eps, n, d } => {
                let (n, d) = (*n, *d);
                let xd = &self.nodes[*x].data;
                let gagd = &self.nodes[*gain].data;
                let dt = T::from_f64(d as f64);
                let mut dx = vec![T::zero(); n * d];
                let mut dgain = vec![T::zero(); d];
                let mut dbias = vec![T::zero(); d];
                for r in 0..n {
                    let row = &xd[r * d..(r + 1) * d];
                    let g_row = &g[r * d..(r + 1) * d];
                    let mut mean = T::zero();
                    for &v in row {
                        mean += v;
                    }
                    mean = mean / dt;
                    let mut var = T::zero();
                    for &v in row {
                        let c = v - mean;
                        var += c * c;
                    }
                    var = var / dt;
                    let inv_std = (var + *eps).sqrt().recip();
                    // dxhat, and batch statistics of dxhat
                    let mut sum_dxhat = T::zero();
                    let mut sum_dxhat_xhat = T::zero();
                    let mut xhat = vec![T::zero(); d];
                    let mut dxhat = vec![T::zero(); d];
                    for c in 0..d {
                        xhat[c] = (row[c] - mean) * inv_std;
                        dxhat[c] = g_row[c] * gagd[c];
                        sum_dxhat += dxhat[c];
                        sum_dxhat_xhat += dxhat[c] * xhat[c];
                        dgain[c] += g_row[c] * xhat[c];
                        dbias[c] += g_row[c];
                    }
                    let mean_dxhat = sum_dxhat / dt;
                    let mean_dxhat_xhat = sum_dxhat_xhat / dt;
                    for c in 0..d {
                        dx[r * d + c] =
                            inv_std * (dxhat[c] - mean_dxhat - xhat[c] * mean_dxhat_xhat);
                    }
                }
                self.add_grad(grads, *x, &dx);
                self.add_grad(grads, *gain, &dgain);
                self.add_grad(grads, *bias, &dbias);
            }
            Op::MaskedSoftmaxRows { x, n, m } => {
                let (n, m) = (*n, *m);
                let y = &self.nodes[id].data;
                let mut dx = vec![T::zero(); n * m];
                for r in 0..n {
                    let y_row = &y[r * m..(r + 1) * m];
                    let g_row = &g[r * m..(r + 1) * m];
                    let mut dot = T::zero();
                    for j in 0..m {
                        dot += g_row[j] * y_row[j];
                    }
                    for j in 0..m {
                        dx[r * m + j] = y_row[j] * (g_row[j] - dot);
                    }
                }
                self.add_grad(grads, *x, &dx);
            }
            Op::MaxPoolTime { x, d, argmax } => {
                let mut dx = vec![T::zero(); self.nodes[*x].data.len()];
                for c in 0..*d {
                    dx[argmax[c] * d + c] += g[c];
                }
                self.add_grad(grads, *x, &dx);
            }
            Op::ConcatCols { parts, n, widths } => {
                let total: usize = widths.iter().sum();
                let mut offset = 0;
                for (&p, &w) in parts.iter().zip(widths) {
                    if self.nodes[p].needs_grad {
                        let mut dp = vec![T::zero(); n * w];
                        for r in 0..*n {
                            dp[r * w..(r + 1) * w]
                                .copy_from_slice(&g[r * total + offset..r * total + offset + w]);
                        }
                        self.add_grad(grads, p, &dp);
                    }
                    offset += w;
                }
            }
            Op::LabelSmoothedCrossEntropy { logits, targets, eps, probs } => {
                let t = targets.len();
                let v = probs.len() / t;
                let vt = T::from_f64(v as f64);
                let tt = T::from_f64(t as f64);
                let uniform = *eps / vt;
                let gt_mass = T::one() - *eps;
                // Σ_y q(y) = 1 − ε/V by the paper's literal construction
                let q_total = T::one() - uniform;
                let scale = g[0] / tt;
                let mut dl = vec![T::zero(); t * v];
                for (r, &gt) in targets.iter().enumerate() {
                    for y in 0..v {
                        let q = if y == gt { gt_mass } else { uniform };
                        dl[r * v + y] = scale * (probs[r * v + y] * q_total - q);
                    }
                }
                self.add_grad(grads, *logits, &dl);
            }
            Op::Reshape { x } => {
                self.add_grad(grads, *x, g);
            }
        }
    }
}

fn op_name<T: Scalar>(op: &Op<T>) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Add { .. } => "add",
        Op::Mul { .. } => "mul",
        Op::Scale { .. } => "scale",
        Op::AddRowBroadcast { .. } => "add_row_broadcast",
        Op::Tanh { .. } => "tanh",
        Op::Sigmoid { .. } => "sigmoid",
        Op::MatMul { .. } => "matmul",
        Op::MatMulBT { .. } => "matmul_bt",
        Op::GatherRows { .. } => "gather_rows",
        Op::Conv1d { .. } => "conv1d",
        Op::WeightNorm { .. } => "weight_norm",
        Op::LayerNorm { .. } => "layer_norm",
        Op::MaskedSoftmaxRows { .. } => "masked_softmax_rows",
        Op::MaxPoolTime { .. } => "maxpool_time",
        Op::ConcatCols { .. } => "concat_cols",
        Op::LabelSmoothedCrossEntropy { .. } => "label_smoothed_cross_entropy",
        Op::Reshape { .. } => "reshape",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_conv_returns_input() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(vec![4, 1], vec![1.0, 2.0, 3.0, 4.0]);
        let w = tape.constant(vec![1, 1, 1], vec![1.0]);
        let b = tape.constant(vec![1], vec![0.0]);
        let y = tape.conv1d(x, w, b, 1, Padding::Centered);
        assert_eq!(tape.data(y), tape.data(x));
        let y = tape.conv1d(x, w, b, 5, Padding::Causal);
        assert_eq!(tape.data(y), tape.data(x));
    }

    #[test]
    fn causal_conv_ignores_future_positions() {
        let run = |x3: f64| {
            let mut tape = Tape::<f64>::new();
            let x = tape.constant(vec![3, 1], vec![1.0, 2.0, x3]);
            let w = tape.constant(vec![3, 1, 1], vec![1.0, 1.0, 1.0]);
            let b = tape.constant(vec![1], vec![0.0]);
            let y = tape.conv1d(x, w, b, 1, Padding::Causal);
            tape.data(y).to_vec()
        };
        let base = run(3.0);
        assert_eq!(base, vec![1.0, 3.0, 6.0]);
        let bumped = run(103.0);
        assert_eq!(base[0], bumped[0]);
        assert_eq!(base[1], bumped[1]);
    }

    #[test]
    fn causal_grad_is_zero_for_future_inputs() {
        let mut tape = Tape::<f64>::new();
        let x = tape.variable(vec![4, 1], vec![0.3, -0.1, 0.7, 0.2]);
        let w = tape.constant(vec![3, 1, 1], vec![0.5, -1.0, 2.0]);
        let b = tape.constant(vec![1], vec![0.1]);
        let y = tape.conv1d(x, w, b, 1, Padding::Causal);
        // pick output position 1; inputs 2, 3 must get exactly zero gradient
        let grads = tape.backward_seeded(y, &[0.0, 1.0, 0.0, 0.0]);
        let dx = grads.get(x).unwrap();
        assert_eq!(dx[2], 0.0);
        assert_eq!(dx[3], 0.0);
        assert_eq!(dx[1], 2.0);
        assert_eq!(dx[0], -1.0);
    }

    #[test]
    fn layer_norm_rows_unit_cases() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(vec![2, 3], vec![3.0, 3.0, 3.0, 1.0, 2.0, 3.0]);
        let gain = tape.constant(vec![3], vec![1.0; 3]);
        let bias = tape.constant(vec![3], vec![0.0; 3]);
        let y = tape.layer_norm(x, gain, bias, 1e-5);
        // constant row collapses to the bias
        assert!(tape.data(y)[..3].iter().all(|v| v.abs() < 1e-9));
        // [1,2,3] normalizes to mean 0 / var 1 (independent mean/var oracle)
        let row = &tape.data(y)[3..6];
        let mean: f64 = row.iter().sum::<f64>() / 3.0;
        let var: f64 = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-3);
    }

    #[test]
    fn layer_norm_two_channel_row_is_fixed_point() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(vec![1, 2], vec![1.0, -1.0]);
        let gain = tape.constant(vec![2], vec![1.0; 2]);
        let bias = tape.constant(vec![2], vec![0.0; 2]);
        let y = tape.layer_norm(x, gain, bias, 1e-5);
        assert!((tape.data(y)[0] - 1.0).abs() < 1e-4);
        assert!((tape.data(y)[1] + 1.0).abs() < 1e-4);
    }

    #[test]
    fn softmax_uniform_and_exact_values() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(vec![1, 2], vec![0.0, 0.0]);
        let y = tape.masked_softmax_rows(x, None);
        assert_eq!(tape.data(y), &[0.5, 0.5]);

        let x = tape.constant(vec![1, 4], vec![7.25; 4]);
        let y = tape.masked_softmax_rows(x, None);
        for &p in tape.data(y) {
            assert!((p - 0.25).abs() < 1e-12);
        }

        // [1, 2] -> [1/(1+e), e/(1+e)] via the exponentiation oracle
        let x = tape.constant(vec![1, 2], vec![1.0, 2.0]);
        let y = tape.masked_softmax_rows(x, None);
        let e = std::f64::consts::E;
        assert!((tape.data(y)[0] - 1.0 / (1.0 + e)).abs() < 1e-12);
        assert!((tape.data(y)[1] - e / (1.0 + e)).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariance() {
        let scores = [0.3, -1.2, 2.4, 0.0];
        let run = |c: f64| {
            let mut tape = Tape::<f64>::new();
            let x = tape.constant(vec![1, 4], scores.iter().map(|s| s + c).collect());
            let y = tape.masked_softmax_rows(x, None);
            tape.data(y).to_vec()
        };
        let a = run(0.0);
        let b = run(100.0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn maxpool_takes_columnwise_max_and_routes_grads() {
        let mut tape = Tape::<f64>::new();
        let x = tape.variable(vec![2, 2], vec![1.0, 5.0, 3.0, 2.0]);
        let y = tape.maxpool_time(x);
        assert_eq!(tape.data(y), &[3.0, 5.0]);
        let grads = tape.backward_seeded(y, &[1.0, 1.0]);
        assert_eq!(grads.get(x).unwrap(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn maxpool_tie_breaks_to_lowest_index() {
        let mut tape = Tape::<f64>::new();
        let x = tape.variable(vec![3, 1], vec![2.0, 2.0, 2.0]);
        let y = tape.maxpool_time(x);
        let grads = tape.backward_seeded(y, &[1.0]);
        assert_eq!(grads.get(x).unwrap(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn weight_norm_direction_invariance_and_g_norm() {
        let mut tape = Tape::<f64>::new();
        let v1 = tape.constant(vec![2, 1], vec![3.0, 4.0]);
        let v2 = tape.constant(vec![2, 1], vec![7.5, 10.0]); // 2.5 × v1
        let g = tape.constant(vec![1], vec![2.0]);
        let w1 = tape.weight_norm(v1, g);
        let w2 = tape.weight_norm(v2, g);
        for (a, b) in tape.data(w1).iter().zip(tape.data(w2)) {
            assert!((a - b).abs() < 1e-12);
        }
        let norm: f64 = tape.data(w1).iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 2.0).abs() < 1e-6);
    }

    #[test]
    fn weight_norm_with_g_equal_norm_is_identity() {
        let mut tape = Tape::<f64>::new();
        let v = tape.constant(vec![2, 1], vec![3.0, 4.0]);
        let g = tape.constant(vec![1], vec![5.0]);
        let w = tape.weight_norm(v, g);
        assert!((tape.data(w)[0] - 3.0).abs() < 1e-12);
        assert!((tape.data(w)[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn label_smoothed_loss_uniform_logits_frozen_value() {
        // V=4, ε=0.1, uniform logits -> 0.975·ln 4
        let mut tape = Tape::<f64>::new();
        let logits = tape.constant(vec![1, 4], vec![0.0; 4]);
        let loss = tape.label_smoothed_cross_entropy(logits, &[2], 0.1);
        let expected = 0.975 * 4.0f64.ln();
        assert!((tape.scalar(loss) - expected).abs() < 1e-12);
    }

    #[test]
    fn label_smoothing_zero_eps_is_cross_entropy() {
        let mut tape = Tape::<f64>::new();
        let logits = tape.constant(vec![2, 3], vec![0.2, -0.4, 1.0, 0.0, 0.0, 0.0]);
        let loss = tape.label_smoothed_cross_entropy(logits, &[2, 0], 0.0);
        // plain NLL oracle
        let nll = |row: &[f64], gt: usize| {
            let z: f64 = row.iter().map(|x| x.exp()).sum();
            -(row[gt].exp() / z).ln()
        };
        let expected = (nll(&[0.2, -0.4, 1.0], 2) + nll(&[0.0, 0.0, 0.0], 0)) / 2.0;
        assert!((tape.scalar(loss) - expected).abs() < 1e-12);
    }

    #[test]
    fn matmul_small_oracle() {
        let mut tape = Tape::<f64>::new();
        let a = tape.constant(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = tape.constant(vec![3, 2], vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = tape.matmul(a, b);
        assert_eq!(tape.data(c), &[58.0, 64.0, 139.0, 154.0]);
        // a · aᵀ
        let d = tape.matmul_bt(a, a);
        assert_eq!(tape.data(d), &[14.0, 32.0, 32.0, 77.0]);
    }

    #[test]
    fn gather_rows_looks_up_embeddings() {
        let mut tape = Tape::<f64>::new();
        let table = tape.variable(vec![3, 2], vec![0.0, 1.0, 10.0, 11.0, 20.0, 21.0]);
        let out = tape.gather_rows(table, &[2, 0, 2]);
        assert_eq!(tape.data(out), &[20.0, 21.0, 0.0, 1.0, 20.0, 21.0]);
        let grads = tape.backward_seeded(out, &[1.0; 6]);
        // both occurrences of row 2 accumulate
        assert_eq!(grads.get(table).unwrap(), &[1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    #[should_panic(expected = "dilation")]
    fn zero_dilation_panics() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(vec![3, 1], vec![1.0; 3]);
        let w = tape.constant(vec![1, 1, 1], vec![1.0]);
        let b = tape.constant(vec![1], vec![0.0]);
        let _ = tape.conv1d(x, w, b, 0, Padding::Centered);
    }

    #[test]
    #[should_panic(expected = "shape mismatch")]
    fn add_shape_mismatch_panics() {
        let mut tape = Tape::<f64>::new();
        let a = tape.constant(vec![2], vec![1.0; 2]);
        let b = tape.constant(vec![3], vec![1.0; 3]);
        let _ = tape.add(a, b);
    }

    #[test]
    fn masked_softmax_zeroes_masked_columns() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(vec![2, 3], vec![1.0, 2.0, 3.0, 0.0, 0.0, 0.0]);
        let y = tape.masked_softmax_rows(x, Some(&[false, true, false]));
        let d = tape.data(y);
        assert_eq!(d[1], 0.0);
        assert_eq!(d[4], 0.0);
        assert!((d[0] + d[2] - 1.0).abs() < 1e-12);
        assert!((d[3] - 0.5).abs() < 1e-12);
    }
}

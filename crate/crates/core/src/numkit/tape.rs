//! Reverse-mode autodiff on an index-based tape.
//!
//! Each operation appends a node holding its output value and the indices of
//! its inputs. `backward` walks the nodes in exact reverse recording order
//! (which is a reverse topological order, since ops can only reference
//! earlier nodes) and accumulates parameter gradients into a [`ParamStore`].
//!
//! Reductions that mix contributions across interaction slots
//! (`other_slots_mean`, `slot_mean`, `block_combine`, and the softmax
//! denominator) sum their terms in a canonical order (see
//! [`sorted_sum`](super::sorted_sum)) so that permuting same-role slots
//! changes nothing, bit for bit.

use super::matrix::{sorted_sum, Matrix};
use super::optim::{ParamId, ParamStore};
use super::{NumError, Result};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    /// Constant input; no gradient is propagated past it.
    Input,
    /// Leaf that mirrors a parameter; backward accumulates into the store.
    Param(usize),
    /// y = x W + b (b is a 1 x n row broadcast over rows of x W).
    Linear { x: usize, w: usize, b: usize },
    /// y = a b.
    Matmul { a: usize, b: usize },
    Relu { x: usize },
    /// Horizontal concatenation of equal-row-count blocks.
    ConcatCols { xs: Vec<usize> },
    /// Elementwise mean of k same-shape matrices (canonical-order sum).
    MeanList { xs: Vec<usize> },
    Add { a: usize, b: usize },
    Scale { x: usize, factor: f64 },
    /// Sum of all entries, yielding a 1x1 scalar.
    Sum { x: usize },
    /// out.row(i) = table.row(indices[i]); repeated indices accumulate grads.
    GatherRows { table: usize, indices: Vec<usize> },
    /// Pure element shuffle: out.flat[i] = in.flat[mapping[i]].
    Reindex {
        x: usize,
        rows: usize,
        cols: usize,
        mapping: Vec<usize>,
    },
    /// Rows come in consecutive groups of n_slots; out row (g,i) is the mean
    /// over rows (g,j), j != i (canonical-order sum).
    OtherSlotsMean { x: usize, n_slots: usize },
    /// Mean over each group of n_slots consecutive rows (canonical-order sum).
    SlotMean { x: usize, n_slots: usize },
    /// Per-group score matrix: out[(g,i), j] = a.row(g,i) . b.row(g,j).
    BlockScores { a: usize, b: usize, n_slots: usize },
    /// Per-group combine: out.row(g,i) = sum_j attn[(g,i),j] * v.row(g,j)
    /// (canonical-order sum over j).
    BlockCombine { attn: usize, v: usize, n_slots: usize },
    /// Row-wise softmax (canonical-order sum in the denominator).
    SoftmaxRows { x: usize },
    /// Mean cross-entropy over rows; output is 1x1. `probs` caches softmax.
    SoftmaxCrossEntropy {
        logits: usize,
        targets: Vec<usize>,
        probs: Matrix,
    },
}

struct Node {
    op: Op,
    value: Matrix,
}

/// A single forward recording. Create one per forward/backward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, op: Op, value: Matrix) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    /// Record a constant input.
    pub fn input(&mut self, m: Matrix) -> NodeId {
        self.push(Op::Input, m)
    }

    /// Record a leaf for parameter `id`, copying its current value.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        let idx = id.0;
        let value = store.value_by_index(idx).clone();
        self.push(Op::Param(idx), value)
    }

    /// y = x W + b. `b` must be 1 x n and is broadcast over rows.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xr, xc) = self.shape(x);
        let (wr, wc) = self.shape(w);
        let (br, bc) = self.shape(b);
        if xc != wr || br != 1 || bc != wc {
            return Err(NumError::ShapeMismatch {
                op: "linear",
                detail: format!("x {}x{}, w {}x{}, b {}x{}", xr, xc, wr, wc, br, bc),
            });
        }
        let mut y = self.nodes[x.0].value.matmul(&self.nodes[w.0].value);
        for r in 0..xr {
            let bias = self.nodes[b.0].value.row(0).to_vec();
            for (v, bv) in y.row_mut(r).iter_mut().zip(&bias) {
                *v += bv;
            }
        }
        Ok(self.push(Op::Linear { x: x.0, w: w.0, b: b.0 }, y))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        if ac != br {
            return Err(NumError::ShapeMismatch {
                op: "matmul",
                detail: format!("{}x{} * {}x{}", ar, ac, br, bc),
            });
        }
        let y = self.nodes[a.0].value.matmul(&self.nodes[b.0].value);
        Ok(self.push(Op::Matmul { a: a.0, b: b.0 }, y))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let mut y = self.nodes[x.0].value.clone();
        for v in y.as_mut_slice() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self.push(Op::Relu { x: x.0 }, y)
    }

    pub fn concat_cols(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        if xs.is_empty() {
            return Err(NumError::EmptyInput { op: "concat_cols" });
        }
        let rows = self.shape(xs[0]).0;
        let mut total_cols = 0;
        for &x in xs {
            let (r, c) = self.shape(x);
            if r != rows {
                return Err(NumError::ShapeMismatch {
                    op: "concat_cols",
                    detail: format!("expected {} rows, got {}", rows, r),
                });
            }
            total_cols += c;
        }
        let mut y = Matrix::zeros(rows, total_cols);
        for r in 0..rows {
            let mut offset = 0;
            for &x in xs {
                let block = self.nodes[x.0].value.row(r);
                y.row_mut(r)[offset..offset + block.len()].copy_from_slice(block);
                offset += block.len();
            }
        }
        Ok(self.push(Op::ConcatCols { xs: xs.iter().map(|n| n.0).collect() }, y))
    }

    /// Elementwise mean of k same-shape matrices.
    pub fn mean_list(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        if xs.is_empty() {
            return Err(NumError::EmptyInput { op: "mean_list" });
        }
        let shape = self.shape(xs[0]);
        for &x in xs {
            if self.shape(x) != shape {
                return Err(NumError::ShapeMismatch {
                    op: "mean_list",
                    detail: format!("expected {:?}, got {:?}", shape, self.shape(x)),
                });
            }
        }
        let k = xs.len() as f64;
        let mut y = Matrix::zeros(shape.0, shape.1);
        let mut scratch = vec![0.0; xs.len()];
        for i in 0..y.len() {
            for (s, &x) in scratch.iter_mut().zip(xs) {
                *s = self.nodes[x.0].value.as_slice()[i];
            }
            y.as_mut_slice()[i] = sorted_sum(&mut scratch) / k;
        }
        Ok(self.push(Op::MeanList { xs: xs.iter().map(|n| n.0).collect() }, y))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(NumError::ShapeMismatch {
                op: "add",
                detail: format!("{:?} + {:?}", self.shape(a), self.shape(b)),
            });
        }
        let mut y = self.nodes[a.0].value.clone();
        y.add_assign(&self.nodes[b.0].value);
        Ok(self.push(Op::Add { a: a.0, b: b.0 }, y))
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        let mut y = self.nodes[x.0].value.clone();
        for v in y.as_mut_slice() {
            *v *= factor;
        }
        self.push(Op::Scale { x: x.0, factor }, y)
    }

    /// Sum of every entry, as a 1x1 node.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let total: f64 = self.nodes[x.0].value.as_slice().iter().sum();
        self.push(Op::Sum { x: x.0 }, Matrix::scalar(total))
    }

    /// Row gather; `indices` may repeat (gradients accumulate).
    pub fn gather_rows(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId> {
        let (tr, tc) = self.shape(table);
        if let Some(&bad) = indices.iter().find(|&&i| i >= tr) {
            return Err(NumError::ShapeMismatch {
                op: "gather_rows",
                detail: format!("index {} out of range for {} rows", bad, tr),
            });
        }
        let mut y = Matrix::zeros(indices.len(), tc);
        for (r, &i) in indices.iter().enumerate() {
            let src = self.nodes[table.0].value.row(i).to_vec();
            y.row_mut(r).copy_from_slice(&src);
        }
        Ok(self.push(
            Op::GatherRows { table: table.0, indices: indices.to_vec() },
            y,
        ))
    }

    /// Reshape-with-shuffle: out.flat[i] = in.flat[mapping[i]]. The mapping
    /// may repeat source elements; gradients accumulate.
    pub fn reindex(&mut self, x: NodeId, rows: usize, cols: usize, mapping: Vec<usize>) -> Result<NodeId> {
        let n_in = self.nodes[x.0].value.len();
        if mapping.len() != rows * cols {
            return Err(NumError::ShapeMismatch {
                op: "reindex",
                detail: format!("mapping len {} for {}x{}", mapping.len(), rows, cols),
            });
        }
        if let Some(&bad) = mapping.iter().find(|&&i| i >= n_in) {
            return Err(NumError::ShapeMismatch {
                op: "reindex",
                detail: format!("source index {} out of range for {} elements", bad, n_in),
            });
        }
        let src = &self.nodes[x.0].value;
        let mut y = Matrix::zeros(rows, cols);
        for (i, &m) in mapping.iter().enumerate() {
            y.as_mut_slice()[i] = src.as_slice()[m];
        }
        Ok(self.push(Op::Reindex { x: x.0, rows, cols, mapping }, y))
    }

    fn check_grouped(&self, op: &'static str, id: NodeId, n_slots: usize) -> Result<()> {
        let (r, _) = self.shape(id);
        if n_slots == 0 || r % n_slots != 0 {
            return Err(NumError::ShapeMismatch {
                op,
                detail: format!("{} rows not divisible into groups of {}", r, n_slots),
            });
        }
        Ok(())
    }

    /// For rows grouped in consecutive blocks of `n_slots`, replace each row
    /// (g,i) with the mean over the other rows of its group. Requires
    /// n_slots >= 2.
    pub fn other_slots_mean(&mut self, x: NodeId, n_slots: usize) -> Result<NodeId> {
        self.check_grouped("other_slots_mean", x, n_slots)?;
        if n_slots < 2 {
            return Err(NumError::ShapeMismatch {
                op: "other_slots_mean",
                detail: "needs at least 2 slots per group".into(),
            });
        }
        let (rows, cols) = self.shape(x);
        let groups = rows / n_slots;
        let denom = (n_slots - 1) as f64;
        let mut y = Matrix::zeros(rows, cols);
        let mut scratch = vec![0.0; n_slots - 1];
        for g in 0..groups {
            for i in 0..n_slots {
                for c in 0..cols {
                    let mut k = 0;
                    for j in 0..n_slots {
                        if j != i {
                            scratch[k] = self.nodes[x.0].value.at(g * n_slots + j, c);
                            k += 1;
                        }
                    }
                    y.set(g * n_slots + i, c, sorted_sum(&mut scratch) / denom);
                }
            }
        }
        Ok(self.push(Op::OtherSlotsMean { x: x.0, n_slots }, y))
    }

    /// Mean over each consecutive group of `n_slots` rows.
    pub fn slot_mean(&mut self, x: NodeId, n_slots: usize) -> Result<NodeId> {
        self.check_grouped("slot_mean", x, n_slots)?;
        let (rows, cols) = self.shape(x);
        let groups = rows / n_slots;
        let mut y = Matrix::zeros(groups, cols);
        let mut scratch = vec![0.0; n_slots];
        for g in 0..groups {
            for c in 0..cols {
                for (j, s) in scratch.iter_mut().enumerate() {
                    *s = self.nodes[x.0].value.at(g * n_slots + j, c);
                }
                y.set(g, c, sorted_sum(&mut scratch) / n_slots as f64);
            }
        }
        Ok(self.push(Op::SlotMean { x: x.0, n_slots }, y))
    }

    /// Per-group dot-product scores: out[(g,i), j] = a.row(g,i) . b.row(g,j).
    pub fn block_scores(&mut self, a: NodeId, b: NodeId, n_slots: usize) -> Result<NodeId> {
        self.check_grouped("block_scores", a, n_slots)?;
        if self.shape(a) != self.shape(b) {
            return Err(NumError::ShapeMismatch {
                op: "block_scores",
                detail: format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            });
        }
        let (rows, cols) = self.shape(a);
        let groups = rows / n_slots;
        let mut y = Matrix::zeros(rows, n_slots);
        for g in 0..groups {
            for i in 0..n_slots {
                for j in 0..n_slots {
                    let mut dot = 0.0;
                    for c in 0..cols {
                        dot += self.nodes[a.0].value.at(g * n_slots + i, c)
                            * self.nodes[b.0].value.at(g * n_slots + j, c);
                    }
                    y.set(g * n_slots + i, j, dot);
                }
            }
        }
        Ok(self.push(Op::BlockScores { a: a.0, b: b.0, n_slots }, y))
    }

    /// Per-group attention combine: out.row(g,i) = sum_j attn[(g,i),j] v.row(g,j),
    /// with the sum over j taken in canonical order.
    pub fn block_combine(&mut self, attn: NodeId, v: NodeId, n_slots: usize) -> Result<NodeId> {
        self.check_grouped("block_combine", v, n_slots)?;
        let (vr, vc) = self.shape(v);
        let (ar, ac) = self.shape(attn);
        if ar != vr || ac != n_slots {
            return Err(NumError::ShapeMismatch {
                op: "block_combine",
                detail: format!("attn {}x{}, v {}x{}, n_slots {}", ar, ac, vr, vc, n_slots),
            });
        }
        let groups = vr / n_slots;
        let mut y = Matrix::zeros(vr, vc);
        let mut scratch = vec![0.0; n_slots];
        for g in 0..groups {
            for i in 0..n_slots {
                for c in 0..vc {
                    for (j, s) in scratch.iter_mut().enumerate() {
                        *s = self.nodes[attn.0].value.at(g * n_slots + i, j)
                            * self.nodes[v.0].value.at(g * n_slots + j, c);
                    }
                    y.set(g * n_slots + i, c, sorted_sum(&mut scratch));
                }
            }
        }
        Ok(self.push(Op::BlockCombine { attn: attn.0, v: v.0, n_slots }, y))
    }

    /// Row-wise softmax with max subtraction; the denominator is summed in
    /// canonical order so that permuting columns permutes outputs exactly.
    pub fn softmax_rows(&mut self, x: NodeId) -> NodeId {
        let (rows, cols) = self.shape(x);
        let mut y = Matrix::zeros(rows, cols);
        let mut scratch = vec![0.0; cols];
        for r in 0..rows {
            let row = self.nodes[x.0].value.row(r);
            let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            for (s, &v) in scratch.iter_mut().zip(row) {
                *s = (v - m).exp();
            }
            let exps = scratch.clone();
            let denom = sorted_sum(&mut scratch);
            for (c, e) in exps.iter().enumerate() {
                y.set(r, c, e / denom);
            }
        }
        self.push(Op::SoftmaxRows { x: x.0 }, y)
    }

    /// Mean softmax cross-entropy over rows, returned as a 1x1 node.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let (rows, cols) = self.shape(logits);
        if targets.len() != rows {
            return Err(NumError::ShapeMismatch {
                op: "softmax_cross_entropy",
                detail: format!("{} targets for {} rows", targets.len(), rows),
            });
        }
        if rows == 0 {
            return Err(NumError::EmptyInput { op: "softmax_cross_entropy" });
        }
        for (r, &t) in targets.iter().enumerate() {
            if t >= cols {
                return Err(NumError::TargetOutOfRange { row: r, target: t, classes: cols });
            }
        }
        let mut probs = Matrix::zeros(rows, cols);
        let mut total = 0.0;
        for r in 0..rows {
            let row = self.nodes[logits.0].value.row(r);
            let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let mut denom = 0.0;
            for &v in row {
                denom += (v - m).exp();
            }
            let row_vals = row.to_vec();
            for (c, &v) in row_vals.iter().enumerate() {
                probs.set(r, c, (v - m).exp() / denom);
            }
            // -log p_t = m + log(sum exp(x - m)) - x_t
            total += m + denom.ln() - row_vals[targets[r]];
        }
        let loss = total / rows as f64;
        Ok(self.push(
            Op::SoftmaxCrossEntropy { logits: logits.0, targets: targets.to_vec(), probs },
            Matrix::scalar(loss),
        ))
    }

    /// Reverse pass from `loss` (must be 1x1). Parameter gradients are
    /// accumulated into `store`. The tape is consumed: a second call without
    /// re-recording is an error.
    pub fn backward(&mut self, loss: NodeId, store: &mut ParamStore) -> Result<()> {
        if self.consumed {
            return Err(NumError::DoubleBackward);
        }
        self.consumed = true;
        let (lr, lc) = self.shape(loss);
        if (lr, lc) != (1, 1) {
            return Err(NumError::NonScalarLoss { rows: lr, cols: lc });
        }

        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[idx].op {
                Op::Input => {}
                Op::Param(p) => {
                    store.grad_by_index_mut(*p).add_assign(&g);
                }
                Op::Linear { x, w, b } => {
                    let (x, w, b) = (*x, *w, *b);
                    let dx = g.matmul_nt(&self.nodes[w].value);
                    let dw = self.nodes[x].value.matmul_tn(&g);
                    let mut db = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for c in 0..g.cols() {
                            db.set(0, c, db.at(0, c) + g.at(r, c));
                        }
                    }
                    accumulate(&mut grads, x, dx);
                    accumulate(&mut grads, w, dw);
                    accumulate(&mut grads, b, db);
                }
                Op::Matmul { a, b } => {
                    let (a, b) = (*a, *b);
                    let da = g.matmul_nt(&self.nodes[b].value);
                    let db = self.nodes[a].value.matmul_tn(&g);
                    accumulate(&mut grads, a, da);
                    accumulate(&mut grads, b, db);
                }
                Op::Relu { x } => {
                    let x = *x;
                    let mut dx = g;
                    for (d, &v) in dx.as_mut_slice().iter_mut().zip(self.nodes[x].value.as_slice()) {
                        if v <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut grads, x, dx);
                }
                Op::ConcatCols { xs } => {
                    let xs = xs.clone();
                    let mut offset = 0;
                    for x in xs {
                        let (r, c) = self.nodes[x].value.shape();
                        let mut dx = Matrix::zeros(r, c);
                        for row in 0..r {
                            dx.row_mut(row).copy_from_slice(&g.row(row)[offset..offset + c]);
                        }
                        offset += c;
                        accumulate(&mut grads, x, dx);
                    }
                }
                Op::MeanList { xs } => {
                    let xs = xs.clone();
                    let k = xs.len() as f64;
                    for x in xs {
                        let mut dx = g.clone();
                        for v in dx.as_mut_slice() {
                            *v /= k;
                        }
                        accumulate(&mut grads, x, dx);
                    }
                }
                Op::Add { a, b } => {
                    let (a, b) = (*a, *b);
                    accumulate(&mut grads, a, g.clone());
                    accumulate(&mut grads, b, g);
                }
                Op::Scale { x, factor } => {
                    let (x, f) = (*x, *factor);
                    let mut dx = g;
                    for v in dx.as_mut_slice() {
                        *v *= f;
                    }
                    accumulate(&mut grads, x, dx);
                }
                Op::Sum { x } => {
                    let x = *x;
                    let (r, c) = self.nodes[x].value.shape();
                    let mut dx = Matrix::zeros(r, c);
                    dx.fill(g.scalar_value());
                    accumulate(&mut grads, x, dx);
                }
                Op::GatherRows { table, indices } => {
                    let (table, indices) = (*table, indices.clone());
                    let (tr, tc) = self.nodes[table].value.shape();
                    let mut dt = Matrix::zeros(tr, tc);
                    for (r, &i) in indices.iter().enumerate() {
                        for c in 0..tc {
                            dt.set(i, c, dt.at(i, c) + g.at(r, c));
                        }
                    }
                    accumulate(&mut grads, table, dt);
                }
                Op::Reindex { x, mapping, .. } => {
                    let (x, mapping) = (*x, mapping.clone());
                    let (r, c) = self.nodes[x].value.shape();
                    let mut dx = Matrix::zeros(r, c);
                    for (i, &m) in mapping.iter().enumerate() {
                        dx.as_mut_slice()[m] += g.as_slice()[i];
                    }
                    accumulate(&mut grads, x, dx);
                }
                Op::OtherSlotsMean { x, n_slots } => {
                    let (x, n) = (*x, *n_slots);
                    let (rows, cols) = self.nodes[x].value.shape();
                    let groups = rows / n;
                    let denom = (n - 1) as f64;
                    let mut dx = Matrix::zeros(rows, cols);
                    for gi in 0..groups {
                        for c in 0..cols {
                            let mut tot = 0.0;
                            for i in 0..n {
                                tot += g.at(gi * n + i, c);
                            }
                            for j in 0..n {
                                let own = g.at(gi * n + j, c);
                                dx.set(gi * n + j, c, (tot - own) / denom);
                            }
                        }
                    }
                    accumulate(&mut grads, x, dx);
                }
                Op::SlotMean { x, n_slots } => {
                    let (x, n) = (*x, *n_slots);
                    let (rows, cols) = self.nodes[x].value.shape();
                    let groups = rows / n;
                    let mut dx = Matrix::zeros(rows, cols);
                    for gi in 0..groups {
                        for j in 0..n {
                            for c in 0..cols {
                                dx.set(gi * n + j, c, g.at(gi, c) / n as f64);
                            }
                        }
                    }
                    accumulate(&mut grads, x, dx);
                }
                Op::BlockScores { a, b, n_slots } => {
                    let (a, b, n) = (*a, *b, *n_slots);
                    let (rows, cols) = self.nodes[a].value.shape();
                    let groups = rows / n;
                    let mut da = Matrix::zeros(rows, cols);
                    let mut db = Matrix::zeros(rows, cols);
                    for gi in 0..groups {
                        for i in 0..n {
                            for j in 0..n {
                                let gij = g.at(gi * n + i, j);
                                if gij == 0.0 {
                                    continue;
                                }
                                for c in 0..cols {
                                    let av = self.nodes[a].value.at(gi * n + i, c);
                                    let bv = self.nodes[b].value.at(gi * n + j, c);
                                    da.set(gi * n + i, c, da.at(gi * n + i, c) + gij * bv);
                                    db.set(gi * n + j, c, db.at(gi * n + j, c) + gij * av);
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, a, da);
                    accumulate(&mut grads, b, db);
                }
                Op::BlockCombine { attn, v, n_slots } => {
                    let (attn, v, n) = (*attn, *v, *n_slots);
                    let (rows, cols) = self.nodes[v].value.shape();
                    let groups = rows / n;
                    let mut dattn = Matrix::zeros(rows, n);
                    let mut dv = Matrix::zeros(rows, cols);
                    for gi in 0..groups {
                        for i in 0..n {
                            for j in 0..n {
                                let mut dot = 0.0;
                                for c in 0..cols {
                                    dot += g.at(gi * n + i, c) * self.nodes[v].value.at(gi * n + j, c);
                                }
                                dattn.set(gi * n + i, j, dot);
                                let w = self.nodes[attn].value.at(gi * n + i, j);
                                if w != 0.0 {
                                    for c in 0..cols {
                                        dv.set(gi * n + j, c, dv.at(gi * n + j, c) + w * g.at(gi * n + i, c));
                                    }
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, attn, dattn);
                    accumulate(&mut grads, v, dv);
                }
                Op::SoftmaxRows { x } => {
                    let x = *x;
                    let p = self.nodes[idx].value.clone();
                    let (rows, cols) = p.shape();
                    let mut dx = Matrix::zeros(rows, cols);
                    for r in 0..rows {
                        let mut dot = 0.0;
                        for c in 0..cols {
                            dot += g.at(r, c) * p.at(r, c);
                        }
                        for c in 0..cols {
                            dx.set(r, c, p.at(r, c) * (g.at(r, c) - dot));
                        }
                    }
                    accumulate(&mut grads, x, dx);
                }
                Op::SoftmaxCrossEntropy { logits, targets, probs } => {
                    let logits = *logits;
                    let scale = g.scalar_value() / probs.rows() as f64;
                    let mut dx = probs.clone();
                    for (r, &t) in targets.iter().enumerate() {
                        dx.set(r, t, dx.at(r, t) - 1.0);
                    }
                    for v in dx.as_mut_slice() {
                        *v *= scale;
                    }
                    accumulate(&mut grads, logits, dx);
                }
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Matrix>], idx: usize, delta: Matrix) {
    match &mut grads[idx] {
        Some(g) => g.add_assign(&delta),
        slot => *slot = Some(delta),
    }
}

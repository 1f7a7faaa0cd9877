use super::{Grads, Params, Result, Tensor, TensorError};
use rand::Rng;
use std::collections::BTreeMap;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Train mode activates dropout; eval mode makes it the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Transpose(Var),
    SliceCols { x: Var, start: usize },
    SliceRows { x: Var, start: usize },
    HCat(Vec<Var>),
    VCat(Vec<Var>),
    MeanRows(Var),
    Sum(Var),
    Softmax { x: Var, axis: usize },
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Dropout { x: Var, mask: Vec<f64> },
    CrossEntropy { logits: Var, labels: Vec<usize>, weights: Vec<f64>, total_weight: f64 },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations in execution order; [`Tape::backward`] walks them in
/// reverse. A tape supports exactly one backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    consumed: bool,
}

fn shape_err(op: &'static str, detail: impl Into<String>) -> TensorError {
    TensorError::Shape { op, detail: detail.into() }
}

fn accumulate(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
    slot.get_or_insert_with(|| vec![0.0; len])
}

fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
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

    /// Gradient of the loss with respect to `v`, available after [`Tape::backward`].
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Some(Tensor { shape: self.nodes[v.0].value.shape.clone(), data: g.clone() })
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Places every tensor of `params` on the tape as a trainable leaf.
    pub fn bind(&mut self, params: &Params) -> BTreeMap<String, Var> {
        params.iter().map(|(name, t)| (name.clone(), self.param(t.clone()))).collect()
    }

    /// Collects gradients for the bound parameters. Parameters that the loss
    /// never reached get an all-zero gradient.
    pub fn collect_grads(&self, bound: &BTreeMap<String, Var>) -> Grads {
        bound
            .iter()
            .map(|(name, &v)| {
                let g = self.grad(v).unwrap_or_else(|| Tensor::zeros(self.value(v).shape()));
                (name.clone(), g)
            })
            .collect()
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: op_name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    fn matrix_dims(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        let s = self.value(v).shape();
        if s.len() != 2 {
            return Err(shape_err(op, format!("expected a matrix, got shape {s:?}")));
        }
        Ok((s[0], s[1]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix_dims(a, "matmul")?;
        let (k2, n) = self.matrix_dims(b, "matmul")?;
        if k != k2 {
            return Err(shape_err("matmul", format!("[{m}x{k}] * [{k2}x{n}]")));
        }
        let ad = &self.value(a).data;
        let bd = &self.value(b).data;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = ad[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &bd[p * n..(p + 1) * n];
                for (o, &bv) in row.iter_mut().zip(brow) {
                    *o += aip * bv;
                }
            }
        }
        self.push("matmul", Tensor { shape: vec![m, n], data: out }, Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(shape_err("add", format!("{sa:?} vs {sb:?}")));
        }
        let data = self.value(a).data.iter().zip(&self.value(b).data).map(|(x, y)| x + y).collect();
        let shape = sa.to_vec();
        self.push("add", Tensor { shape, data }, Op::Add(a, b), &[a, b])
    }

    /// Adds the vector `b` (length = last axis of `x`) to every row of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let cols = self.value(x).cols();
        if self.value(b).len() != cols {
            return Err(shape_err("add_row", format!("row length {cols} vs bias {}", self.value(b).len())));
        }
        let bd = &self.value(b).data;
        let data = self.value(x).data.chunks(cols).flat_map(|r| r.iter().zip(bd).map(|(v, c)| v + c)).collect();
        let shape = self.value(x).shape.clone();
        self.push("add_row", Tensor { shape, data }, Op::AddRow(x, b), &[x, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(shape_err("mul", format!("{sa:?} vs {sb:?}")));
        }
        let data = self.value(a).data.iter().zip(&self.value(b).data).map(|(x, y)| x * y).collect();
        let shape = sa.to_vec();
        self.push("mul", Tensor { shape, data }, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let t = self.value(x);
        let value = Tensor { shape: t.shape.clone(), data: t.data.iter().map(|v| v * c).collect() };
        self.push("scale", value, Op::Scale(x, c), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let value = Tensor { shape: t.shape.clone(), data: t.data.iter().map(|v| v.max(0.0)).collect() };
        self.push("relu", value, Op::Relu(x), &[x])
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.matrix_dims(x, "transpose")?;
        let d = &self.value(x).data;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = d[i * n + j];
            }
        }
        self.push("transpose", Tensor { shape: vec![n, m], data: out }, Op::Transpose(x), &[x])
    }

    /// Columns `start..start + len` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = self.matrix_dims(x, "slice_cols")?;
        if start + len > n || len == 0 {
            return Err(shape_err("slice_cols", format!("{start}..{} of {n} columns", start + len)));
        }
        let d = &self.value(x).data;
        let data = (0..m).flat_map(|i| d[i * n + start..i * n + start + len].iter().copied()).collect();
        self.push("slice_cols", Tensor { shape: vec![m, len], data }, Op::SliceCols { x, start }, &[x])
    }

    /// Rows `start..start + len` of a matrix.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = self.matrix_dims(x, "slice_rows")?;
        if start + len > m || len == 0 {
            return Err(shape_err("slice_rows", format!("{start}..{} of {m} rows", start + len)));
        }
        let data = self.value(x).data[start * n..(start + len) * n].to_vec();
        self.push("slice_rows", Tensor { shape: vec![len, n], data }, Op::SliceRows { x, start }, &[x])
    }

    /// Concatenates matrices with equal row counts side by side.
    pub fn hcat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| shape_err("hcat", "no inputs"))?;
        let (m, _) = self.matrix_dims(first, "hcat")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (pm, pn) = self.matrix_dims(p, "hcat")?;
            if pm != m {
                return Err(shape_err("hcat", format!("row counts {m} vs {pm}")));
            }
            widths.push(pn);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * total);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data[i * w..(i + 1) * w]);
            }
        }
        self.push("hcat", Tensor { shape: vec![m, total], data }, Op::HCat(parts.to_vec()), parts)
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vcat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| shape_err("vcat", "no inputs"))?;
        let (_, n) = self.matrix_dims(first, "vcat")?;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let (pm, pn) = self.matrix_dims(p, "vcat")?;
            if pn != n {
                return Err(shape_err("vcat", format!("column counts {n} vs {pn}")));
            }
            rows += pm;
            data.extend_from_slice(&self.value(p).data);
        }
        self.push("vcat", Tensor { shape: vec![rows, n], data }, Op::VCat(parts.to_vec()), parts)
    }

    /// Average over rows: `[m x n] -> [1 x n]`.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.matrix_dims(x, "mean_rows")?;
        let d = &self.value(x).data;
        let mut out = vec![0.0; n];
        for r in d.chunks(n) {
            for (o, v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= m as f64);
        self.push("mean_rows", Tensor { shape: vec![1, n], data: out }, Op::MeanRows(x), &[x])
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data.iter().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(x), &[x])
    }

    /// Softmax along `axis`, with max subtraction.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let t = self.value(x);
        if axis >= t.shape.len() {
            return Err(shape_err("softmax", format!("axis {axis} for shape {:?}", t.shape)));
        }
        let (outer, len, inner) = axis_split(&t.shape, axis);
        let mut out = vec![0.0; t.data.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |a: usize| (o * len + a) * inner + i;
                let max = (0..len).map(|a| t.data[idx(a)]).fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for a in 0..len {
                    let e = (t.data[idx(a)] - max).exp();
                    out[idx(a)] = e;
                    z += e;
                }
                for a in 0..len {
                    out[idx(a)] /= z;
                }
            }
        }
        let value = Tensor { shape: t.shape.clone(), data: out };
        self.push("softmax", value, Op::Softmax { x, axis }, &[x])
    }

    /// Normalises each row over the last axis, then applies `gain * xhat + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let t = self.value(x);
        let n = t.cols();
        if n < 2 {
            return Err(shape_err("layer_norm", "normalised axis needs at least 2 elements"));
        }
        if self.value(gain).len() != n || self.value(bias).len() != n {
            return Err(shape_err("layer_norm", format!("gain/bias length must be {n}")));
        }
        let g = &self.value(gain).data;
        let b = &self.value(bias).data;
        let mut xhat = Vec::with_capacity(t.data.len());
        let mut inv_std = Vec::with_capacity(t.rows());
        let mut out = Vec::with_capacity(t.data.len());
        for row in t.data.chunks(n) {
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let r = 1.0 / (var + eps).sqrt();
            inv_std.push(r);
            for (j, v) in row.iter().enumerate() {
                let h = (v - mean) * r;
                xhat.push(h);
                out.push(g[j] * h + b[j]);
            }
        }
        let value = Tensor { shape: t.shape.clone(), data: out };
        self.push("layer_norm", value, Op::LayerNorm { x, gain, bias, xhat, inv_std }, &[x, gain, bias])
    }

    /// Inverted dropout: in train mode each element is zeroed with
    /// probability `p` and survivors are scaled by `1 / (1 - p)`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, mode: Mode, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::Invalid(format!("dropout rate {p} outside [0, 1)")));
        }
        if mode == Mode::Eval || p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let t = self.value(x);
        let mask: Vec<f64> = (0..t.len()).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
        let data = t.data.iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor { shape: t.shape.clone(), data };
        self.push("dropout", value, Op::Dropout { x, mask }, &[x])
    }

    /// Mean negative log-likelihood of `labels` under row-wise softmax of
    /// `logits`. With `weights`, each row counts `weights[label]` and the sum
    /// is divided by the total weight.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize], weights: Option<&[f64]>) -> Result<Var> {
        let (m, c) = self.matrix_dims(logits, "cross_entropy")?;
        if labels.len() != m {
            return Err(shape_err("cross_entropy", format!("{m} rows vs {} labels", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(TensorError::Invalid(format!("label {bad} out of range for {c} classes")));
        }
        if let Some(w) = weights {
            if w.len() != c || w.iter().any(|v| !(*v >= 0.0)) {
                return Err(TensorError::Invalid("class weights must be nonnegative, one per class".into()));
            }
        }
        let d = &self.value(logits).data;
        let row_w: Vec<f64> = labels.iter().map(|&l| weights.map_or(1.0, |w| w[l])).collect();
        let total_weight: f64 = row_w.iter().sum();
        if total_weight <= 0.0 {
            return Err(TensorError::Invalid("total class weight is zero".into()));
        }
        let mut loss = 0.0;
        for (i, &l) in labels.iter().enumerate() {
            let row = &d[i * c..(i + 1) * c];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += row_w[i] * (lse - row[l]);
        }
        let value = Tensor::scalar(loss / total_weight);
        let op = Op::CrossEntropy { logits, labels: labels.to_vec(), weights: row_w, total_weight };
        self.push("cross_entropy", value, op, &[logits])
    }

    /// Back-propagates from the scalar `loss`. Fails on a second call.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.consumed {
            return Err(TensorError::TapeConsumed);
        }
        let shape = self.value(loss).shape().to_vec();
        if self.value(loss).len() != 1 {
            return Err(TensorError::NonScalarLoss(shape));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        for (g, node) in grads.iter_mut().zip(&self.nodes) {
            if !node.requires_grad {
                *g = None;
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let rg = |v: &Var| nodes[v.0].requires_grad;
        let len = |v: &Var| nodes[v.0].value.data.len();
        match &nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (nodes[a.0].value.shape[0], nodes[a.0].value.shape[1]);
                let n = nodes[b.0].value.shape[1];
                let ad = &nodes[a.0].value.data;
                let bd = &nodes[b.0].value.data;
                if rg(a) {
                    let ga = accumulate(&mut grads[a.0], m * k);
                    for i in 0..m {
                        let gi = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &bd[p * n..(p + 1) * n];
                            ga[i * k + p] += gi.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                }
                if rg(b) {
                    let gb = accumulate(&mut grads[b.0], k * n);
                    for i in 0..m {
                        let gi = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = ad[i * k + p];
                            if aip == 0.0 {
                                continue;
                            }
                            for (o, gv) in gb[p * n..(p + 1) * n].iter_mut().zip(gi) {
                                *o += aip * gv;
                            }
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if rg(v) {
                        let gv = accumulate(&mut grads[v.0], g.len());
                        gv.iter_mut().zip(g).for_each(|(o, x)| *o += x);
                    }
                }
            }
            Op::AddRow(x, b) => {
                if rg(x) {
                    let gx = accumulate(&mut grads[x.0], g.len());
                    gx.iter_mut().zip(g).for_each(|(o, v)| *o += v);
                }
                if rg(b) {
                    let n = len(b);
                    let gb = accumulate(&mut grads[b.0], n);
                    for row in g.chunks(n) {
                        gb.iter_mut().zip(row).for_each(|(o, v)| *o += v);
                    }
                }
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (&nodes[a.0].value.data, &nodes[b.0].value.data);
                if rg(a) {
                    let ga = accumulate(&mut grads[a.0], g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i] * bd[i];
                    }
                }
                if rg(b) {
                    let gb = accumulate(&mut grads[b.0], g.len());
                    for i in 0..g.len() {
                        gb[i] += g[i] * ad[i];
                    }
                }
            }
            Op::Scale(x, c) => {
                if rg(x) {
                    let gx = accumulate(&mut grads[x.0], g.len());
                    gx.iter_mut().zip(g).for_each(|(o, v)| *o += v * c);
                }
            }
            Op::Relu(x) => {
                if rg(x) {
                    let xd = &nodes[x.0].value.data;
                    let gx = accumulate(&mut grads[x.0], g.len());
                    for i in 0..g.len() {
                        if xd[i] > 0.0 {
                            gx[i] += g[i];
                        }
                    }
                }
            }
            Op::Transpose(x) => {
                if rg(x) {
                    let (m, n) = (nodes[x.0].value.shape[0], nodes[x.0].value.shape[1]);
                    let gx = accumulate(&mut grads[x.0], m * n);
                    for i in 0..m {
                        for j in 0..n {
                            gx[i * n + j] += g[j * m + i];
                        }
                    }
                }
            }
            Op::SliceCols { x, start } => {
                if rg(x) {
                    let n = nodes[x.0].value.shape[1];
                    let w = nodes[idx].value.shape[1];
                    let gx = accumulate(&mut grads[x.0], len(x));
                    for (i, row) in g.chunks(w).enumerate() {
                        for (j, v) in row.iter().enumerate() {
                            gx[i * n + start + j] += v;
                        }
                    }
                }
            }
            Op::SliceRows { x, start } => {
                if rg(x) {
                    let n = nodes[x.0].value.shape[1];
                    let gx = accumulate(&mut grads[x.0], len(x));
                    gx[start * n..start * n + g.len()].iter_mut().zip(g).for_each(|(o, v)| *o += v);
                }
            }
            Op::HCat(parts) => {
                let total = nodes[idx].value.shape[1];
                let mut offset = 0;
                for p in parts {
                    let w = nodes[p.0].value.shape[1];
                    if rg(p) {
                        let gp = accumulate(&mut grads[p.0], len(p));
                        for (i, row) in g.chunks(total).enumerate() {
                            for j in 0..w {
                                gp[i * w + j] += row[offset + j];
                            }
                        }
                    }
                    offset += w;
                }
            }
            Op::VCat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let l = len(p);
                    if rg(p) {
                        let gp = accumulate(&mut grads[p.0], l);
                        gp.iter_mut().zip(&g[offset..offset + l]).for_each(|(o, v)| *o += v);
                    }
                    offset += l;
                }
            }
            Op::MeanRows(x) => {
                if rg(x) {
                    let (m, n) = (nodes[x.0].value.shape[0], nodes[x.0].value.shape[1]);
                    let gx = accumulate(&mut grads[x.0], m * n);
                    for row in gx.chunks_mut(n) {
                        for (o, v) in row.iter_mut().zip(g) {
                            *o += v / m as f64;
                        }
                    }
                }
            }
            Op::Sum(x) => {
                if rg(x) {
                    let gx = accumulate(&mut grads[x.0], len(x));
                    gx.iter_mut().for_each(|o| *o += g[0]);
                }
            }
            Op::Softmax { x, axis } => {
                if rg(x) {
                    let y = &nodes[idx].value;
                    let (outer, l, inner) = axis_split(&y.shape, *axis);
                    let gx = accumulate(&mut grads[x.0], y.data.len());
                    for o in 0..outer {
                        for i in 0..inner {
                            let at = |a: usize| (o * l + a) * inner + i;
                            let dot: f64 = (0..l).map(|a| g[at(a)] * y.data[at(a)]).sum();
                            for a in 0..l {
                                gx[at(a)] += y.data[at(a)] * (g[at(a)] - dot);
                            }
                        }
                    }
                }
            }
            Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                let n = len(gain);
                let gd = &nodes[gain.0].value.data;
                if rg(gain) {
                    let gg = accumulate(&mut grads[gain.0], n);
                    for (row_g, row_h) in g.chunks(n).zip(xhat.chunks(n)) {
                        for j in 0..n {
                            gg[j] += row_g[j] * row_h[j];
                        }
                    }
                }
                if rg(bias) {
                    let gb = accumulate(&mut grads[bias.0], n);
                    for row_g in g.chunks(n) {
                        gb.iter_mut().zip(row_g).for_each(|(o, v)| *o += v);
                    }
                }
                if rg(x) {
                    let gx = accumulate(&mut grads[x.0], g.len());
                    let nf = n as f64;
                    for (r, (row_g, row_h)) in g.chunks(n).zip(xhat.chunks(n)).enumerate() {
                        let dh: Vec<f64> = row_g.iter().zip(gd).map(|(a, b)| a * b).collect();
                        let sum_dh: f64 = dh.iter().sum();
                        let sum_dh_h: f64 = dh.iter().zip(row_h).map(|(a, b)| a * b).sum();
                        for j in 0..n {
                            gx[r * n + j] += inv_std[r] / nf * (nf * dh[j] - sum_dh - row_h[j] * sum_dh_h);
                        }
                    }
                }
            }
            Op::Dropout { x, mask } => {
                if rg(x) {
                    let gx = accumulate(&mut grads[x.0], g.len());
                    for i in 0..g.len() {
                        gx[i] += g[i] * mask[i];
                    }
                }
            }
            Op::CrossEntropy { logits, labels, weights, total_weight } => {
                if rg(logits) {
                    let c = nodes[logits.0].value.shape[1];
                    let d = &nodes[logits.0].value.data;
                    let gl = accumulate(&mut grads[logits.0], d.len());
                    for (i, &l) in labels.iter().enumerate() {
                        let row = &d[i * c..(i + 1) * c];
                        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
                        let scale = g[0] * weights[i] / total_weight;
                        for j in 0..c {
                            let p = (row[j] - max).exp() / z;
                            let target = if j == l { 1.0 } else { 0.0 };
                            gl[i * c + j] += scale * (p - target);
                        }
                    }
                }
            }
        }
    }
}

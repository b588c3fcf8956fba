use crate::error::{Error, Result};

use super::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadMode {
    Valid,
    /// Zero rows split symmetrically, extra row on the right for even deficits.
    Same,
}

struct LstmSaved {
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

enum Op {
    Leaf,
    EmbedLookup { table: VarId, ids: Vec<usize> },
    Conv1d { x: VarId, filters: VarId, bias: VarId, pad: PadMode },
    Relu { x: VarId },
    MaxOverTime { x: VarId, argmax: Vec<usize> },
    Dense { x: VarId, w: VarId, b: VarId },
    ConcatVec { xs: Vec<VarId> },
    ConcatCols { xs: Vec<VarId> },
    Row { x: VarId, row: usize },
    SliceVec { x: VarId, start: usize },
    Mask { x: VarId, mask: Vec<f64> },
    LstmCell {
        x: VarId,
        h_prev: VarId,
        c_prev: VarId,
        wx: VarId,
        wh: VarId,
        b: VarId,
        saved: LstmSaved,
    },
    SoftmaxXent { logits: VarId, label: usize, probs: Vec<f64> },
    Select { x: VarId, index: usize },
    MeanOf { xs: Vec<VarId> },
    SumAll { x: VarId },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Record of executed primitives; one backward pass per forward tape.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    consumed: bool,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> VarId {
        self.nodes.push(Node { value, op });
        self.grads.push(None);
        VarId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: VarId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Record an input or parameter value.
    pub fn leaf(&mut self, t: Tensor) -> VarId {
        self.push(t, Op::Leaf)
    }

    /// Row gather: out row i = table row ids[i]. Gradient scatters additively.
    pub fn embed_lookup(&mut self, table: VarId, ids: &[usize]) -> Result<VarId> {
        let tab = self.value(table);
        if tab.rank() != 2 {
            return Err(Error::Shape("embed table must be rank 2".into()));
        }
        let (v, d) = (tab.shape[0], tab.shape[1]);
        if ids.is_empty() {
            return Err(Error::Shape("embed_lookup needs at least one id".into()));
        }
        let mut out = Tensor::zeros(&[ids.len(), d]);
        for (i, &id) in ids.iter().enumerate() {
            if id >= v {
                return Err(Error::Bounds(format!("token id {id} >= vocabulary rows {v}")));
            }
            out.row_mut(i).copy_from_slice(tab.row(id));
        }
        Ok(self.push(out, Op::EmbedLookup { table, ids: ids.to_vec() }))
    }

    /// 1-D convolution of x [L,D] with a bank of F filters [F,w,D] + bias [F].
    pub fn conv1d(&mut self, x: VarId, filters: VarId, bias: VarId, pad: PadMode) -> Result<VarId> {
        let (xl, xd) = {
            let t = self.value(x);
            if t.rank() != 2 {
                return Err(Error::Shape("conv1d input must be rank 2".into()));
            }
            (t.shape[0], t.shape[1])
        };
        let (nf, w, fd) = {
            let t = self.value(filters);
            if t.rank() != 3 {
                return Err(Error::Shape("conv1d filters must be rank 3 [F,w,D]".into()));
            }
            (t.shape[0], t.shape[1], t.shape[2])
        };
        if fd != xd {
            return Err(Error::Shape(format!("filter depth {fd} != input depth {xd}")));
        }
        if self.value(bias).shape != [nf] {
            return Err(Error::Shape("conv1d bias shape must be [F]".into()));
        }
        let (out_len, offset) = match pad {
            PadMode::Valid => {
                if w > xl {
                    return Err(Error::Shape(format!(
                        "window {w} exceeds input length {xl} in valid mode"
                    )));
                }
                (xl - w + 1, 0isize)
            }
            PadMode::Same => (xl, ((w - 1) / 2) as isize),
        };
        let mut out = Tensor::zeros(&[out_len, nf]);
        {
            let xs = &self.nodes[x.0].value;
            let fs = &self.nodes[filters.0].value;
            let bs = &self.nodes[bias.0].value;
            for t in 0..out_len {
                for f in 0..nf {
                    let mut acc = bs.data[f];
                    for i in 0..w {
                        let xi = t as isize + i as isize - offset;
                        if xi < 0 || xi >= xl as isize {
                            continue;
                        }
                        let xrow = xs.row(xi as usize);
                        let frow = &fs.data[(f * w + i) * fd..(f * w + i + 1) * fd];
                        for j in 0..fd {
                            acc += xrow[j] * frow[j];
                        }
                    }
                    *out.at2_mut(t, f) = acc;
                }
            }
        }
        Ok(self.push(out, Op::Conv1d { x, filters, bias, pad }))
    }

    pub fn relu(&mut self, x: VarId) -> VarId {
        let mut out = self.value(x).clone();
        for v in &mut out.data {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self.push(out, Op::Relu { x })
    }

    /// Column-wise max of x [L,F] -> [F]. Gradient routes to the first
    /// maximal row per column.
    pub fn max_over_time(&mut self, x: VarId) -> Result<VarId> {
        let t = self.value(x);
        if t.rank() != 2 {
            return Err(Error::Shape("max_over_time input must be rank 2".into()));
        }
        let (l, f) = (t.shape[0], t.shape[1]);
        let mut out = vec![f64::NEG_INFINITY; f];
        let mut argmax = vec![0usize; f];
        for ti in 0..l {
            for fi in 0..f {
                let v = t.at2(ti, fi);
                if v > out[fi] {
                    out[fi] = v;
                    argmax[fi] = ti;
                }
            }
        }
        Ok(self.push(Tensor::vector(out), Op::MaxOverTime { x, argmax }))
    }

    /// out = xW + b for x [A], W [A,B], b [B].
    pub fn dense(&mut self, x: VarId, w: VarId, b: VarId) -> Result<VarId> {
        let a = {
            let t = self.value(x);
            if t.rank() != 1 {
                return Err(Error::Shape("dense input must be rank 1".into()));
            }
            t.shape[0]
        };
        let (wa, wb) = {
            let t = self.value(w);
            if t.rank() != 2 {
                return Err(Error::Shape("dense weight must be rank 2".into()));
            }
            (t.shape[0], t.shape[1])
        };
        if wa != a {
            return Err(Error::Shape(format!("dense: input dim {a} != weight rows {wa}")));
        }
        if self.value(b).shape != [wb] {
            return Err(Error::Shape("dense bias shape mismatch".into()));
        }
        let mut out = vec![0.0; wb];
        {
            let xs = &self.nodes[x.0].value;
            let ws = &self.nodes[w.0].value;
            let bs = &self.nodes[b.0].value;
            out.copy_from_slice(&bs.data);
            for i in 0..a {
                let xi = xs.data[i];
                if xi == 0.0 {
                    continue;
                }
                let wrow = ws.row(i);
                for j in 0..wb {
                    out[j] += xi * wrow[j];
                }
            }
        }
        Ok(self.push(Tensor::vector(out), Op::Dense { x, w, b }))
    }

    /// Concatenate rank-1 tensors.
    pub fn concat_vec(&mut self, xs: &[VarId]) -> Result<VarId> {
        let mut data = Vec::new();
        for &x in xs {
            let t = self.value(x);
            if t.rank() != 1 {
                return Err(Error::Shape("concat_vec expects rank-1 inputs".into()));
            }
            data.extend_from_slice(&t.data);
        }
        Ok(self.push(Tensor::vector(data), Op::ConcatVec { xs: xs.to_vec() }))
    }

    /// Concatenate rank-2 tensors with equal row counts along the feature axis.
    pub fn concat_cols(&mut self, xs: &[VarId]) -> Result<VarId> {
        let rows = self.value(xs[0]).shape[0];
        let mut total = 0;
        for &x in xs {
            let t = self.value(x);
            if t.rank() != 2 || t.shape[0] != rows {
                return Err(Error::Shape("concat_cols expects rank-2 inputs with equal rows".into()));
            }
            total += t.shape[1];
        }
        let mut out = Tensor::zeros(&[rows, total]);
        let mut col = 0;
        for &x in xs {
            let t = &self.nodes[x.0].value;
            let c = t.shape[1];
            for r in 0..rows {
                out.row_mut(r)[col..col + c].copy_from_slice(t.row(r));
            }
            col += c;
        }
        Ok(self.push(out, Op::ConcatCols { xs: xs.to_vec() }))
    }

    /// Extract row `row` of a rank-2 tensor as a vector.
    pub fn row_of(&mut self, x: VarId, row: usize) -> Result<VarId> {
        let t = self.value(x);
        if t.rank() != 2 || row >= t.shape[0] {
            return Err(Error::Shape(format!("row {row} out of range")));
        }
        let out = Tensor::vector(t.row(row).to_vec());
        Ok(self.push(out, Op::Row { x, row }))
    }

    /// Contiguous slice of a rank-1 tensor.
    pub fn slice_vec(&mut self, x: VarId, start: usize, len: usize) -> Result<VarId> {
        let t = self.value(x);
        if t.rank() != 1 || start + len > t.shape[0] {
            return Err(Error::Shape("slice_vec out of range".into()));
        }
        let out = Tensor::vector(t.data[start..start + len].to_vec());
        Ok(self.push(out, Op::SliceVec { x, start }))
    }

    /// Elementwise multiply by a fixed mask (dropout, variational recurrent
    /// dropout). The mask is not differentiated.
    pub fn apply_mask(&mut self, x: VarId, mask: &[f64]) -> Result<VarId> {
        let t = self.value(x);
        if t.len() != mask.len() {
            return Err(Error::Shape("mask length mismatch".into()));
        }
        let mut out = t.clone();
        for (v, m) in out.data.iter_mut().zip(mask) {
            *v *= m;
        }
        Ok(self.push(out, Op::Mask { x, mask: mask.to_vec() }))
    }

    /// One LSTM step. Weights: wx [D,4H], wh [H,4H], b [4H] with gate order
    /// [input, forget, cell, output]. Output is the concatenation [h_t ; c_t]
    /// (length 2H); slice with [`Tape::slice_vec`].
    pub fn lstm_cell(
        &mut self,
        x: VarId,
        h_prev: VarId,
        c_prev: VarId,
        wx: VarId,
        wh: VarId,
        b: VarId,
    ) -> Result<VarId> {
        let d = self.value(x).shape[0];
        let h = self.value(h_prev).shape[0];
        if self.value(c_prev).shape != [h] {
            return Err(Error::Shape("c_prev dim mismatch".into()));
        }
        if self.value(wx).shape != [d, 4 * h] || self.value(wh).shape != [h, 4 * h] {
            return Err(Error::Shape("lstm weight shape mismatch".into()));
        }
        if self.value(b).shape != [4 * h] {
            return Err(Error::Shape("lstm bias shape mismatch".into()));
        }
        // pre-activations a = x·wx + h_prev·wh + b
        let mut a = self.nodes[b.0].value.data.clone();
        {
            let xs = &self.nodes[x.0].value;
            let ws = &self.nodes[wx.0].value;
            for i in 0..d {
                let xi = xs.data[i];
                if xi == 0.0 {
                    continue;
                }
                let row = ws.row(i);
                for k in 0..4 * h {
                    a[k] += xi * row[k];
                }
            }
            let hs = &self.nodes[h_prev.0].value;
            let ws = &self.nodes[wh.0].value;
            for i in 0..h {
                let hi = hs.data[i];
                if hi == 0.0 {
                    continue;
                }
                let row = ws.row(i);
                for k in 0..4 * h {
                    a[k] += hi * row[k];
                }
            }
        }
        let mut gi = vec![0.0; h];
        let mut gf = vec![0.0; h];
        let mut gg = vec![0.0; h];
        let mut go = vec![0.0; h];
        for k in 0..h {
            gi[k] = sigmoid(a[k]);
            gf[k] = sigmoid(a[h + k]);
            gg[k] = a[2 * h + k].tanh();
            go[k] = sigmoid(a[3 * h + k]);
        }
        let cp = &self.nodes[c_prev.0].value.data;
        let mut out = vec![0.0; 2 * h];
        let mut tanh_c = vec![0.0; h];
        for k in 0..h {
            let c_new = gf[k] * cp[k] + gi[k] * gg[k];
            tanh_c[k] = c_new.tanh();
            out[k] = go[k] * tanh_c[k];
            out[h + k] = c_new;
        }
        let saved = LstmSaved { i: gi, f: gf, g: gg, o: go, tanh_c };
        Ok(self.push(
            Tensor::vector(out),
            Op::LstmCell { x, h_prev, c_prev, wx, wh, b, saved },
        ))
    }

    /// Numerically stabilized softmax cross-entropy against a hard label.
    /// Output is the scalar loss; probabilities via [`Tape::softmax_probs`].
    pub fn softmax_xent(&mut self, logits: VarId, label: usize) -> Result<VarId> {
        let t = self.value(logits);
        if t.rank() != 1 {
            return Err(Error::Shape("softmax_xent expects rank-1 logits".into()));
        }
        if label >= t.shape[0] {
            return Err(Error::Bounds(format!("label {label} >= classes {}", t.shape[0])));
        }
        let max = t.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = t.data.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let probs: Vec<f64> = exps.iter().map(|e| e / z).collect();
        let loss = -(probs[label].max(f64::MIN_POSITIVE)).ln();
        Ok(self.push(Tensor::scalar(loss), Op::SoftmaxXent { logits, label, probs }))
    }

    /// Probabilities computed by a previous [`Tape::softmax_xent`] node.
    pub fn softmax_probs(&self, loss: VarId) -> Result<Vec<f64>> {
        match &self.nodes[loss.0].op {
            Op::SoftmaxXent { probs, .. } => Ok(probs.clone()),
            _ => Err(Error::Usage("node is not a softmax_xent loss".into())),
        }
    }

    /// Pick one coordinate of a rank-1 tensor as a scalar.
    pub fn select(&mut self, x: VarId, index: usize) -> Result<VarId> {
        let t = self.value(x);
        if t.rank() != 1 || index >= t.shape[0] {
            return Err(Error::Bounds(format!("select index {index} out of range")));
        }
        let v = t.data[index];
        Ok(self.push(Tensor::scalar(v), Op::Select { x, index }))
    }

    /// Mean of scalar nodes.
    pub fn mean_of(&mut self, xs: &[VarId]) -> Result<VarId> {
        if xs.is_empty() {
            return Err(Error::Precondition("mean_of over empty set".into()));
        }
        let mut acc = 0.0;
        for &x in xs {
            let t = self.value(x);
            if t.len() != 1 {
                return Err(Error::Shape("mean_of expects scalar nodes".into()));
            }
            acc += t.data[0];
        }
        Ok(self.push(Tensor::scalar(acc / xs.len() as f64), Op::MeanOf { xs: xs.to_vec() }))
    }

    /// Sum of every element, as a scalar.
    pub fn sum_all(&mut self, x: VarId) -> VarId {
        let s: f64 = self.value(x).data.iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll { x })
    }

    /// Gradient of the last backward's root with respect to `id`. Zero
    /// tensor if the node does not influence the root.
    pub fn grad(&self, id: VarId) -> Tensor {
        self.grads[id.0]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(&self.nodes[id.0].value.shape))
    }

    /// Reverse-order accumulation from a scalar root. Touches each tape
    /// entry exactly once; errors on a second invocation.
    pub fn backward(&mut self, root: VarId) -> Result<()> {
        if self.consumed {
            return Err(Error::Usage("backward already run on this tape".into()));
        }
        self.consumed = true;
        if self.nodes[root.0].value.len() != 1 {
            return Err(Error::Precondition("backward root must be scalar".into()));
        }
        let nodes = &self.nodes;
        let grads = &mut self.grads;
        ensure(grads, nodes, root.0).data[0] = 1.0;
        for idx in (0..nodes.len()).rev() {
            let Some(out_grad) = grads[idx].take() else { continue };
            let node = &nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::EmbedLookup { table, ids } => {
                    let d = node.value.shape[1];
                    let g = ensure(grads, nodes, table.0);
                    for (i, &id) in ids.iter().enumerate() {
                        let src = &out_grad.data[i * d..(i + 1) * d];
                        let dst = g.row_mut(id);
                        for j in 0..d {
                            dst[j] += src[j];
                        }
                    }
                }
                Op::Conv1d { x, filters, bias, pad } => {
                    let (out_len, nf) = (node.value.shape[0], node.value.shape[1]);
                    let fshape = &nodes[filters.0].value.shape;
                    let (w, fd) = (fshape[1], fshape[2]);
                    let xl = nodes[x.0].value.shape[0];
                    let offset = match pad {
                        PadMode::Valid => 0isize,
                        PadMode::Same => ((w - 1) / 2) as isize,
                    };
                    {
                        let g = ensure(grads, nodes, bias.0);
                        for t in 0..out_len {
                            for f in 0..nf {
                                g.data[f] += out_grad.at2(t, f);
                            }
                        }
                    }
                    {
                        let xs = &nodes[x.0].value;
                        let g = ensure(grads, nodes, filters.0);
                        for t in 0..out_len {
                            for i in 0..w {
                                let xi = t as isize + i as isize - offset;
                                if xi < 0 || xi >= xl as isize {
                                    continue;
                                }
                                let xrow = xs.row(xi as usize);
                                for f in 0..nf {
                                    let go = out_grad.at2(t, f);
                                    if go == 0.0 {
                                        continue;
                                    }
                                    let frow = &mut g.data[(f * w + i) * fd..(f * w + i + 1) * fd];
                                    for j in 0..fd {
                                        frow[j] += xrow[j] * go;
                                    }
                                }
                            }
                        }
                    }
                    {
                        let fs = &nodes[filters.0].value;
                        let g = ensure(grads, nodes, x.0);
                        for t in 0..out_len {
                            for i in 0..w {
                                let xi = t as isize + i as isize - offset;
                                if xi < 0 || xi >= xl as isize {
                                    continue;
                                }
                                for f in 0..nf {
                                    let go = out_grad.at2(t, f);
                                    if go == 0.0 {
                                        continue;
                                    }
                                    let frow = &fs.data[(f * w + i) * fd..(f * w + i + 1) * fd];
                                    let xrow = g.row_mut(xi as usize);
                                    for j in 0..fd {
                                        xrow[j] += frow[j] * go;
                                    }
                                }
                            }
                        }
                    }
                }
                Op::Relu { x } => {
                    let vals = &nodes[x.0].value;
                    let g = ensure(grads, nodes, x.0);
                    for k in 0..out_grad.data.len() {
                        if vals.data[k] > 0.0 {
                            g.data[k] += out_grad.data[k];
                        }
                    }
                }
                Op::MaxOverTime { x, argmax } => {
                    let g = ensure(grads, nodes, x.0);
                    for (f, &t) in argmax.iter().enumerate() {
                        *g.at2_mut(t, f) += out_grad.data[f];
                    }
                }
                Op::Dense { x, w, b } => {
                    let (a, bdim) = {
                        let ws = &nodes[w.0].value;
                        (ws.shape[0], ws.shape[1])
                    };
                    {
                        let g = ensure(grads, nodes, b.0);
                        for j in 0..bdim {
                            g.data[j] += out_grad.data[j];
                        }
                    }
                    {
                        let xs = &nodes[x.0].value;
                        let g = ensure(grads, nodes, w.0);
                        for i in 0..a {
                            let xi = xs.data[i];
                            if xi == 0.0 {
                                continue;
                            }
                            let row = g.row_mut(i);
                            for j in 0..bdim {
                                row[j] += xi * out_grad.data[j];
                            }
                        }
                    }
                    {
                        let ws = &nodes[w.0].value;
                        let g = ensure(grads, nodes, x.0);
                        for i in 0..a {
                            let row = ws.row(i);
                            let mut acc = 0.0;
                            for j in 0..bdim {
                                acc += row[j] * out_grad.data[j];
                            }
                            g.data[i] += acc;
                        }
                    }
                }
                Op::ConcatVec { xs } => {
                    let mut start = 0;
                    for &xv in xs {
                        let len = nodes[xv.0].value.len();
                        let g = ensure(grads, nodes, xv.0);
                        for k in 0..len {
                            g.data[k] += out_grad.data[start + k];
                        }
                        start += len;
                    }
                }
                Op::ConcatCols { xs } => {
                    let rows = node.value.shape[0];
                    let mut col = 0;
                    for &xv in xs {
                        let c = nodes[xv.0].value.shape[1];
                        let g = ensure(grads, nodes, xv.0);
                        for r in 0..rows {
                            let src = &out_grad.row(r)[col..col + c];
                            let dst = g.row_mut(r);
                            for j in 0..c {
                                dst[j] += src[j];
                            }
                        }
                        col += c;
                    }
                }
                Op::Row { x, row } => {
                    let g = ensure(grads, nodes, x.0);
                    let dst = g.row_mut(*row);
                    for j in 0..out_grad.data.len() {
                        dst[j] += out_grad.data[j];
                    }
                }
                Op::SliceVec { x, start } => {
                    let g = ensure(grads, nodes, x.0);
                    for k in 0..out_grad.data.len() {
                        g.data[*start + k] += out_grad.data[k];
                    }
                }
                Op::Mask { x, mask } => {
                    let g = ensure(grads, nodes, x.0);
                    for k in 0..mask.len() {
                        g.data[k] += out_grad.data[k] * mask[k];
                    }
                }
                Op::LstmCell { x, h_prev, c_prev, wx, wh, b, saved } => {
                    let h = saved.i.len();
                    let cp = &nodes[c_prev.0].value.data;
                    let mut da = vec![0.0; 4 * h];
                    let mut dc_prev = vec![0.0; h];
                    for k in 0..h {
                        let dh = out_grad.data[k];
                        let dc_out = out_grad.data[h + k];
                        let (gi, gf, gg, go, tc) =
                            (saved.i[k], saved.f[k], saved.g[k], saved.o[k], saved.tanh_c[k]);
                        let d_o = dh * tc;
                        let dc = dc_out + dh * go * (1.0 - tc * tc);
                        let d_i = dc * gg;
                        let d_g = dc * gi;
                        let d_f = dc * cp[k];
                        dc_prev[k] = dc * gf;
                        da[k] = d_i * gi * (1.0 - gi);
                        da[h + k] = d_f * gf * (1.0 - gf);
                        da[2 * h + k] = d_g * (1.0 - gg * gg);
                        da[3 * h + k] = d_o * go * (1.0 - go);
                    }
                    {
                        let g = ensure(grads, nodes, c_prev.0);
                        for k in 0..h {
                            g.data[k] += dc_prev[k];
                        }
                    }
                    {
                        let g = ensure(grads, nodes, b.0);
                        for k in 0..4 * h {
                            g.data[k] += da[k];
                        }
                    }
                    let d = nodes[x.0].value.shape[0];
                    {
                        let xs = &nodes[x.0].value;
                        let g = ensure(grads, nodes, wx.0);
                        for i in 0..d {
                            let xi = xs.data[i];
                            if xi == 0.0 {
                                continue;
                            }
                            let row = g.row_mut(i);
                            for k in 0..4 * h {
                                row[k] += xi * da[k];
                            }
                        }
                    }
                    {
                        let ws = &nodes[wx.0].value;
                        let g = ensure(grads, nodes, x.0);
                        for i in 0..d {
                            let row = ws.row(i);
                            let mut acc = 0.0;
                            for k in 0..4 * h {
                                acc += row[k] * da[k];
                            }
                            g.data[i] += acc;
                        }
                    }
                    {
                        let hs = &nodes[h_prev.0].value;
                        let g = ensure(grads, nodes, wh.0);
                        for i in 0..h {
                            let hi = hs.data[i];
                            if hi == 0.0 {
                                continue;
                            }
                            let row = g.row_mut(i);
                            for k in 0..4 * h {
                                row[k] += hi * da[k];
                            }
                        }
                    }
                    {
                        let ws = &nodes[wh.0].value;
                        let g = ensure(grads, nodes, h_prev.0);
                        for i in 0..h {
                            let row = ws.row(i);
                            let mut acc = 0.0;
                            for k in 0..4 * h {
                                acc += row[k] * da[k];
                            }
                            g.data[i] += acc;
                        }
                    }
                }
                Op::SoftmaxXent { logits, label, probs } => {
                    let dl = out_grad.data[0];
                    let g = ensure(grads, nodes, logits.0);
                    for (k, p) in probs.iter().enumerate() {
                        let onehot = if k == *label { 1.0 } else { 0.0 };
                        g.data[k] += dl * (p - onehot);
                    }
                }
                Op::Select { x, index } => {
                    let g = ensure(grads, nodes, x.0);
                    g.data[*index] += out_grad.data[0];
                }
                Op::MeanOf { xs } => {
                    let scale = out_grad.data[0] / xs.len() as f64;
                    for &xv in xs {
                        let g = ensure(grads, nodes, xv.0);
                        g.data[0] += scale;
                    }
                }
                Op::SumAll { x } => {
                    let g = ensure(grads, nodes, x.0);
                    for v in &mut g.data {
                        *v += out_grad.data[0];
                    }
                }
            }
            grads[idx] = Some(out_grad);
        }
        Ok(())
    }
}

fn ensure<'a>(grads: &'a mut [Option<Tensor>], nodes: &[Node], id: usize) -> &'a mut Tensor {
    grads[id].get_or_insert_with(|| Tensor::zeros(&nodes[id].value.shape))
}

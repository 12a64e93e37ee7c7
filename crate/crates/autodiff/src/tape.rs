//! Eager tape: every op computes its value on application and records enough
//! to replay the chain rule in reverse. A tape is single-threaded; backward
//! visits each node exactly once in reverse topological (construction) order.

use crate::kernels;
use crate::tensor::Tensor;
use crate::AdError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    MatMul,
    Conv2d { stride: (usize, usize), padding: (usize, usize) },
    Upsample2xW,
    Relu,
    Add,
    MulScalar(f64),
    Concat { axis: usize },
    Slice { axis: usize, start: usize },
    Bias { axis: usize },
    L1Loss,
    MseLoss,
    SoftmaxCrossEntropy { targets: Vec<i64> },
    Embedding { indices: Vec<usize> },
    LayerNorm { eps: f64 },
    Softmax,
    Transpose,
    Permute { perm: Vec<usize> },
    Reshape,
    StraightThrough,
}

struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    value: Tensor,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

fn permute_data(src: &[f64], shape: &[usize], perm: &[usize]) -> Vec<f64> {
    let rank = shape.len();
    let mut src_strides = vec![1usize; rank];
    for i in (0..rank - 1).rev() {
        src_strides[i] = src_strides[i + 1] * shape[i + 1];
    }
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let mut out = vec![0.0; src.len()];
    let mut idx = vec![0usize; rank];
    for o in out.iter_mut() {
        let mut off = 0;
        for (i, &p) in perm.iter().enumerate() {
            off += idx[i] * src_strides[p];
        }
        *o = src[off];
        for i in (0..rank).rev() {
            idx[i] += 1;
            if idx[i] < out_shape[i] {
                break;
            }
            idx[i] = 0;
        }
    }
    out
}

fn mismatch(op: &'static str, lhs: &[usize], rhs: &[usize]) -> AdError {
    AdError::ShapeMismatch { op, lhs: lhs.to_vec(), rhs: rhs.to_vec() }
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, value: Tensor) -> NodeId {
        let requires_grad = match op {
            Op::Input => false,
            _ => inputs.iter().any(|i| self.nodes[i.0].requires_grad),
        };
        self.nodes.push(Node { op, inputs, value, requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { op: Op::Input, inputs: vec![], value, requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.input(value, false)
    }

    // ---- primitives ----

    /// Matrix product on the last two axes; leading (batch) axes must match.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AdError> {
        let (sa, sb) = (self.value(a).shape().to_vec(), self.value(b).shape().to_vec());
        if sa.len() < 2 || sb.len() != sa.len() || sa[..sa.len() - 2] != sb[..sb.len() - 2] {
            return Err(mismatch("matmul", &sa, &sb));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (k2, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        if k != k2 {
            return Err(mismatch("matmul", &sa, &sb));
        }
        let batch: usize = sa[..sa.len() - 2].iter().product();
        let mut out = vec![0.0; batch * m * n];
        let (da, db) = (self.value(a).data(), self.value(b).data());
        for i in 0..batch {
            kernels::matmul_acc(
                &da[i * m * k..(i + 1) * m * k],
                &db[i * k * n..(i + 1) * k * n],
                &mut out[i * m * n..(i + 1) * m * n],
                m,
                k,
                n,
            );
        }
        let mut shape = sa[..sa.len() - 2].to_vec();
        shape.extend([m, n]);
        let value = Tensor::new(&shape, out)?;
        Ok(self.push(Op::MatMul, vec![a, b], value))
    }

    /// 2D convolution, x: (N, C_in, H, W), w: (C_out, C_in, KH, KW), zero
    /// padding.
    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<NodeId, AdError> {
        let sx = self.value(x).shape().to_vec();
        let sw = self.value(w).shape().to_vec();
        if sx.len() != 4 || sw.len() != 4 || sx[1] != sw[1] {
            return Err(mismatch("conv2d", &sx, &sw));
        }
        let (n, cin, h, wd) = (sx[0], sx[1], sx[2], sx[3]);
        let (cout, kh, kw) = (sw[0], sw[2], sw[3]);
        if h + 2 * padding.0 < kh || wd + 2 * padding.1 < kw {
            return Err(mismatch("conv2d", &sx, &sw));
        }
        let oh = (h + 2 * padding.0 - kh) / stride.0 + 1;
        let ow = (wd + 2 * padding.1 - kw) / stride.1 + 1;
        let col_rows = cin * kh * kw;
        let spatial = oh * ow;
        let mut cols = vec![0.0; col_rows * spatial];
        let mut out = vec![0.0; n * cout * spatial];
        let dx = self.value(x).data().to_vec();
        let dw = self.value(w).data().to_vec();
        for i in 0..n {
            kernels::im2col(
                &dx[i * cin * h * wd..(i + 1) * cin * h * wd],
                cin,
                h,
                wd,
                kh,
                kw,
                stride,
                padding,
                &mut cols,
            );
            kernels::matmul_acc(
                &dw,
                &cols,
                &mut out[i * cout * spatial..(i + 1) * cout * spatial],
                cout,
                col_rows,
                spatial,
            );
        }
        let value = Tensor::new(&[n, cout, oh, ow], out)?;
        Ok(self.push(Op::Conv2d { stride, padding }, vec![x, w], value))
    }

    /// Nearest-neighbor x2 upsampling along the last (width) axis.
    pub fn upsample2x_w(&mut self, x: NodeId) -> Result<NodeId, AdError> {
        let s = self.value(x).shape().to_vec();
        let w = *s.last().unwrap();
        let rows = self.value(x).numel() / w;
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(rows * w * 2);
        for r in 0..rows {
            for &v in &src[r * w..(r + 1) * w] {
                out.push(v);
                out.push(v);
            }
        }
        let mut shape = s.clone();
        *shape.last_mut().unwrap() = w * 2;
        let value = Tensor::new(&shape, out)?;
        Ok(self.push(Op::Upsample2xW, vec![x], value))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let mut v = self.value(x).clone();
        for e in v.data_mut() {
            if *e < 0.0 {
                *e = 0.0;
            }
        }
        self.push(Op::Relu, vec![x], v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AdError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(mismatch("add", self.value(a).shape(), self.value(b).shape()));
        }
        let mut v = self.value(a).clone();
        for (e, &r) in v.data_mut().iter_mut().zip(self.nodes[b.0].value.data()) {
            *e += r;
        }
        Ok(self.push(Op::Add, vec![a, b], v))
    }

    pub fn mul_scalar(&mut self, x: NodeId, s: f64) -> NodeId {
        let mut v = self.value(x).clone();
        for e in v.data_mut() {
            *e *= s;
        }
        self.push(Op::MulScalar(s), vec![x], v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AdError> {
        let nb = self.mul_scalar(b, -1.0);
        self.add(a, nb)
    }

    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> Result<NodeId, AdError> {
        if parts.is_empty() {
            return Err(AdError::BadArg("concat of zero tensors".into()));
        }
        let first = self.value(parts[0]).shape().to_vec();
        if axis >= first.len() {
            return Err(AdError::BadArg(format!("concat axis {axis} out of range")));
        }
        let mut total = 0;
        for &p in parts {
            let s = self.value(p).shape();
            if s.len() != first.len()
                || s.iter().zip(&first).enumerate().any(|(i, (a, b))| i != axis && a != b)
            {
                return Err(mismatch("concat", &first, s));
            }
            total += s[axis];
        }
        let outer: usize = first[..axis].iter().product();
        let mut shape = first.clone();
        shape[axis] = total;
        let inner_out: usize = shape[axis..].iter().product();
        let mut out = vec![0.0; outer * inner_out];
        let mut offset = 0;
        for &p in parts {
            let s = self.value(p).shape();
            let chunk: usize = s[axis..].iter().product();
            let src = self.value(p).data();
            for o in 0..outer {
                out[o * inner_out + offset..o * inner_out + offset + chunk]
                    .copy_from_slice(&src[o * chunk..(o + 1) * chunk]);
            }
            offset += chunk;
        }
        let value = Tensor::new(&shape, out)?;
        Ok(self.push(Op::Concat { axis }, parts.to_vec(), value))
    }

    pub fn slice(
        &mut self,
        x: NodeId,
        axis: usize,
        start: usize,
        len: usize,
    ) -> Result<NodeId, AdError> {
        let s = self.value(x).shape().to_vec();
        if axis >= s.len() || start + len > s[axis] {
            return Err(AdError::BadArg(format!(
                "slice [{start}, {}) on axis {axis} of {s:?}",
                start + len
            )));
        }
        let outer: usize = s[..axis].iter().product();
        let inner: usize = s[axis + 1..].iter().product();
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * s[axis] + start) * inner;
            out.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut shape = s;
        shape[axis] = len;
        let value = Tensor::new(&shape, out)?;
        Ok(self.push(Op::Slice { axis, start }, vec![x], value))
    }

    /// Adds a 1-D bias vector along the given axis.
    pub fn bias(&mut self, x: NodeId, b: NodeId, axis: usize) -> Result<NodeId, AdError> {
        let s = self.value(x).shape().to_vec();
        let sb = self.value(b).shape().to_vec();
        if axis >= s.len() || sb != vec![s[axis]] {
            return Err(mismatch("bias", &s, &sb));
        }
        let inner: usize = s[axis + 1..].iter().product();
        let mut v = self.value(x).clone();
        let bd = self.nodes[b.0].value.data().to_vec();
        for (i, e) in v.data_mut().iter_mut().enumerate() {
            *e += bd[(i / inner) % s[axis]];
        }
        Ok(self.push(Op::Bias { axis }, vec![x, b], v))
    }

    /// Mean absolute error, scalar.
    pub fn l1_loss(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AdError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(mismatch("l1_loss", self.value(a).shape(), self.value(b).shape()));
        }
        let n = self.value(a).numel() as f64;
        let v: f64 = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / n;
        Ok(self.push(Op::L1Loss, vec![a, b], Tensor::scalar(v)))
    }

    /// Mean squared error, scalar.
    pub fn mse_loss(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AdError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(mismatch("mse_loss", self.value(a).shape(), self.value(b).shape()));
        }
        let n = self.value(a).numel() as f64;
        let v: f64 = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            / n;
        Ok(self.push(Op::MseLoss, vec![a, b], Tensor::scalar(v)))
    }

    /// Mean negative log-likelihood over rows whose target is >= 0.
    /// logits: (N, V); targets.len() == N, -1 masks a row out of the loss.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: NodeId,
        targets: &[i64],
    ) -> Result<NodeId, AdError> {
        let s = self.value(logits).shape().to_vec();
        if s.len() != 2 || s[0] != targets.len() {
            return Err(mismatch("softmax_cross_entropy", &s, &[targets.len()]));
        }
        let (_n, v) = (s[0], s[1]);
        let data = self.value(logits).data();
        let mut total = 0.0;
        let mut count = 0usize;
        for (i, &t) in targets.iter().enumerate() {
            if t < 0 {
                continue;
            }
            if t as usize >= v {
                return Err(AdError::BadArg(format!("target {t} out of range {v}")));
            }
            let row = &data[i * v..(i + 1) * v];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let logsum = row.iter().map(|x| (x - max).exp()).sum::<f64>().ln() + max;
            total += logsum - row[t as usize];
            count += 1;
        }
        if count == 0 {
            return Err(AdError::BadArg("all targets masked".into()));
        }
        let value = Tensor::scalar(total / count as f64);
        Ok(self.push(Op::SoftmaxCrossEntropy { targets: targets.to_vec() }, vec![logits], value))
    }

    /// Row gather: out[i] = table[indices[i]].
    pub fn embedding(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId, AdError> {
        let s = self.value(table).shape().to_vec();
        if s.len() != 2 {
            return Err(mismatch("embedding", &s, &[indices.len()]));
        }
        let d = s[1];
        let src = self.value(table).data();
        let mut out = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= s[0] {
                return Err(AdError::BadArg(format!("embedding index {i} out of {}", s[0])));
            }
            out.extend_from_slice(&src[i * d..(i + 1) * d]);
        }
        let value = Tensor::new(&[indices.len(), d], out)?;
        Ok(self.push(Op::Embedding { indices: indices.to_vec() }, vec![table], value))
    }

    /// Layer normalization over the last axis with learned gain and bias.
    pub fn layer_norm(
        &mut self,
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        eps: f64,
    ) -> Result<NodeId, AdError> {
        let s = self.value(x).shape().to_vec();
        let d = *s.last().unwrap();
        if self.value(gain).shape() != [d] || self.value(bias).shape() != [d] {
            return Err(mismatch("layer_norm", &s, self.value(gain).shape()));
        }
        let rows = self.value(x).numel() / d;
        let src = self.value(x).data();
        let g = self.value(gain).data().to_vec();
        let b = self.value(bias).data().to_vec();
        let mut out = vec![0.0; rows * d];
        for r in 0..rows {
            let row = &src[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for j in 0..d {
                out[r * d + j] = (row[j] - mean) * inv * g[j] + b[j];
            }
        }
        let value = Tensor::new(&s, out)?;
        Ok(self.push(Op::LayerNorm { eps }, vec![x, gain, bias], value))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).shape().to_vec();
        let d = *s.last().unwrap();
        let rows = self.value(x).numel() / d;
        let src = self.value(x).data();
        let mut out = vec![0.0; rows * d];
        for r in 0..rows {
            let row = &src[r * d..(r + 1) * d];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..d {
                let e = (row[j] - max).exp();
                out[r * d + j] = e;
                sum += e;
            }
            for j in 0..d {
                out[r * d + j] /= sum;
            }
        }
        let value = Tensor::new(&s, out).expect("same shape");
        self.push(Op::Softmax, vec![x], value)
    }

    /// Swaps the last two axes.
    pub fn transpose(&mut self, x: NodeId) -> Result<NodeId, AdError> {
        let s = self.value(x).shape().to_vec();
        if s.len() < 2 {
            return Err(AdError::BadArg("transpose needs rank >= 2".into()));
        }
        let (m, n) = (s[s.len() - 2], s[s.len() - 1]);
        let batch: usize = s[..s.len() - 2].iter().product();
        let src = self.value(x).data();
        let mut out = vec![0.0; src.len()];
        for bidx in 0..batch {
            let b = bidx * m * n;
            for i in 0..m {
                for j in 0..n {
                    out[b + j * m + i] = src[b + i * n + j];
                }
            }
        }
        let mut shape = s;
        let l = shape.len();
        shape.swap(l - 2, l - 1);
        let value = Tensor::new(&shape, out)?;
        Ok(self.push(Op::Transpose, vec![x], value))
    }

    /// Reorders axes; `perm[i]` names the source axis placed at position `i`.
    pub fn permute(&mut self, x: NodeId, perm: &[usize]) -> Result<NodeId, AdError> {
        let s = self.value(x).shape().to_vec();
        let mut seen = vec![false; s.len()];
        if perm.len() != s.len() || perm.iter().any(|&p| p >= s.len() || std::mem::replace(&mut seen[p.min(s.len() - 1)], true)) {
            return Err(AdError::BadArg(format!("permute {perm:?} on rank {}", s.len())));
        }
        let shape: Vec<usize> = perm.iter().map(|&p| s[p]).collect();
        let out = permute_data(self.value(x).data(), &s, perm);
        let value = Tensor::new(&shape, out)?;
        Ok(self.push(Op::Permute { perm: perm.to_vec() }, vec![x], value))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId, AdError> {
        let value = self.value(x).reshaped(shape)?;
        Ok(self.push(Op::Reshape, vec![x], value))
    }

    /// Forward takes the quantized value, backward passes gradients straight
    /// through to the pre-quantization input.
    pub fn straight_through(&mut self, z: NodeId, quantized: Tensor) -> Result<NodeId, AdError> {
        if self.value(z).shape() != quantized.shape() {
            return Err(mismatch("straight_through", self.value(z).shape(), quantized.shape()));
        }
        Ok(self.push(Op::StraightThrough, vec![z], quantized))
    }

    // ---- backward ----

    pub fn backward(&mut self, loss: NodeId) -> Result<(), AdError> {
        if self.value(loss).numel() != 1 {
            return Err(AdError::BadArg("backward from non-scalar".into()));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let Some(gy) = self.grads[idx].take() else { continue };
            if !self.nodes[idx].requires_grad && !matches!(self.nodes[idx].op, Op::Input) {
                self.grads[idx] = Some(gy);
                continue;
            }
            self.propagate(idx, &gy)?;
            self.grads[idx] = Some(gy);
        }
        Ok(())
    }

    fn acc(&mut self, id: NodeId, delta: Tensor) {
        match &mut self.grads[id.0] {
            Some(g) => {
                for (a, b) in g.data_mut().iter_mut().zip(delta.data()) {
                    *a += b;
                }
            }
            slot => *slot = Some(delta),
        }
    }

    fn propagate(&mut self, idx: usize, gy: &Tensor) -> Result<(), AdError> {
        let op = self.nodes[idx].op.clone();
        let inputs = self.nodes[idx].inputs.clone();
        match op {
            Op::Input => {}
            Op::MatMul => {
                let (a, b) = (inputs[0], inputs[1]);
                let sa = self.value(a).shape().to_vec();
                let sb = self.value(b).shape().to_vec();
                let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
                let n = sb[sb.len() - 1];
                let batch: usize = sa[..sa.len() - 2].iter().product();
                let mut ga = vec![0.0; self.value(a).numel()];
                let mut gb = vec![0.0; self.value(b).numel()];
                let da = self.value(a).data();
                let db = self.value(b).data();
                let dy = gy.data();
                for i in 0..batch {
                    // dA = dY * B^T ; dB = A^T * dY
                    kernels::matmul_nt_acc(
                        &dy[i * m * n..(i + 1) * m * n],
                        &db[i * k * n..(i + 1) * k * n],
                        &mut ga[i * m * k..(i + 1) * m * k],
                        m,
                        n,
                        k,
                    );
                    kernels::matmul_tn_acc(
                        &da[i * m * k..(i + 1) * m * k],
                        &dy[i * m * n..(i + 1) * m * n],
                        &mut gb[i * k * n..(i + 1) * k * n],
                        k,
                        m,
                        n,
                    );
                }
                let ta = Tensor::new(&sa, ga)?;
                let tb = Tensor::new(&sb, gb)?;
                self.acc(a, ta);
                self.acc(b, tb);
            }
            Op::Conv2d { stride, padding } => {
                let (x, w) = (inputs[0], inputs[1]);
                let sx = self.value(x).shape().to_vec();
                let sw = self.value(w).shape().to_vec();
                let (n, cin, h, wd) = (sx[0], sx[1], sx[2], sx[3]);
                let (cout, kh, kw) = (sw[0], sw[2], sw[3]);
                let oh = (h + 2 * padding.0 - kh) / stride.0 + 1;
                let ow = (wd + 2 * padding.1 - kw) / stride.1 + 1;
                let col_rows = cin * kh * kw;
                let spatial = oh * ow;
                let mut gx = vec![0.0; self.value(x).numel()];
                let mut gw = vec![0.0; self.value(w).numel()];
                let mut cols = vec![0.0; col_rows * spatial];
                let mut gcols = vec![0.0; col_rows * spatial];
                let dx = self.value(x).data().to_vec();
                let dw = self.value(w).data().to_vec();
                let dy = gy.data();
                for i in 0..n {
                    let dyi = &dy[i * cout * spatial..(i + 1) * cout * spatial];
                    kernels::im2col(
                        &dx[i * cin * h * wd..(i + 1) * cin * h * wd],
                        cin,
                        h,
                        wd,
                        kh,
                        kw,
                        stride,
                        padding,
                        &mut cols,
                    );
                    // dW += dY * cols^T
                    kernels::matmul_nt_acc(dyi, &cols, &mut gw, cout, spatial, col_rows);
                    // dcols = W^T * dY, scattered back into the image.
                    gcols.fill(0.0);
                    kernels::matmul_tn_acc(&dw, dyi, &mut gcols, col_rows, cout, spatial);
                    kernels::col2im_acc(
                        &gcols,
                        cin,
                        h,
                        wd,
                        kh,
                        kw,
                        stride,
                        padding,
                        &mut gx[i * cin * h * wd..(i + 1) * cin * h * wd],
                    );
                }
                let tx = Tensor::new(&sx, gx)?;
                let tw = Tensor::new(&sw, gw)?;
                self.acc(x, tx);
                self.acc(w, tw);
            }
            Op::Upsample2xW => {
                let x = inputs[0];
                let w = *self.value(x).shape().last().unwrap();
                let rows = self.value(x).numel() / w;
                let dy = gy.data();
                let mut gx = vec![0.0; rows * w];
                for r in 0..rows {
                    for j in 0..w {
                        gx[r * w + j] = dy[r * 2 * w + 2 * j] + dy[r * 2 * w + 2 * j + 1];
                    }
                }
                let t = Tensor::new(self.value(x).shape(), gx)?;
                self.acc(x, t);
            }
            Op::Relu => {
                let x = inputs[0];
                let mut gx = gy.clone();
                for (g, &v) in gx.data_mut().iter_mut().zip(self.nodes[x.0].value.data()) {
                    if v <= 0.0 {
                        *g = 0.0;
                    }
                }
                self.acc(x, gx);
            }
            Op::Add => {
                self.acc(inputs[0], gy.clone());
                self.acc(inputs[1], gy.clone());
            }
            Op::MulScalar(s) => {
                let mut gx = gy.clone();
                for g in gx.data_mut() {
                    *g *= s;
                }
                self.acc(inputs[0], gx);
            }
            Op::Concat { axis } => {
                let full = self.value(NodeId(idx)).shape().to_vec();
                let outer: usize = full[..axis].iter().product();
                let inner_out: usize = full[axis..].iter().product();
                let mut offset = 0;
                for &p in &inputs {
                    let s = self.value(p).shape().to_vec();
                    let chunk: usize = s[axis..].iter().product();
                    let mut gp = vec![0.0; self.value(p).numel()];
                    for o in 0..outer {
                        gp[o * chunk..(o + 1) * chunk].copy_from_slice(
                            &gy.data()[o * inner_out + offset..o * inner_out + offset + chunk],
                        );
                    }
                    offset += chunk;
                    let t = Tensor::new(&s, gp)?;
                    self.acc(p, t);
                }
            }
            Op::Slice { axis, start } => {
                let x = inputs[0];
                let sx = self.value(x).shape().to_vec();
                let sy = self.value(NodeId(idx)).shape().to_vec();
                let len = sy[axis];
                let outer: usize = sx[..axis].iter().product();
                let inner: usize = sx[axis + 1..].iter().product();
                let mut gx = vec![0.0; self.value(x).numel()];
                for o in 0..outer {
                    let base = (o * sx[axis] + start) * inner;
                    gx[base..base + len * inner]
                        .copy_from_slice(&gy.data()[o * len * inner..(o + 1) * len * inner]);
                }
                let t = Tensor::new(&sx, gx)?;
                self.acc(x, t);
            }
            Op::Bias { axis } => {
                let (x, b) = (inputs[0], inputs[1]);
                let s = self.value(x).shape().to_vec();
                let inner: usize = s[axis + 1..].iter().product();
                let mut gb = vec![0.0; s[axis]];
                for (i, &g) in gy.data().iter().enumerate() {
                    gb[(i / inner) % s[axis]] += g;
                }
                self.acc(x, gy.clone());
                let t = Tensor::new(&[s[axis]], gb)?;
                self.acc(b, t);
            }
            Op::L1Loss => {
                let (a, b) = (inputs[0], inputs[1]);
                let n = self.value(a).numel() as f64;
                let scale = gy.item() / n;
                let da = self.value(a).data();
                let db = self.value(b).data();
                let ga: Vec<f64> = da
                    .iter()
                    .zip(db)
                    .map(|(x, y)| scale * (x - y).signum() * if x == y { 0.0 } else { 1.0 })
                    .collect();
                let gb: Vec<f64> = ga.iter().map(|g| -g).collect();
                let sa = self.value(a).shape().to_vec();
                let ta = Tensor::new(&sa, ga)?;
                let tb = Tensor::new(&sa, gb)?;
                self.acc(a, ta);
                self.acc(b, tb);
            }
            Op::MseLoss => {
                let (a, b) = (inputs[0], inputs[1]);
                let n = self.value(a).numel() as f64;
                let scale = 2.0 * gy.item() / n;
                let da = self.value(a).data();
                let db = self.value(b).data();
                let ga: Vec<f64> = da.iter().zip(db).map(|(x, y)| scale * (x - y)).collect();
                let gb: Vec<f64> = ga.iter().map(|g| -g).collect();
                let sa = self.value(a).shape().to_vec();
                let ta = Tensor::new(&sa, ga)?;
                let tb = Tensor::new(&sa, gb)?;
                self.acc(a, ta);
                self.acc(b, tb);
            }
            Op::SoftmaxCrossEntropy { targets } => {
                let logits = inputs[0];
                let s = self.value(logits).shape().to_vec();
                let v = s[1];
                let count = targets.iter().filter(|&&t| t >= 0).count() as f64;
                let scale = gy.item() / count;
                let data = self.value(logits).data();
                let mut gx = vec![0.0; s[0] * v];
                for (i, &t) in targets.iter().enumerate() {
                    if t < 0 {
                        continue;
                    }
                    let row = &data[i * v..(i + 1) * v];
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let sum: f64 = row.iter().map(|x| (x - max).exp()).sum();
                    for j in 0..v {
                        let p = (row[j] - max).exp() / sum;
                        gx[i * v + j] = scale * (p - if j == t as usize { 1.0 } else { 0.0 });
                    }
                }
                let t = Tensor::new(&s, gx)?;
                self.acc(logits, t);
            }
            Op::Embedding { indices } => {
                let table = inputs[0];
                let s = self.value(table).shape().to_vec();
                let d = s[1];
                let mut gt = vec![0.0; self.value(table).numel()];
                for (r, &i) in indices.iter().enumerate() {
                    for j in 0..d {
                        gt[i * d + j] += gy.data()[r * d + j];
                    }
                }
                let t = Tensor::new(&s, gt)?;
                self.acc(table, t);
            }
            Op::LayerNorm { eps } => {
                let (x, gain, bias) = (inputs[0], inputs[1], inputs[2]);
                let s = self.value(x).shape().to_vec();
                let d = *s.last().unwrap();
                let rows = self.value(x).numel() / d;
                let src = self.value(x).data();
                let g = self.value(gain).data().to_vec();
                let dy = gy.data();
                let mut gx = vec![0.0; rows * d];
                let mut ggain = vec![0.0; d];
                let mut gbias = vec![0.0; d];
                for r in 0..rows {
                    let row = &src[r * d..(r + 1) * d];
                    let dyr = &dy[r * d..(r + 1) * d];
                    let mean = row.iter().sum::<f64>() / d as f64;
                    let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / d as f64;
                    let inv = 1.0 / (var + eps).sqrt();
                    let xhat: Vec<f64> = row.iter().map(|x| (x - mean) * inv).collect();
                    let mut mean_dxhat = 0.0;
                    let mut mean_dxhat_xhat = 0.0;
                    for j in 0..d {
                        ggain[j] += dyr[j] * xhat[j];
                        gbias[j] += dyr[j];
                        let dxhat = dyr[j] * g[j];
                        mean_dxhat += dxhat;
                        mean_dxhat_xhat += dxhat * xhat[j];
                    }
                    mean_dxhat /= d as f64;
                    mean_dxhat_xhat /= d as f64;
                    for j in 0..d {
                        let dxhat = dyr[j] * g[j];
                        gx[r * d + j] = inv * (dxhat - mean_dxhat - xhat[j] * mean_dxhat_xhat);
                    }
                }
                let tx = Tensor::new(&s, gx)?;
                let tg = Tensor::new(&[d], ggain)?;
                let tb = Tensor::new(&[d], gbias)?;
                self.acc(x, tx);
                self.acc(gain, tg);
                self.acc(bias, tb);
            }
            Op::Softmax => {
                let x = inputs[0];
                let y = self.value(NodeId(idx)).data().to_vec();
                let s = self.value(x).shape().to_vec();
                let d = *s.last().unwrap();
                let rows = y.len() / d;
                let dy = gy.data();
                let mut gx = vec![0.0; y.len()];
                for r in 0..rows {
                    let yr = &y[r * d..(r + 1) * d];
                    let dyr = &dy[r * d..(r + 1) * d];
                    let dot: f64 = yr.iter().zip(dyr).map(|(a, b)| a * b).sum();
                    for j in 0..d {
                        gx[r * d + j] = yr[j] * (dyr[j] - dot);
                    }
                }
                let t = Tensor::new(&s, gx)?;
                self.acc(x, t);
            }
            Op::Transpose => {
                let x = inputs[0];
                let sy = self.value(NodeId(idx)).shape().to_vec();
                let (m, n) = (sy[sy.len() - 2], sy[sy.len() - 1]);
                let batch: usize = sy[..sy.len() - 2].iter().product();
                let dy = gy.data();
                let mut gx = vec![0.0; dy.len()];
                for bi in 0..batch {
                    let b = bi * m * n;
                    for i in 0..m {
                        for j in 0..n {
                            gx[b + j * m + i] = dy[b + i * n + j];
                        }
                    }
                }
                let t = Tensor::new(self.value(x).shape(), gx)?;
                self.acc(x, t);
            }
            Op::Permute { perm } => {
                let x = inputs[0];
                let mut inverse = vec![0usize; perm.len()];
                for (i, &p) in perm.iter().enumerate() {
                    inverse[p] = i;
                }
                let sy = self.value(NodeId(idx)).shape().to_vec();
                let gx = permute_data(gy.data(), &sy, &inverse);
                let t = Tensor::new(self.value(x).shape(), gx)?;
                self.acc(x, t);
            }
            Op::Reshape => {
                let x = inputs[0];
                let t = Tensor::new(self.value(x).shape(), gy.data().to_vec())?;
                self.acc(x, t);
            }
            Op::StraightThrough => {
                self.acc(inputs[0], gy.clone());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_forward_and_grad_mask() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::new(&[3], vec![-1.0, 0.0, 2.0]).unwrap(), true);
        let y = tape.relu(x);
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);
        let t = tape.constant(Tensor::zeros(&[3]));
        let loss = tape.l1_loss(y, t).unwrap();
        tape.backward(loss).unwrap();
        // d|y|/dx = mask * sign(y)/3; only the positive entry passes.
        let g = tape.grad(x).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 1.0 / 3.0]);
    }

    #[test]
    fn identity_conv_is_identity() {
        let mut tape = Tape::new();
        let x = tape.input(
            Tensor::new(&[1, 1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
            false,
        );
        let w = tape.constant(Tensor::new(&[1, 1, 1, 1], vec![1.0]).unwrap());
        let y = tape.conv2d(x, w, (1, 1), (0, 0)).unwrap();
        assert_eq!(tape.value(y).data(), tape.value(x).data());
    }

    #[test]
    fn ones_kernel_sums_input() {
        let mut tape = Tape::new();
        let data: Vec<f64> = (1..=9).map(|v| v as f64).collect();
        let x = tape.input(Tensor::new(&[1, 1, 3, 3], data.clone()).unwrap(), false);
        let w = tape.constant(Tensor::new(&[1, 1, 3, 3], vec![1.0; 9]).unwrap());
        let y = tape.conv2d(x, w, (1, 1), (0, 0)).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 1, 1, 1]);
        assert_eq!(tape.value(y).item(), data.iter().sum::<f64>());
    }

    #[test]
    fn concat_slice_round_trip_partitions_gradient() {
        let mut tape = Tape::new();
        let a = tape.input(Tensor::new(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(), true);
        let b = tape.input(Tensor::new(&[2, 1], vec![5.0, 6.0]).unwrap(), true);
        let c = tape.concat(&[a, b], 1).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        let back = tape.slice(c, 1, 2, 1).unwrap();
        assert_eq!(tape.value(back).data(), &[5.0, 6.0]);
        let t = tape.constant(Tensor::zeros(&[2, 1]));
        let loss = tape.mse_loss(back, t).unwrap();
        tape.backward(loss).unwrap();
        // Gradient reaches only b; partition of unity.
        assert_eq!(tape.grad(a).unwrap().data(), &[0.0; 4]);
        let gb = tape.grad(b).unwrap();
        assert_eq!(gb.data(), &[5.0, 6.0]);
    }

    #[test]
    fn uniform_logits_ce_is_log_v() {
        let mut tape = Tape::new();
        let logits = tape.input(Tensor::zeros(&[1, 7]), true);
        let loss = tape.softmax_cross_entropy(logits, &[3]).unwrap();
        assert!((tape.value(loss).item() - (7.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn masked_rows_do_not_contribute() {
        let mut tape = Tape::new();
        let logits = tape.input(
            Tensor::new(&[2, 3], vec![0.0, 1.0, -1.0, 100.0, -5.0, 0.3]).unwrap(),
            true,
        );
        let loss = tape.softmax_cross_entropy(logits, &[1, -1]).unwrap();
        tape.backward(loss).unwrap();
        let g = tape.grad(logits).unwrap();
        assert_eq!(&g.data()[3..6], &[0.0, 0.0, 0.0]);
        let _ = loss;
    }

    #[test]
    fn straight_through_passes_gradient() {
        let mut tape = Tape::new();
        let z = tape.input(Tensor::new(&[2], vec![0.3, -0.8]).unwrap(), true);
        let q = Tensor::new(&[2], vec![1.0, -1.0]).unwrap();
        let y = tape.straight_through(z, q).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, -1.0]);
        let t = tape.constant(Tensor::zeros(&[2]));
        let loss = tape.mse_loss(y, t).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(z).unwrap().data(), &[1.0, -1.0]);
    }

    #[test]
    fn shape_errors_carry_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.input(Tensor::zeros(&[2, 3]), false);
        let b = tape.input(Tensor::zeros(&[4, 5]), false);
        match tape.matmul(a, b) {
            Err(AdError::ShapeMismatch { lhs, rhs, .. }) => {
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![4, 5]);
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }
}

//! Wengert-list reverse-mode differentiation over dense tensors.
//!
//! Every op appends a node holding its forward value. [`Tape::backward`]
//! walks the nodes in strict reverse order and returns one gradient per
//! registered parameter.

use std::collections::HashMap;

use rand::Rng;

use super::tensor::Tensor;
use super::NumericsError;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Index of a trainable tensor in a parameter store.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Affine { w: Var, x: Var, b: Var },
    MatVec { m: Var, v: Var },
    VecMat { a: Var, m: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddScalar { x: Var, s: Var },
    MulScalar { x: Var, s: Var },
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    LogClamp { x: Var, floor: f64 },
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Row { m: Var, i: usize },
    StackRows(Vec<Var>),
    MeanRows(Var),
    Sum(Var),
    Mean(Var),
    Dot(Var, Var),
    L2NormSq(Var),
    Index { x: Var, i: usize },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients of a scalar loss with respect to every parameter registered on
/// the tape that produced it.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    grads: HashMap<ParamId, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(&id)
    }

    pub fn contains(&self, id: ParamId) -> bool {
        self.grads.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ParamId, &Tensor)> {
        self.grads.iter()
    }

    /// Adds `other` into `self`, parameter by parameter.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (id, g) in &other.grads {
            match self.grads.get_mut(id) {
                Some(acc) => {
                    for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += b;
                    }
                }
                None => {
                    self.grads.insert(*id, g.clone());
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.grads.values_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn insert(&mut self, id: ParamId, grad: Tensor) {
        self.grads.insert(id, grad);
    }

    pub fn is_finite(&self) -> bool {
        self.grads.values().all(Tensor::is_finite)
    }
}

/// Operation record for one forward pass. Not `Sync`; one tape per thread.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(ParamId, Var)>,
    consumed: bool,
    clamp_hits: usize,
}

fn shape_err(op: &str, detail: String) -> NumericsError {
    NumericsError::Shape(format!("{op}: {detail}"))
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

    /// Number of `log_clamp` inputs that fell below their floor.
    pub fn clamp_hits(&self) -> usize {
        self.clamp_hits
    }

    fn push(&mut self, op: &'static str, value: Tensor, node: Op) -> Result<Var, NumericsError> {
        if !value.is_finite() {
            return Err(NumericsError::NonFinite(op));
        }
        self.nodes.push(Node { value, op: node });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var, NumericsError> {
        self.push("constant", value, Op::Leaf)
    }

    /// Registers a trainable leaf. Registering the same id twice returns the
    /// existing node so its gradient is accumulated once.
    pub fn param(&mut self, id: ParamId, value: &Tensor) -> Result<Var, NumericsError> {
        if let Some((_, v)) = self.params.iter().find(|(p, _)| *p == id) {
            return Ok(*v);
        }
        let v = self.push("param", value.clone(), Op::Leaf)?;
        self.params.push((id, v));
        Ok(v)
    }

    /// `w · x + b` with `w` of shape `[out, in]`.
    pub fn affine(&mut self, w: Var, x: Var, b: Var) -> Result<Var, NumericsError> {
        let (wt, xt, bt) = (self.value(w), self.value(x), self.value(b));
        if !wt.is_matrix() || wt.cols() != xt.len() || wt.rows() != bt.len() {
            return Err(shape_err(
                "affine",
                format!("w {:?}, x {:?}, b {:?}", wt.shape(), xt.shape(), bt.shape()),
            ));
        }
        let mut out = bt.data().to_vec();
        matvec_into(wt, xt.data(), &mut out);
        self.push("affine", Tensor::vector(out), Op::Affine { w, x, b })
    }

    /// `m · v` with `m` of shape `[n, k]`.
    pub fn matvec(&mut self, m: Var, v: Var) -> Result<Var, NumericsError> {
        let (mt, vt) = (self.value(m), self.value(v));
        if !mt.is_matrix() || mt.cols() != vt.len() {
            return Err(shape_err("matvec", format!("m {:?}, v {:?}", mt.shape(), vt.shape())));
        }
        let mut out = vec![0.0; mt.rows()];
        matvec_into(mt, vt.data(), &mut out);
        self.push("matvec", Tensor::vector(out), Op::MatVec { m, v })
    }

    /// `aᵀ · m`: the `a`-weighted sum of the rows of `m`.
    pub fn vecmat(&mut self, a: Var, m: Var) -> Result<Var, NumericsError> {
        let (at, mt) = (self.value(a), self.value(m));
        if !mt.is_matrix() || mt.rows() != at.len() {
            return Err(shape_err("vecmat", format!("a {:?}, m {:?}", at.shape(), mt.shape())));
        }
        let mut out = vec![0.0; mt.cols()];
        for (i, &ai) in at.data().iter().enumerate() {
            for (o, x) in out.iter_mut().zip(mt.row(i)) {
                *o += ai * x;
            }
        }
        self.push("vecmat", Tensor::vector(out), Op::VecMat { a, m })
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var, NumericsError> {
        let (at, bt) = (self.value(a), self.value(b));
        if !at.same_shape(bt) {
            return Err(shape_err(name, format!("{:?} vs {:?}", at.shape(), bt.shape())));
        }
        let data = at.data().iter().zip(bt.data()).map(|(x, y)| f(*x, *y)).collect();
        let value = Tensor::new(at.shape().to_vec(), data)?;
        self.push(name, value, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a one-element tensor `s` to every component of `x`.
    pub fn add_scalar(&mut self, x: Var, s: Var) -> Result<Var, NumericsError> {
        let st = self.value(s);
        if st.len() != 1 {
            return Err(shape_err("add_scalar", format!("s {:?}", st.shape())));
        }
        let sv = st.item();
        let value = map(self.value(x), |v| v + sv);
        self.push("add_scalar", value, Op::AddScalar { x, s })
    }

    /// Multiplies every component of `x` by the one-element tensor `s`.
    pub fn mul_scalar(&mut self, x: Var, s: Var) -> Result<Var, NumericsError> {
        let st = self.value(s);
        if st.len() != 1 {
            return Err(shape_err("mul_scalar", format!("s {:?}", st.shape())));
        }
        let sv = st.item();
        let value = map(self.value(x), |v| v * sv);
        self.push("mul_scalar", value, Op::MulScalar { x, s })
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var, NumericsError> {
        let value = map(self.value(x), |v| v * c);
        self.push("scale", value, Op::Scale(x, c))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var, NumericsError> {
        let value = map(self.value(x), f64::tanh);
        self.push("tanh", value, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var, NumericsError> {
        let value = map(self.value(x), sigmoid);
        self.push("sigmoid", value, Op::Sigmoid(x))
    }

    /// Softmax over all components of a vector.
    pub fn softmax(&mut self, x: Var) -> Result<Var, NumericsError> {
        let xt = self.value(x);
        if !xt.is_vector() {
            return Err(shape_err("softmax", format!("{:?}", xt.shape())));
        }
        let value = Tensor::vector(softmax(xt.data()));
        self.push("softmax", value, Op::Softmax(x))
    }

    /// `ln(max(x, floor))`; components below the floor get zero gradient.
    pub fn log_clamp(&mut self, x: Var, floor: f64) -> Result<Var, NumericsError> {
        let xt = self.value(x);
        let hits = xt.data().iter().filter(|&&v| v < floor).count();
        let value = map(xt, |v| v.max(floor).ln());
        self.clamp_hits += hits;
        self.push("log_clamp", value, Op::LogClamp { x, floor })
    }

    /// Concatenates the flattened inputs into one vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        if parts.is_empty() {
            return Err(shape_err("concat", "no inputs".into()));
        }
        let data: Vec<f64> = parts.iter().flat_map(|p| self.value(*p).data().to_vec()).collect();
        self.push("concat", Tensor::vector(data), Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var, NumericsError> {
        let xt = self.value(x);
        if len == 0 || start + len > xt.len() {
            return Err(shape_err("slice", format!("[{start}, {}) of {}", start + len, xt.len())));
        }
        let value = Tensor::vector(xt.data()[start..start + len].to_vec());
        self.push("slice", value, Op::Slice { x, start })
    }

    pub fn row(&mut self, m: Var, i: usize) -> Result<Var, NumericsError> {
        let mt = self.value(m);
        if !mt.is_matrix() || i >= mt.rows() {
            return Err(shape_err("row", format!("row {i} of {:?}", mt.shape())));
        }
        let value = Tensor::vector(mt.row(i).to_vec());
        self.push("row", value, Op::Row { m, i })
    }

    /// Stacks equally long vectors into a matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var, NumericsError> {
        let Some(first) = rows.first() else {
            return Err(shape_err("stack_rows", "no rows".into()));
        };
        let cols = self.value(*first).len();
        let mut data = Vec::with_capacity(cols * rows.len());
        for r in rows {
            let rt = self.value(*r);
            if rt.len() != cols {
                return Err(shape_err("stack_rows", format!("row of {} vs {cols}", rt.len())));
            }
            data.extend_from_slice(rt.data());
        }
        let value = Tensor::matrix(rows.len(), cols, data)?;
        self.push("stack_rows", value, Op::StackRows(rows.to_vec()))
    }

    /// Column-wise mean of a matrix.
    pub fn mean_rows(&mut self, m: Var) -> Result<Var, NumericsError> {
        let mt = self.value(m);
        if !mt.is_matrix() {
            return Err(shape_err("mean_rows", format!("{:?}", mt.shape())));
        }
        let n = mt.rows() as f64;
        let mut out = vec![0.0; mt.cols()];
        for i in 0..mt.rows() {
            for (o, x) in out.iter_mut().zip(mt.row(i)) {
                *o += x;
            }
        }
        out.iter_mut().for_each(|o| *o /= n);
        self.push("mean_rows", Tensor::vector(out), Op::MeanRows(m))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, NumericsError> {
        let value = Tensor::scalar(self.value(x).data().iter().sum());
        self.push("sum", value, Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var, NumericsError> {
        let xt = self.value(x);
        let value = Tensor::scalar(xt.data().iter().sum::<f64>() / xt.len() as f64);
        self.push("mean", value, Op::Mean(x))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (at, bt) = (self.value(a), self.value(b));
        if at.len() != bt.len() {
            return Err(shape_err("dot", format!("{} vs {}", at.len(), bt.len())));
        }
        let value = Tensor::scalar(at.data().iter().zip(bt.data()).map(|(x, y)| x * y).sum());
        self.push("dot", value, Op::Dot(a, b))
    }

    pub fn l2_norm_sq(&mut self, x: Var) -> Result<Var, NumericsError> {
        let value = Tensor::scalar(self.value(x).norm_sq());
        self.push("l2_norm_sq", value, Op::L2NormSq(x))
    }

    pub fn index(&mut self, x: Var, i: usize) -> Result<Var, NumericsError> {
        let xt = self.value(x);
        if i >= xt.len() {
            return Err(shape_err("index", format!("{i} of {}", xt.len())));
        }
        let value = Tensor::scalar(xt.data()[i]);
        self.push("index", value, Op::Index { x, i })
    }

    /// Inverted dropout: keeps each component with probability `keep_p` and
    /// rescales survivors by `1 / keep_p`. Identity when not training.
    pub fn dropout<R: Rng>(
        &mut self,
        x: Var,
        keep_p: f64,
        rng: &mut R,
        training: bool,
    ) -> Result<Var, NumericsError> {
        check_keep_p(keep_p)?;
        if !training || keep_p == 1.0 {
            return Ok(x);
        }
        let shape = self.value(x).shape().to_vec();
        let mask = dropout_mask(&shape, keep_p, rng);
        let m = self.constant(mask)?;
        self.mul(x, m)
    }

    /// Reverse sweep from a scalar `loss`. Parameters registered on this tape
    /// but not reachable from `loss` receive zero gradients.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, NumericsError> {
        if self.consumed {
            return Err(NumericsError::TapeConsumed);
        }
        if !self.value(loss).is_scalar() {
            return Err(NumericsError::NotScalar(self.value(loss).shape().to_vec()));
        }
        self.consumed = true;

        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = node.value.data();
            match &node.op {
                Op::Leaf => {
                    adj[idx] = Some(g);
                    continue;
                }
                Op::Affine { w, x, b } => {
                    let wt = &self.nodes[w.0].value;
                    let xt = self.nodes[x.0].value.data();
                    let cols = wt.cols();
                    let mut gw = vec![0.0; wt.len()];
                    let mut gx = vec![0.0; cols];
                    for (r, gr) in g.iter().enumerate() {
                        let wrow = wt.row(r);
                        for c in 0..cols {
                            gw[r * cols + c] = gr * xt[c];
                            gx[c] += wrow[c] * gr;
                        }
                    }
                    accumulate(&mut adj, *w, gw);
                    accumulate(&mut adj, *x, gx);
                    accumulate(&mut adj, *b, g);
                }
                Op::MatVec { m, v } => {
                    let mt = &self.nodes[m.0].value;
                    let vt = self.nodes[v.0].value.data();
                    let cols = mt.cols();
                    let mut gm = vec![0.0; mt.len()];
                    let mut gv = vec![0.0; cols];
                    for (r, gr) in g.iter().enumerate() {
                        let mrow = mt.row(r);
                        for c in 0..cols {
                            gm[r * cols + c] = gr * vt[c];
                            gv[c] += mrow[c] * gr;
                        }
                    }
                    accumulate(&mut adj, *m, gm);
                    accumulate(&mut adj, *v, gv);
                }
                Op::VecMat { a, m } => {
                    let at = self.nodes[a.0].value.data();
                    let mt = &self.nodes[m.0].value;
                    let cols = mt.cols();
                    let mut ga = vec![0.0; at.len()];
                    let mut gm = vec![0.0; mt.len()];
                    for (i, ai) in at.iter().enumerate() {
                        let mrow = mt.row(i);
                        ga[i] = mrow.iter().zip(&g).map(|(x, gc)| x * gc).sum();
                        for c in 0..cols {
                            gm[i * cols + c] = ai * g[c];
                        }
                    }
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *m, gm);
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, *a, g.clone());
                    accumulate(&mut adj, *b, g);
                }
                Op::Sub(a, b) => {
                    let neg = g.iter().map(|v| -v).collect();
                    accumulate(&mut adj, *a, g);
                    accumulate(&mut adj, *b, neg);
                }
                Op::Mul(a, b) => {
                    let at = self.nodes[a.0].value.data();
                    let bt = self.nodes[b.0].value.data();
                    let ga = g.iter().zip(bt).map(|(g, b)| g * b).collect();
                    let gb = g.iter().zip(at).map(|(g, a)| g * a).collect();
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::AddScalar { x, s } => {
                    let gs = vec![g.iter().sum()];
                    accumulate(&mut adj, *x, g);
                    accumulate(&mut adj, *s, gs);
                }
                Op::MulScalar { x, s } => {
                    let sv = self.nodes[s.0].value.item();
                    let xt = self.nodes[x.0].value.data();
                    let gs = vec![g.iter().zip(xt).map(|(g, x)| g * x).sum()];
                    let gx = g.iter().map(|g| g * sv).collect();
                    accumulate(&mut adj, *x, gx);
                    accumulate(&mut adj, *s, gs);
                }
                Op::Scale(x, c) => {
                    let gx = g.iter().map(|g| g * c).collect();
                    accumulate(&mut adj, *x, gx);
                }
                Op::Tanh(x) => {
                    let gx = g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect();
                    accumulate(&mut adj, *x, gx);
                }
                Op::Sigmoid(x) => {
                    let gx = g.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect();
                    accumulate(&mut adj, *x, gx);
                }
                Op::Softmax(x) => {
                    let gy: f64 = g.iter().zip(y).map(|(g, y)| g * y).sum();
                    let gx = g.iter().zip(y).map(|(g, y)| y * (g - gy)).collect();
                    accumulate(&mut adj, *x, gx);
                }
                Op::LogClamp { x, floor } => {
                    let xt = self.nodes[x.0].value.data();
                    let gx = g
                        .iter()
                        .zip(xt)
                        .map(|(g, x)| if *x < *floor { 0.0 } else { g / x })
                        .collect();
                    accumulate(&mut adj, *x, gx);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.nodes[p.0].value.len();
                        accumulate(&mut adj, *p, g[offset..offset + n].to_vec());
                        offset += n;
                    }
                }
                Op::Slice { x, start } => {
                    let mut gx = vec![0.0; self.nodes[x.0].value.len()];
                    gx[*start..*start + g.len()].copy_from_slice(&g);
                    accumulate(&mut adj, *x, gx);
                }
                Op::Row { m, i } => {
                    let mt = &self.nodes[m.0].value;
                    let cols = mt.cols();
                    let mut gm = vec![0.0; mt.len()];
                    gm[i * cols..(i + 1) * cols].copy_from_slice(&g);
                    accumulate(&mut adj, *m, gm);
                }
                Op::StackRows(rows) => {
                    let cols = node.value.cols();
                    for (i, r) in rows.iter().enumerate() {
                        accumulate(&mut adj, *r, g[i * cols..(i + 1) * cols].to_vec());
                    }
                }
                Op::MeanRows(m) => {
                    let mt = &self.nodes[m.0].value;
                    let n = mt.rows() as f64;
                    let gm = (0..mt.rows()).flat_map(|_| g.iter().map(|v| v / n)).collect();
                    accumulate(&mut adj, *m, gm);
                }
                Op::Sum(x) => {
                    let n = self.nodes[x.0].value.len();
                    accumulate(&mut adj, *x, vec![g[0]; n]);
                }
                Op::Mean(x) => {
                    let n = self.nodes[x.0].value.len();
                    accumulate(&mut adj, *x, vec![g[0] / n as f64; n]);
                }
                Op::Dot(a, b) => {
                    let at = self.nodes[a.0].value.data();
                    let bt = self.nodes[b.0].value.data();
                    let ga = bt.iter().map(|v| v * g[0]).collect();
                    let gb = at.iter().map(|v| v * g[0]).collect();
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::L2NormSq(x) => {
                    let xt = self.nodes[x.0].value.data();
                    let gx = xt.iter().map(|v| 2.0 * v * g[0]).collect();
                    accumulate(&mut adj, *x, gx);
                }
                Op::Index { x, i } => {
                    let mut gx = vec![0.0; self.nodes[x.0].value.len()];
                    gx[*i] = g[0];
                    accumulate(&mut adj, *x, gx);
                }
            }
        }

        let mut grads = Gradients::default();
        for (id, v) in &self.params {
            let value = &self.nodes[v.0].value;
            let data = adj
                .get_mut(v.0)
                .and_then(Option::take)
                .unwrap_or_else(|| vec![0.0; value.len()]);
            let g = Tensor::new(value.shape().to_vec(), data)?;
            if !g.is_finite() {
                return Err(NumericsError::NonFinite("gradient"));
            }
            grads.insert(*id, g);
        }
        Ok(grads)
    }
}

fn accumulate(adj: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
    match &mut adj[v.0] {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g),
    }
}

fn matvec_into(m: &Tensor, v: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o += m.row(r).iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let data = t.data().iter().map(|v| f(*v)).collect();
    Tensor::new(t.shape().to_vec(), data).expect("shape preserved")
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub(crate) fn check_keep_p(keep_p: f64) -> Result<(), NumericsError> {
    if keep_p > 0.0 && keep_p <= 1.0 {
        Ok(())
    } else {
        Err(NumericsError::KeepProbability(keep_p))
    }
}

pub(crate) fn dropout_mask<R: Rng>(shape: &[usize], keep_p: f64, rng: &mut R) -> Tensor {
    let n: usize = shape.iter().product();
    let scale = 1.0 / keep_p;
    let data = (0..n)
        .map(|_| if rng.random::<f64>() < keep_p { scale } else { 0.0 })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("mask shape")
}

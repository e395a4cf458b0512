//! Tape-based reverse-mode differentiation.
//!
//! A [`Tape`] records every primitive applied during a forward evaluation and
//! computes values eagerly through the kernels in [`super::tensor`]. Calling
//! [`Tape::backward`] on a scalar root replays the recorded operations in
//! reverse, accumulating exact adjoints for every node. Leaves are created
//! with [`Tape::input`] or [`Tape::param`]; everything else is derived.

use crate::error::{Error, Result};
use crate::numeric::tensor::{self, Tensor};

/// Index of a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Affine { w: NodeId, x: NodeId, b: NodeId },
    Relu { x: NodeId },
    Concat { xs: Vec<NodeId> },
    Scale { s: NodeId, x: NodeId },
    ScaleConst { x: NodeId, c: f64 },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Dot { a: NodeId, b: NodeId },
    MatMul { a: NodeId, b: NodeId },
    ModuleAffine { ws: Vec<NodeId>, bs: Vec<NodeId>, x: NodeId },
    RowSoftmax { x: NodeId },
    ColSoftmax { x: NodeId },
    LogSumExp { x: NodeId },
    Sum { x: NodeId },
    Slice { x: NodeId, offset: usize, len: usize },
    Reshape { x: NodeId },
    Lookup { table: NodeId, row: usize },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Adjoints produced by a backward pass, indexed by [`NodeId`].
pub struct Gradients {
    adjoints: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> &[f64] {
        &self.adjoints[id.index()]
    }

    pub fn tensor(&self, id: NodeId, like: &Tensor) -> Tensor {
        Tensor::matrix(like.rows(), like.cols(), self.adjoints[id.index()].clone())
            .expect("adjoint length matches node shape")
    }
}

/// Records a forward evaluation for reverse-mode differentiation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The value computed for a node during the forward pass.
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.index()].value
    }

    fn push(&mut self, op: Op, value: Tensor, name: &'static str) -> Result<NodeId> {
        if !value.all_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, value });
        Ok(id)
    }

    /// Registers an input leaf.
    pub fn input(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(Op::Leaf, value, "input")
    }

    /// Registers a parameter leaf (a snapshot of the given tensor).
    pub fn param(&mut self, value: &Tensor) -> Result<NodeId> {
        self.push(Op::Leaf, value.clone(), "param")
    }

    pub fn affine(&mut self, w: NodeId, x: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::affine(self.value(w), self.value(x), self.value(b))?;
        self.push(Op::Affine { w, x, b }, v, "affine")
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let v = tensor::relu(self.value(x));
        self.push(Op::Relu { x }, v, "relu")
    }

    pub fn concat(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let tensors: Vec<&Tensor> = xs.iter().map(|id| self.value(*id)).collect();
        let v = tensor::concat(&tensors)?;
        self.push(Op::Concat { xs: xs.to_vec() }, v, "concat")
    }

    /// Scalar-node times vector-node product.
    pub fn scale(&mut self, s: NodeId, x: NodeId) -> Result<NodeId> {
        if !self.value(s).is_scalar() {
            return Err(Error::dim("scale", "scaling factor must be a scalar node"));
        }
        let v = tensor::scale(self.value(s).data()[0], self.value(x));
        self.push(Op::Scale { s, x }, v, "scale")
    }

    /// Constant times tensor.
    pub fn scale_const(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        let v = tensor::scale(c, self.value(x));
        self.push(Op::ScaleConst { x, c }, v, "scale_const")
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::add(self.value(a), self.value(b))?;
        self.push(Op::Add { a, b }, v, "add")
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::sub(self.value(a), self.value(b))?;
        self.push(Op::Sub { a, b }, v, "sub")
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::dot(self.value(a), self.value(b))?;
        self.push(Op::Dot { a, b }, Tensor::scalar(v), "dot")
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::matmul(self.value(a), self.value(b))?;
        self.push(Op::MatMul { a, b }, v, "matmul")
    }

    /// Applies a distinct affine map to every row of `x`: row `j` of the
    /// output is `ws[j] * x[j] + bs[j]`.
    pub fn module_affine(&mut self, ws: &[NodeId], bs: &[NodeId], x: NodeId) -> Result<NodeId> {
        let xt = self.value(x);
        if ws.len() != xt.rows() || bs.len() != xt.rows() {
            return Err(Error::dim(
                "module_affine",
                format!("{} rows, {} weights, {} biases", xt.rows(), ws.len(), bs.len()),
            ));
        }
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(xt.rows());
        let mut out_dim = 0;
        for (j, (w, b)) in ws.iter().zip(bs).enumerate() {
            let xr = Tensor::vector(self.value(x).row(j).to_vec());
            let r = tensor::affine(self.value(*w), &xr, self.value(*b))?;
            out_dim = r.len();
            rows.push(r.data().to_vec());
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        let v = Tensor::matrix(self.value(x).rows(), out_dim, data)?;
        self.push(
            Op::ModuleAffine {
                ws: ws.to_vec(),
                bs: bs.to_vec(),
                x,
            },
            v,
            "module_affine",
        )
    }

    pub fn row_softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let v = tensor::row_softmax(self.value(x));
        self.push(Op::RowSoftmax { x }, v, "row_softmax")
    }

    pub fn col_softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let v = tensor::col_softmax(self.value(x));
        self.push(Op::ColSoftmax { x }, v, "col_softmax")
    }

    pub fn log_sum_exp(&mut self, x: NodeId) -> Result<NodeId> {
        let v = tensor::log_sum_exp(self.value(x))?;
        self.push(Op::LogSumExp { x }, Tensor::scalar(v), "log_sum_exp")
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let v: f64 = self.value(x).data().iter().sum();
        self.push(Op::Sum { x }, Tensor::scalar(v), "sum")
    }

    pub fn slice(&mut self, x: NodeId, offset: usize, len: usize) -> Result<NodeId> {
        let xt = self.value(x);
        if offset + len > xt.len() {
            return Err(Error::dim(
                "slice",
                format!("[{offset}, {}) out of {} values", offset + len, xt.len()),
            ));
        }
        let v = Tensor::vector(xt.data()[offset..offset + len].to_vec());
        self.push(Op::Slice { x, offset, len }, v, "slice")
    }

    pub fn reshape(&mut self, x: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        let v = self.value(x).reshaped(rows, cols).map_err(|_| {
            Error::dim(
                "reshape",
                format!("{:?} -> ({rows}, {cols})", self.value(x).shape()),
            )
        })?;
        self.push(Op::Reshape { x }, v, "reshape")
    }

    /// Extracts row `row` of a matrix node as a vector (an embedding lookup).
    pub fn lookup(&mut self, table: NodeId, row: usize) -> Result<NodeId> {
        let t = self.value(table);
        if row >= t.rows() {
            return Err(Error::dim(
                "lookup",
                format!("row {row} out of {}", t.rows()),
            ));
        }
        let v = Tensor::vector(t.row(row).to_vec());
        self.push(Op::Lookup { table, row }, v, "lookup")
    }

    /// Reverse pass from a scalar root seeded with `seed`. Adjoint buffers are
    /// freshly zero-initialized on every call, so repeated passes are
    /// independent.
    pub fn backward_seeded(&self, root: NodeId, seed: f64) -> Result<Gradients> {
        if !self.value(root).is_scalar() {
            return Err(Error::Contract(format!(
                "backward requires a scalar root, got shape {:?}",
                self.value(root).shape()
            )));
        }
        let mut adj: Vec<Vec<f64>> = self.nodes.iter().map(|n| vec![0.0; n.value.len()]).collect();
        adj[root.index()][0] = seed;

        for idx in (0..=root.index()).rev() {
            let dy = std::mem::take(&mut adj[idx]);
            if dy.iter().all(|v| *v == 0.0) {
                adj[idx] = dy;
                continue;
            }
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::Affine { w, x, b } => {
                    let (wt, xt) = (self.value(*w), self.value(*x));
                    let n = wt.cols();
                    for i in 0..wt.rows() {
                        let g = dy[i];
                        adj[b.index()][i] += g;
                        for j in 0..n {
                            adj[w.index()][i * n + j] += g * xt.data()[j];
                        }
                    }
                    for j in 0..n {
                        let mut s = 0.0;
                        for i in 0..wt.rows() {
                            s += wt.data()[i * n + j] * dy[i];
                        }
                        adj[x.index()][j] += s;
                    }
                }
                Op::Relu { x } => {
                    for (i, xv) in self.value(*x).data().iter().enumerate() {
                        if *xv > 0.0 {
                            adj[x.index()][i] += dy[i];
                        }
                    }
                }
                Op::Concat { xs } => {
                    let mut off = 0;
                    for x in xs {
                        let len = self.value(*x).len();
                        for i in 0..len {
                            adj[x.index()][i] += dy[off + i];
                        }
                        off += len;
                    }
                }
                Op::Scale { s, x } => {
                    let sv = self.value(*s).data()[0];
                    let xt = self.value(*x);
                    let mut ds = 0.0;
                    for i in 0..xt.len() {
                        ds += dy[i] * xt.data()[i];
                        adj[x.index()][i] += sv * dy[i];
                    }
                    adj[s.index()][0] += ds;
                }
                Op::ScaleConst { x, c } => {
                    for i in 0..dy.len() {
                        adj[x.index()][i] += c * dy[i];
                    }
                }
                Op::Add { a, b } => {
                    for i in 0..dy.len() {
                        adj[a.index()][i] += dy[i];
                        adj[b.index()][i] += dy[i];
                    }
                }
                Op::Sub { a, b } => {
                    for i in 0..dy.len() {
                        adj[a.index()][i] += dy[i];
                        adj[b.index()][i] -= dy[i];
                    }
                }
                Op::Dot { a, b } => {
                    let g = dy[0];
                    let (at, bt) = (self.value(*a), self.value(*b));
                    for i in 0..at.len() {
                        adj[a.index()][i] += g * bt.data()[i];
                        adj[b.index()][i] += g * at.data()[i];
                    }
                }
                Op::MatMul { a, b } => {
                    let (at, bt) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (at.rows(), at.cols(), bt.cols());
                    for i in 0..m {
                        for l in 0..k {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += dy[i * n + j] * bt.data()[l * n + j];
                            }
                            adj[a.index()][i * k + l] += s;
                        }
                    }
                    for l in 0..k {
                        for j in 0..n {
                            let mut s = 0.0;
                            for i in 0..m {
                                s += at.data()[i * k + l] * dy[i * n + j];
                            }
                            adj[b.index()][l * n + j] += s;
                        }
                    }
                }
                Op::ModuleAffine { ws, bs, x } => {
                    let xt = self.value(*x);
                    let din = xt.cols();
                    let d = self.nodes[idx].value.cols();
                    for (j, (w, b)) in ws.iter().zip(bs).enumerate() {
                        let wt = self.value(*w);
                        let dyr = &dy[j * d..(j + 1) * d];
                        let xr = xt.row(j);
                        for r in 0..d {
                            let g = dyr[r];
                            adj[b.index()][r] += g;
                            for c in 0..din {
                                adj[w.index()][r * din + c] += g * xr[c];
                            }
                        }
                        for c in 0..din {
                            let mut s = 0.0;
                            for r in 0..d {
                                s += wt.data()[r * din + c] * dyr[r];
                            }
                            adj[x.index()][j * din + c] += s;
                        }
                    }
                }
                Op::RowSoftmax { x } => {
                    let y = &self.nodes[idx].value;
                    let c = y.cols();
                    for i in 0..y.rows() {
                        let yr = y.row(i);
                        let dyr = &dy[i * c..(i + 1) * c];
                        let inner: f64 = yr.iter().zip(dyr).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            adj[x.index()][i * c + j] += yr[j] * (dyr[j] - inner);
                        }
                    }
                }
                Op::ColSoftmax { x } => {
                    let y = &self.nodes[idx].value;
                    let (r, c) = y.shape();
                    for j in 0..c {
                        let mut inner = 0.0;
                        for i in 0..r {
                            inner += y.get(i, j) * dy[i * c + j];
                        }
                        for i in 0..r {
                            adj[x.index()][i * c + j] += y.get(i, j) * (dy[i * c + j] - inner);
                        }
                    }
                }
                Op::LogSumExp { x } => {
                    let g = dy[0];
                    let lse = self.nodes[idx].value.data()[0];
                    for (i, xv) in self.value(*x).data().iter().enumerate() {
                        adj[x.index()][i] += g * (xv - lse).exp();
                    }
                }
                Op::Sum { x } => {
                    let g = dy[0];
                    for v in adj[x.index()].iter_mut() {
                        *v += g;
                    }
                }
                Op::Slice { x, offset, len } => {
                    for i in 0..*len {
                        adj[x.index()][offset + i] += dy[i];
                    }
                }
                Op::Reshape { x } => {
                    for i in 0..dy.len() {
                        adj[x.index()][i] += dy[i];
                    }
                }
                Op::Lookup { table, row } => {
                    let cols = self.value(*table).cols();
                    for i in 0..cols {
                        adj[table.index()][row * cols + i] += dy[i];
                    }
                }
            }
            adj[idx] = dy;
        }
        Ok(Gradients { adjoints: adj })
    }

    /// Reverse pass seeded with 1.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        self.backward_seeded(root, 1.0)
    }

    /// Smallest |input| over all ReLU nodes, or infinity when none were
    /// recorded. Finite-difference checks use this to skip evaluations near
    /// the kink, where central differences are legitimately wrong.
    pub fn relu_kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for node in &self.nodes {
            if let Op::Relu { x } = &node.op {
                for v in self.value(*x).data() {
                    margin = margin.min(v.abs());
                }
            }
        }
        margin
    }

    /// Recomputes every non-leaf value from the recorded operations and checks
    /// the results are bit-identical to the stored forward values.
    pub fn replay_matches(&self) -> Result<bool> {
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match &node.op {
                Op::Leaf => node.value.clone(),
                Op::Affine { w, x, b } => tensor::affine(
                    &values[w.index()],
                    &values[x.index()],
                    &values[b.index()],
                )?,
                Op::Relu { x } => tensor::relu(&values[x.index()]),
                Op::Concat { xs } => {
                    let ts: Vec<&Tensor> = xs.iter().map(|id| &values[id.index()]).collect();
                    tensor::concat(&ts)?
                }
                Op::Scale { s, x } => {
                    tensor::scale(values[s.index()].data()[0], &values[x.index()])
                }
                Op::ScaleConst { x, c } => tensor::scale(*c, &values[x.index()]),
                Op::Add { a, b } => tensor::add(&values[a.index()], &values[b.index()])?,
                Op::Sub { a, b } => tensor::sub(&values[a.index()], &values[b.index()])?,
                Op::Dot { a, b } => {
                    Tensor::scalar(tensor::dot(&values[a.index()], &values[b.index()])?)
                }
                Op::MatMul { a, b } => tensor::matmul(&values[a.index()], &values[b.index()])?,
                Op::ModuleAffine { ws, bs, x } => {
                    let xt = &values[x.index()];
                    let mut data = Vec::new();
                    let mut out_dim = 0;
                    for (j, (w, b)) in ws.iter().zip(bs).enumerate() {
                        let xr = Tensor::vector(xt.row(j).to_vec());
                        let r = tensor::affine(&values[w.index()], &xr, &values[b.index()])?;
                        out_dim = r.len();
                        data.extend_from_slice(r.data());
                    }
                    Tensor::matrix(xt.rows(), out_dim, data)?
                }
                Op::RowSoftmax { x } => tensor::row_softmax(&values[x.index()]),
                Op::ColSoftmax { x } => tensor::col_softmax(&values[x.index()]),
                Op::LogSumExp { x } => Tensor::scalar(tensor::log_sum_exp(&values[x.index()])?),
                Op::Sum { x } => Tensor::scalar(values[x.index()].data().iter().sum()),
                Op::Slice { x, offset, len } => {
                    Tensor::vector(values[x.index()].data()[*offset..offset + len].to_vec())
                }
                Op::Reshape { x } => values[x.index()]
                    .reshaped(node.value.rows(), node.value.cols())?,
                Op::Lookup { table, row } => {
                    Tensor::vector(values[table.index()].row(*row).to_vec())
                }
            };
            values.push(v);
        }
        Ok(values
            .iter()
            .zip(&self.nodes)
            .all(|(v, n)| v.data().iter().zip(n.value.data()).all(|(a, b)| a.to_bits() == b.to_bits())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_sum_subgradient() {
        // d/dx of sum(relu(x)) at x = [-1, 2] is [0, 1].
        let mut tape = Tape::new();
        let x = tape.input(Tensor::vector(vec![-1.0, 2.0])).unwrap();
        let r = tape.relu(x).unwrap();
        let s = tape.sum(r).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x), &[0.0, 1.0]);
    }

    #[test]
    fn square_derivative() {
        // d/dx of x*x at x = 3 is 6.
        let mut tape = Tape::new();
        let x = tape.input(Tensor::scalar(3.0)).unwrap();
        let y = tape.dot(x, x).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x), &[6.0]);
        assert_eq!(tape.value(y).data()[0], 9.0);
    }

    #[test]
    fn log_softmax_cross_entropy_gradient() {
        // Two equal logits, correct class at index 1:
        // loss = lse(s) - s[1]; gradient is [0.5, -0.5].
        let mut tape = Tape::new();
        let s = tape.input(Tensor::vector(vec![0.0, 0.0])).unwrap();
        let lse = tape.log_sum_exp(s).unwrap();
        let st = tape.slice(s, 1, 1).unwrap();
        let loss = tape.sub(lse, st).unwrap();
        let g = tape.backward(loss).unwrap();
        let got = g.get(s);
        assert!((got[0] - 0.5).abs() < 1e-15);
        assert!((got[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn backward_requires_scalar_root() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::vector(vec![1.0, 2.0])).unwrap();
        let r = tape.relu(x).unwrap();
        assert!(matches!(
            tape.backward(r),
            Err(crate::error::Error::Contract(_))
        ));
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut tape = Tape::new();
        assert!(matches!(
            tape.input(Tensor::vector(vec![f64::NAN])),
            Err(crate::error::Error::NonFinite { .. })
        ));
    }

    #[test]
    fn forward_is_deterministic_and_replayable() {
        let build = |tape: &mut Tape| -> NodeId {
            let w = tape
                .param(&Tensor::matrix(2, 3, vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6]).unwrap())
                .unwrap();
            let x = tape.input(Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap();
            let b = tape.param(&Tensor::vector(vec![0.01, 0.02])).unwrap();
            let h = tape.affine(w, x, b).unwrap();
            let r = tape.relu(h).unwrap();
            tape.log_sum_exp(r).unwrap()
        };
        let mut t1 = Tape::new();
        let r1 = build(&mut t1);
        let mut t2 = Tape::new();
        let r2 = build(&mut t2);
        assert_eq!(
            t1.value(r1).data()[0].to_bits(),
            t2.value(r2).data()[0].to_bits()
        );
        assert!(t1.replay_matches().unwrap());
    }

    #[test]
    fn repeated_backward_passes_are_independent() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::scalar(2.0)).unwrap();
        let y = tape.dot(x, x).unwrap();
        let g1 = tape.backward(y).unwrap();
        let g2 = tape.backward(y).unwrap();
        assert_eq!(g1.get(x), g2.get(x));
    }

    #[test]
    fn gradient_accumulates_over_shared_nodes() {
        // y = (x . x) + (x . x); dy/dx = 4x.
        let mut tape = Tape::new();
        let x = tape.input(Tensor::scalar(3.0)).unwrap();
        let a = tape.dot(x, x).unwrap();
        let b = tape.dot(x, x).unwrap();
        let y = tape.add(a, b).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x), &[12.0]);
    }
}

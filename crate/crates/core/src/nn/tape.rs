//! Reverse-mode gradient tape over small dense vectors.
//!
//! Every node holds a flat `Vec<f64>` computed eagerly when it is recorded. Parameter
//! blocks ([`MlpParams`]) are registered by reference; [`Tape::backward`] returns one
//! zero-initialised gradient block per registration and accumulates into it.

use std::sync::atomic::{AtomicU64, Ordering};

use super::mlp::{affine, dot, Activation, MlpParams};
use super::ops::{log_sigmoid, log_softmax_slice, sigmoid, softmax_slice};
use super::tensor::Tensor;
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId {
    tape: u64,
    index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockId {
    tape: u64,
    index: usize,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Affine { block: usize, layer: usize, input: usize },
    Tanh(usize),
    Sigmoid(usize),
    LogSigmoid(usize),
    Exp(usize),
    Ln(usize),
    Square(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddConst(usize, f64),
    Dot(usize, usize),
    Sum(usize),
    Concat(Vec<usize>),
    Index(usize, usize),
    Slice(usize, usize, usize),
    Softmax(usize),
    LogSoftmax(usize),
    WeightedSum { weights: usize, items: Vec<usize> },
    Min(usize, usize),
    Clamp(usize, f64, f64),
}

#[derive(Clone, Debug)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

/// Gradients for every block registered on a tape, in registration order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub blocks: Vec<MlpParams>,
}

pub struct Tape<'p> {
    id: u64,
    blocks: Vec<&'p MlpParams>,
    nodes: Vec<Node>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            blocks: Vec::new(),
            nodes: Vec::new(),
        }
    }

    pub fn register(&mut self, params: &'p MlpParams) -> BlockId {
        self.blocks.push(params);
        BlockId { tape: self.id, index: self.blocks.len() - 1 }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, value: Vec<f64>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn input(&mut self, value: &Tensor) -> NodeId {
        self.constant(value.data().to_vec())
    }

    pub fn scalar_const(&mut self, v: f64) -> NodeId {
        self.constant(vec![v])
    }

    pub fn value(&self, node: NodeId) -> &[f64] {
        &self.nodes[self.idx(node)].value
    }

    pub fn scalar(&self, node: NodeId) -> f64 {
        let v = self.value(node);
        debug_assert_eq!(v.len(), 1);
        v[0]
    }

    /// Runs a registered MLP on `input`, one affine node plus one activation node per layer.
    pub fn mlp(&mut self, block: BlockId, input: NodeId) -> Result<NodeId> {
        assert_eq!(block.tape, self.id, "block registered on a different tape");
        let params = self.blocks[block.index];
        let width = self.value(input).len();
        if width != params.in_dim() {
            return Err(Error::Dimension(format!(
                "MLP expects width {}, got {}",
                params.in_dim(),
                width
            )));
        }
        let mut x = input;
        for (layer_idx, layer) in params.layers().iter().enumerate() {
            x = self.record(Op::Affine { block: block.index, layer: layer_idx, input: x.index });
            if layer.activation == Activation::Tanh {
                x = self.tanh(x);
            }
        }
        Ok(x)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Tanh)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Sigmoid)
    }

    pub fn log_sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::LogSigmoid)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Exp)
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Ln)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Square)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, Op::Add)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, Op::Sub)
    }

    /// Elementwise product; either side may be a scalar that broadcasts.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, Op::Mul)
    }

    pub fn min(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, Op::Min)
    }

    pub fn scale(&mut self, a: NodeId, by: f64) -> NodeId {
        let a = self.idx(a);
        self.record(Op::Scale(a, by))
    }

    pub fn add_const(&mut self, a: NodeId, c: f64) -> NodeId {
        let a = self.idx(a);
        self.record(Op::AddConst(a, c))
    }

    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let a = self.idx(a);
        self.record(Op::Clamp(a, lo, hi))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_len(a, b)?;
        Ok(self.binary(a, b, Op::Dot))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Sum)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let parts = parts.iter().map(|&p| self.idx(p)).collect();
        self.record(Op::Concat(parts))
    }

    pub fn index(&mut self, a: NodeId, i: usize) -> NodeId {
        let a = self.idx(a);
        assert!(i < self.nodes[a].value.len(), "index {i} out of range");
        self.record(Op::Index(a, i))
    }

    /// `len` consecutive entries starting at `start`.
    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let a = self.idx(a);
        assert!(start + len <= self.nodes[a].value.len(), "slice out of range");
        self.record(Op::Slice(a, start, len))
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        if self.value(a).is_empty() {
            return Err(Error::EmptySupport);
        }
        Ok(self.unary(a, Op::Softmax))
    }

    pub fn log_softmax(&mut self, a: NodeId) -> Result<NodeId> {
        if self.value(a).is_empty() {
            return Err(Error::EmptySupport);
        }
        Ok(self.unary(a, Op::LogSoftmax))
    }

    /// `Σ_j weights[j] · items[j]`.
    pub fn weighted_sum(&mut self, weights: NodeId, items: &[NodeId]) -> Result<NodeId> {
        if self.value(weights).len() != items.len() || items.is_empty() {
            return Err(Error::Dimension(format!(
                "{} weights for {} items",
                self.value(weights).len(),
                items.len()
            )));
        }
        let width = self.value(items[0]).len();
        if items.iter().any(|&it| self.value(it).len() != width) {
            return Err(Error::Dimension("weighted-sum items differ in width".into()));
        }
        let weights = self.idx(weights);
        let items = items.iter().map(|&i| self.idx(i)).collect();
        Ok(self.record(Op::WeightedSum { weights, items }))
    }

    /// Recomputes every node from the leaves and the registered parameters.
    pub fn replay(&self) -> Vec<Vec<f64>> {
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node.op {
                Op::Leaf => node.value.clone(),
                ref op => eval(&self.blocks, op, &values),
            };
            values.push(v);
        }
        values
    }

    /// True when [`Tape::replay`] reproduces every recorded value bit for bit.
    pub fn replay_matches(&self) -> bool {
        self.replay()
            .iter()
            .zip(&self.nodes)
            .all(|(a, n)| a.len() == n.value.len() && a.iter().zip(&n.value).all(|(x, y)| x.to_bits() == y.to_bits()))
    }

    /// Gradient of the scalar `loss` with respect to every registered block.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if loss.tape != self.id || loss.index >= self.nodes.len() {
            return Err(Error::Usage("loss node is not on this tape".into()));
        }
        if self.nodes[loss.index].value.len() != 1 {
            return Err(Error::Usage(format!(
                "loss must be a scalar, node has {} values",
                self.nodes[loss.index].value.len()
            )));
        }
        let mut grads = Gradients { blocks: self.blocks.iter().map(|b| b.zeros_like()).collect() };
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.index + 1];
        adj[loss.index] = Some(vec![1.0]);

        for i in (0..=loss.index).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            let val = &node.value;
            match node.op {
                Op::Leaf => {}
                Op::Affine { block, layer, input } => {
                    let l = &self.blocks[block].layers()[layer];
                    let x = &self.nodes[input].value;
                    let cols = x.len();
                    let w = l.weight.data();
                    let mut dx = vec![0.0; cols];
                    let gl = &mut grads.blocks[block].layers_mut()[layer];
                    {
                        let dw = gl.weight.data_mut();
                        for (r, &gr) in g.iter().enumerate() {
                            if gr == 0.0 {
                                continue;
                            }
                            let row = &w[r * cols..(r + 1) * cols];
                            let drow = &mut dw[r * cols..(r + 1) * cols];
                            for c in 0..cols {
                                dx[c] += row[c] * gr;
                                drow[c] += gr * x[c];
                            }
                        }
                    }
                    for (db, &gr) in gl.bias.data_mut().iter_mut().zip(&g) {
                        *db += gr;
                    }
                    accumulate(&mut adj, input, &dx);
                }
                Op::Tanh(a) => {
                    let d: Vec<f64> = g.iter().zip(val).map(|(g, y)| g * (1.0 - y * y)).collect();
                    accumulate(&mut adj, a, &d);
                }
                Op::Sigmoid(a) => {
                    let d: Vec<f64> = g.iter().zip(val).map(|(g, y)| g * y * (1.0 - y)).collect();
                    accumulate(&mut adj, a, &d);
                }
                Op::LogSigmoid(a) => {
                    let x = &self.nodes[a].value;
                    let d: Vec<f64> = g.iter().zip(x).map(|(g, &x)| g * sigmoid(-x)).collect();
                    accumulate(&mut adj, a, &d);
                }
                Op::Exp(a) => {
                    let d: Vec<f64> = g.iter().zip(val).map(|(g, y)| g * y).collect();
                    accumulate(&mut adj, a, &d);
                }
                Op::Ln(a) => {
                    let x = &self.nodes[a].value;
                    let d: Vec<f64> = g.iter().zip(x).map(|(g, x)| g / x).collect();
                    accumulate(&mut adj, a, &d);
                }
                Op::Square(a) => {
                    let x = &self.nodes[a].value;
                    let d: Vec<f64> = g.iter().zip(x).map(|(g, x)| 2.0 * g * x).collect();
                    accumulate(&mut adj, a, &d);
                }
                Op::Add(a, b) => {
                    accumulate_broadcast(&mut adj, a, self.nodes[a].value.len(), &g);
                    accumulate_broadcast(&mut adj, b, self.nodes[b].value.len(), &g);
                }
                Op::Sub(a, b) => {
                    accumulate_broadcast(&mut adj, a, self.nodes[a].value.len(), &g);
                    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                    accumulate_broadcast(&mut adj, b, self.nodes[b].value.len(), &neg);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
                    let n = g.len();
                    let da: Vec<f64> = (0..n).map(|k| g[k] * bcast(vb, k)).collect();
                    let db: Vec<f64> = (0..n).map(|k| g[k] * bcast(va, k)).collect();
                    accumulate_broadcast(&mut adj, a, va.len(), &da);
                    accumulate_broadcast(&mut adj, b, vb.len(), &db);
                }
                Op::Min(a, b) => {
                    let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
                    let n = g.len();
                    let da: Vec<f64> =
                        (0..n).map(|k| if bcast(va, k) <= bcast(vb, k) { g[k] } else { 0.0 }).collect();
                    let db: Vec<f64> =
                        (0..n).map(|k| if bcast(va, k) <= bcast(vb, k) { 0.0 } else { g[k] }).collect();
                    accumulate_broadcast(&mut adj, a, va.len(), &da);
                    accumulate_broadcast(&mut adj, b, vb.len(), &db);
                }
                Op::Scale(a, by) => {
                    let d: Vec<f64> = g.iter().map(|g| g * by).collect();
                    accumulate(&mut adj, a, &d);
                }
                Op::AddConst(a, _) => accumulate(&mut adj, a, &g),
                Op::Clamp(a, lo, hi) => {
                    let x = &self.nodes[a].value;
                    let d: Vec<f64> = g
                        .iter()
                        .zip(x)
                        .map(|(&g, &x)| if (lo..=hi).contains(&x) { g } else { 0.0 })
                        .collect();
                    accumulate(&mut adj, a, &d);
                }
                Op::Dot(a, b) => {
                    let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
                    let da: Vec<f64> = vb.iter().map(|v| v * g[0]).collect();
                    let db: Vec<f64> = va.iter().map(|v| v * g[0]).collect();
                    accumulate(&mut adj, a, &da);
                    accumulate(&mut adj, b, &db);
                }
                Op::Sum(a) => {
                    let d = vec![g[0]; self.nodes[a].value.len()];
                    accumulate(&mut adj, a, &d);
                }
                Op::Concat(ref parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.nodes[p].value.len();
                        accumulate(&mut adj, p, &g[offset..offset + n]);
                        offset += n;
                    }
                }
                Op::Index(a, k) => {
                    let mut d = vec![0.0; self.nodes[a].value.len()];
                    d[k] = g[0];
                    accumulate(&mut adj, a, &d);
                }
                Op::Slice(a, start, _) => {
                    let mut d = vec![0.0; self.nodes[a].value.len()];
                    d[start..start + g.len()].copy_from_slice(&g);
                    accumulate(&mut adj, a, &d);
                }
                Op::Softmax(a) => {
                    let gy = dot(&g, val);
                    let d: Vec<f64> = g.iter().zip(val).map(|(g, y)| y * (g - gy)).collect();
                    accumulate(&mut adj, a, &d);
                }
                Op::LogSoftmax(a) => {
                    let total: f64 = g.iter().sum();
                    let d: Vec<f64> = g.iter().zip(val).map(|(g, y)| g - y.exp() * total).collect();
                    accumulate(&mut adj, a, &d);
                }
                Op::WeightedSum { weights, ref items } => {
                    let w = &self.nodes[weights].value;
                    let dw: Vec<f64> = items.iter().map(|&it| dot(&g, &self.nodes[it].value)).collect();
                    for (&it, &wj) in items.iter().zip(w) {
                        let d: Vec<f64> = g.iter().map(|g| g * wj).collect();
                        accumulate(&mut adj, it, &d);
                    }
                    accumulate(&mut adj, weights, &dw);
                }
            }
        }
        Ok(grads)
    }

    fn idx(&self, node: NodeId) -> usize {
        assert_eq!(node.tape, self.id, "node belongs to a different tape");
        node.index
    }

    fn same_len(&self, a: NodeId, b: NodeId) -> Result<()> {
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        if la != lb {
            return Err(Error::Dimension(format!("operands have widths {la} and {lb}")));
        }
        Ok(())
    }

    fn unary(&mut self, a: NodeId, f: fn(usize) -> Op) -> NodeId {
        let a = self.idx(a);
        self.record(f(a))
    }

    fn binary(&mut self, a: NodeId, b: NodeId, f: fn(usize, usize) -> Op) -> NodeId {
        let (ia, ib) = (self.idx(a), self.idx(b));
        let (la, lb) = (self.nodes[ia].value.len(), self.nodes[ib].value.len());
        assert!(la == lb || la == 1 || lb == 1, "incompatible widths {la} and {lb}");
        self.record(f(ia, ib))
    }

    fn record(&mut self, op: Op) -> NodeId {
        let value = eval(&self.blocks, &op, &self.node_values());
        self.push(value, op)
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId { tape: self.id, index: self.nodes.len() - 1 }
    }

    fn node_values(&self) -> NodeValues<'_> {
        NodeValues(&self.nodes)
    }
}

trait Values {
    fn get(&self, i: usize) -> &[f64];
}

struct NodeValues<'a>(&'a [Node]);

impl Values for NodeValues<'_> {
    fn get(&self, i: usize) -> &[f64] {
        &self.0[i].value
    }
}

impl Values for Vec<Vec<f64>> {
    fn get(&self, i: usize) -> &[f64] {
        &self[i]
    }
}

fn bcast(v: &[f64], k: usize) -> f64 {
    if v.len() == 1 {
        v[0]
    } else {
        v[k]
    }
}

fn eval<V: Values>(blocks: &[&MlpParams], op: &Op, vals: &V) -> Vec<f64> {
    let map = |a: usize, f: &dyn Fn(f64) -> f64| vals.get(a).iter().map(|&x| f(x)).collect::<Vec<_>>();
    let zip = |a: usize, b: usize, f: &dyn Fn(f64, f64) -> f64| {
        let (va, vb) = (vals.get(a), vals.get(b));
        let n = va.len().max(vb.len());
        (0..n).map(|k| f(bcast(va, k), bcast(vb, k))).collect::<Vec<_>>()
    };
    match *op {
        Op::Leaf => unreachable!("leaves carry their own value"),
        Op::Affine { block, layer, input } => {
            let l = &blocks[block].layers()[layer];
            affine(l.weight.data(), l.bias.data(), vals.get(input))
        }
        Op::Tanh(a) => map(a, &f64::tanh),
        Op::Sigmoid(a) => map(a, &sigmoid),
        Op::LogSigmoid(a) => map(a, &log_sigmoid),
        Op::Exp(a) => map(a, &f64::exp),
        Op::Ln(a) => map(a, &f64::ln),
        Op::Square(a) => map(a, &|x| x * x),
        Op::Add(a, b) => zip(a, b, &|x, y| x + y),
        Op::Sub(a, b) => zip(a, b, &|x, y| x - y),
        Op::Mul(a, b) => zip(a, b, &|x, y| x * y),
        Op::Min(a, b) => zip(a, b, &|x, y| if x <= y { x } else { y }),
        Op::Scale(a, by) => map(a, &|x| x * by),
        Op::AddConst(a, c) => map(a, &|x| x + c),
        Op::Clamp(a, lo, hi) => map(a, &|x| x.clamp(lo, hi)),
        Op::Dot(a, b) => vec![dot(vals.get(a), vals.get(b))],
        Op::Sum(a) => vec![vals.get(a).iter().sum()],
        Op::Concat(ref parts) => parts.iter().flat_map(|&p| vals.get(p).iter().copied()).collect(),
        Op::Index(a, k) => vec![vals.get(a)[k]],
        Op::Slice(a, start, len) => vals.get(a)[start..start + len].to_vec(),
        Op::Softmax(a) => softmax_slice(vals.get(a), &[]).expect("non-empty checked at record time"),
        Op::LogSoftmax(a) => log_softmax_slice(vals.get(a)),
        Op::WeightedSum { weights, ref items } => {
            let w = vals.get(weights);
            let mut out = vec![0.0; vals.get(items[0]).len()];
            for (&wj, &it) in w.iter().zip(items) {
                for (o, v) in out.iter_mut().zip(vals.get(it)) {
                    *o += wj * v;
                }
            }
            out
        }
    }
}

fn accumulate(adj: &mut [Option<Vec<f64>>], target: usize, d: &[f64]) {
    match &mut adj[target] {
        Some(existing) => {
            for (e, v) in existing.iter_mut().zip(d) {
                *e += v;
            }
        }
        slot @ None => *slot = Some(d.to_vec()),
    }
}

fn accumulate_broadcast(adj: &mut [Option<Vec<f64>>], target: usize, width: usize, d: &[f64]) {
    if width == d.len() {
        accumulate(adj, target, d);
    } else {
        accumulate(adj, target, &[d.iter().sum()]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::{Layer, ParamSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_layer(w: Vec<f64>, rows: usize, cols: usize) -> MlpParams {
        MlpParams::new(vec![Layer::new(
            Tensor::matrix(rows, cols, w).unwrap(),
            Tensor::zeros(vec![rows]),
            Activation::Identity,
        )
        .unwrap()])
        .unwrap()
    }

    /// Central differences over every parameter of `net`, independent of the tape.
    fn finite_diff(net: &MlpParams, loss: impl Fn(&MlpParams) -> f64) -> Vec<f64> {
        let h = 1e-5;
        let n = net.param_count();
        (0..n)
            .map(|k| {
                let mut plus = net.clone();
                let mut minus = net.clone();
                set_flat(&mut plus, k, h);
                set_flat(&mut minus, k, -h);
                (loss(&plus) - loss(&minus)) / (2.0 * h)
            })
            .collect()
    }

    fn set_flat(net: &mut MlpParams, mut k: usize, delta: f64) {
        for s in net.param_slices_mut() {
            if k < s.len() {
                s[k] += delta;
                return;
            }
            k -= s.len();
        }
    }

    #[test]
    fn sum_of_identity_layer_gives_outer_product_gradient() {
        let net = identity_layer(vec![0.3, -0.2, 0.5, 0.1, 0.0, 0.7], 2, 3);
        let input = vec![1.5, -2.0, 0.25];
        let mut tape = Tape::new();
        let b = tape.register(&net);
        let x = tape.constant(input.clone());
        let y = tape.mlp(b, x).unwrap();
        let loss = tape.sum(y);
        let g = tape.backward(loss).unwrap();
        let analytic = g.blocks[0].layers()[0].weight.data().to_vec();
        let expected: Vec<f64> = (0..2).flat_map(|_| input.iter().copied()).collect();
        assert_eq!(analytic, expected);
        let fd = finite_diff(&net, |p| p.forward(&Tensor::vector(input.clone())).unwrap().data().iter().sum());
        for (a, f) in analytic.iter().zip(&fd) {
            assert!((a - f).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let net = identity_layer(vec![1.0, 2.0], 1, 2);
        let mut tape = Tape::new();
        tape.register(&net);
        let c = tape.scalar_const(4.0);
        let loss = tape.square(c);
        let g = tape.backward(loss).unwrap();
        assert!(g.blocks[0].flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_square_gradient() {
        let net = identity_layer(vec![3.0], 1, 1);
        let mut tape = Tape::new();
        let b = tape.register(&net);
        let one = tape.constant(vec![1.0]);
        let w = tape.mlp(b, one).unwrap();
        let loss = tape.square(w);
        assert_eq!(tape.scalar(loss), 9.0);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.blocks[0].layers()[0].weight.data(), &[6.0]);
    }

    #[test]
    fn foreign_or_vector_loss_is_usage_error() {
        let mut other = Tape::new();
        let foreign = other.scalar_const(1.0);
        let mut tape = Tape::new();
        let v = tape.constant(vec![1.0, 2.0]);
        assert!(matches!(tape.backward(foreign), Err(Error::Usage(_))));
        assert!(matches!(tape.backward(v), Err(Error::Usage(_))));
    }

    #[test]
    fn replay_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = MlpParams::init(&[3, 8, 4], Activation::Tanh, Activation::Identity, 1.0, &mut rng).unwrap();
        let mut tape = Tape::new();
        let b = tape.register(&net);
        let x = tape.constant(vec![0.1, -0.4, 2.0]);
        let y = tape.mlp(b, x).unwrap();
        let p = tape.softmax(y).unwrap();
        let lp = tape.log_softmax(y).unwrap();
        let s = tape.weighted_sum(p, &[x, x, x, x]).unwrap();
        let q = tape.dot(s, x).unwrap();
        let _ = tape.add(q, lp);
        assert!(tape.replay_matches());
        let direct = net.forward(&Tensor::vector(vec![0.1, -0.4, 2.0])).unwrap();
        assert_eq!(tape.value(y), direct.data());
    }

    #[test]
    fn random_mlps_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let depth = rng.gen_range(1..=3);
            let mut sizes = vec![rng.gen_range(1..=16)];
            for _ in 0..depth {
                sizes.push(rng.gen_range(1..=16));
            }
            let net = MlpParams::init(&sizes, Activation::Tanh, Activation::Tanh, 1.0, &mut rng).unwrap();
            let input: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let target: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let loss_of = |p: &MlpParams| -> f64 {
                let y = p.forward(&Tensor::vector(input.clone())).unwrap();
                y.data().iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum()
            };
            let mut tape = Tape::new();
            let b = tape.register(&net);
            let x = tape.constant(input.clone());
            let y = tape.mlp(b, x).unwrap();
            let t = tape.constant(target.clone());
            let d = tape.sub(y, t);
            let sq = tape.square(d);
            let loss = tape.sum(sq);
            let analytic = tape.backward(loss).unwrap().blocks[0].flat();
            let fd = finite_diff(&net, loss_of);
            for (a, f) in analytic.iter().zip(&fd) {
                let rel = (a - f).abs() / a.abs().max(f.abs()).max(1e-6);
                assert!(rel < 1e-4, "analytic {a} vs fd {f}");
            }
        }
    }

    #[test]
    fn min_clamp_and_logsigmoid_gradients() {
        let net = identity_layer(vec![0.7], 1, 1);
        let run = |p: &MlpParams| -> (f64, Option<Vec<f64>>) {
            let mut tape = Tape::new();
            let b = tape.register(p);
            let one = tape.constant(vec![1.0]);
            let w = tape.mlp(b, one).unwrap();
            let ls = tape.log_sigmoid(w);
            let e = tape.exp(w);
            let c = tape.clamp(e, 0.8, 1.2);
            let m = tape.min(ls, c);
            let two = tape.scalar_const(2.0);
            let loss = tape.mul(m, two);
            (tape.scalar(loss), Some(tape.backward(loss).unwrap().blocks[0].flat()))
        };
        let analytic = run(&net).1.unwrap();
        let fd = finite_diff(&net, |p| run(p).0);
        assert!((analytic[0] - fd[0]).abs() < 1e-7);
    }
}

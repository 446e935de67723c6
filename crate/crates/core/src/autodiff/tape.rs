//! Append-only computation tape over scalar nodes.
//!
//! Each node stores its forward value and the indices of its operands, which
//! always precede it. A reverse sweep visits every node once; a tangent sweep
//! followed by a second-order reverse sweep gives Hessian-vector products
//! (forward-over-reverse) on the same recorded values.

use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Input,
    Const,
    Add,
    Mul,
    Neg,
    Exp,
    Log,
    Tanh,
    Relu,
    Square,
    Recip,
    /// Sum of pairwise products; operands stored interleaved `a0 b0 a1 b1 ..`.
    /// One row of a matrix-vector product.
    Dot,
    Sum,
    LogSumExp,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    start: u32,
    len: u32,
    value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    args: Vec<u32>,
    inputs: Vec<u32>,
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

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.index()].value
    }

    pub fn values(&self, vs: &[Var]) -> Vec<f64> {
        vs.iter().map(|&v| self.value(v)).collect()
    }

    fn push(&mut self, op: Op, operands: &[Var], value: f64) -> Var {
        let start = self.args.len() as u32;
        self.args.extend(operands.iter().map(|v| v.0));
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            op,
            start,
            len: operands.len() as u32,
            value,
        });
        Var(id)
    }

    fn operands(&self, node: &Node) -> &[u32] {
        &self.args[node.start as usize..(node.start + node.len) as usize]
    }

    /// Registers a differentiable input. Inputs are numbered in creation order.
    pub fn input(&mut self, value: f64) -> Var {
        let v = self.push(Op::Input, &[], value);
        self.inputs.push(v.0);
        v
    }

    pub fn inputs(&mut self, values: &[f64]) -> Vec<Var> {
        values.iter().map(|&x| self.input(x)).collect()
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.push(Op::Const, &[], value)
    }

    pub fn constants(&mut self, values: &[f64]) -> Vec<Var> {
        values.iter().map(|&x| self.constant(x)).collect()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(Op::Add, &[a, b], v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(Op::Mul, &[a, b], v)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = -self.value(a);
        self.push(Op::Neg, &[a], v)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).exp();
        self.push(Op::Exp, &[a], v)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).ln();
        self.push(Op::Log, &[a], v)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).tanh();
        self.push(Op::Tanh, &[a], v)
    }

    /// Derivative at exactly zero is taken as zero.
    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).max(0.0);
        self.push(Op::Relu, &[a], v)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.push(Op::Square, &[a], x * x)
    }

    pub fn recip(&mut self, a: Var) -> Var {
        let v = 1.0 / self.value(a);
        self.push(Op::Recip, &[a], v)
    }

    pub fn dot(&mut self, a: &[Var], b: &[Var]) -> Var {
        assert_eq!(a.len(), b.len(), "dot operands must have equal length");
        let mut pairs = Vec::with_capacity(2 * a.len());
        let mut v = 0.0;
        for (&x, &y) in a.iter().zip(b) {
            pairs.push(x);
            pairs.push(y);
            v += self.value(x) * self.value(y);
        }
        self.push(Op::Dot, &pairs, v)
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let v = xs.iter().map(|&x| self.value(x)).sum();
        self.push(Op::Sum, xs, v)
    }

    /// Max-shifted `log Σ exp(x_i)`.
    pub fn logsumexp(&mut self, xs: &[Var]) -> Var {
        assert!(!xs.is_empty(), "logsumexp of an empty set");
        let m = xs
            .iter()
            .map(|&x| self.value(x))
            .fold(f64::NEG_INFINITY, f64::max);
        let v = if m.is_finite() {
            m + xs
                .iter()
                .map(|&x| (self.value(x) - m).exp())
                .sum::<f64>()
                .ln()
        } else {
            m
        };
        self.push(Op::LogSumExp, xs, v)
    }

    // Composites built from the primitives above.

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let nb = self.neg(b);
        self.add(a, nb)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let k = self.constant(c);
        self.mul(a, k)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let k = self.constant(c);
        self.add(a, k)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let r = self.recip(b);
        self.mul(a, r)
    }

    /// Row-major `rows x cols` weight matrix times a vector.
    pub fn matvec(&mut self, weights: &[Var], rows: usize, cols: usize, x: &[Var]) -> Vec<Var> {
        assert_eq!(
            weights.len(),
            rows * cols,
            "weight count does not match shape"
        );
        assert_eq!(x.len(), cols, "vector length does not match columns");
        (0..rows)
            .map(|r| self.dot(&weights[r * cols..(r + 1) * cols], x))
            .collect()
    }

    /// First node whose forward value is NaN or infinite.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.nodes.iter().position(|n| !n.value.is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.first_non_finite() {
            None => Ok(()),
            Some(_) => Err(Error::NonFinite {
                what: "intermediate value",
                index: None,
            }),
        }
    }

    /// Softmax of a logsumexp node's operands, max-shifted.
    fn lse_weights(&self, ops: &[u32]) -> Vec<f64> {
        let m = ops
            .iter()
            .map(|&a| self.nodes[a as usize].value)
            .fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = ops
            .iter()
            .map(|&a| (self.nodes[a as usize].value - m).exp())
            .collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }

    fn unary_derivs(op: Op, x: f64, z: f64) -> (f64, f64) {
        match op {
            Op::Neg => (-1.0, 0.0),
            Op::Exp => (z, z),
            Op::Log => (1.0 / x, -1.0 / (x * x)),
            Op::Tanh => {
                let d = 1.0 - z * z;
                (d, -2.0 * z * d)
            }
            Op::Relu => (if x > 0.0 { 1.0 } else { 0.0 }, 0.0),
            Op::Square => (2.0 * x, 2.0),
            Op::Recip => (-z * z, 2.0 * z * z * z),
            _ => unreachable!("not a unary op"),
        }
    }

    /// Reverse sweep seeded with `(node, adjoint)` pairs; returns adjoints of
    /// the inputs in registration order.
    pub fn reverse(&self, seeds: &[(Var, f64)]) -> Vec<f64> {
        let mut adj = vec![0.0; self.nodes.len()];
        for &(v, s) in seeds {
            adj[v.index()] += s;
        }
        for i in (0..self.nodes.len()).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let node = &self.nodes[i];
            let ops = self.operands(node);
            match node.op {
                Op::Input | Op::Const => {}
                Op::Add | Op::Sum => {
                    for &a in ops {
                        adj[a as usize] += g;
                    }
                }
                Op::Mul => {
                    let (a, b) = (ops[0] as usize, ops[1] as usize);
                    let (va, vb) = (self.nodes[a].value, self.nodes[b].value);
                    adj[a] += g * vb;
                    adj[b] += g * va;
                }
                Op::Dot => {
                    for pair in ops.chunks_exact(2) {
                        let (a, b) = (pair[0] as usize, pair[1] as usize);
                        let (va, vb) = (self.nodes[a].value, self.nodes[b].value);
                        adj[a] += g * vb;
                        adj[b] += g * va;
                    }
                }
                Op::LogSumExp => {
                    for (&a, p) in ops.iter().zip(self.lse_weights(ops)) {
                        adj[a as usize] += g * p;
                    }
                }
                op => {
                    let a = ops[0] as usize;
                    let (d1, _) = Self::unary_derivs(op, self.nodes[a].value, node.value);
                    adj[a] += g * d1;
                }
            }
        }
        self.inputs.iter().map(|&i| adj[i as usize]).collect()
    }

    pub fn gradient(&self, output: Var) -> Vec<f64> {
        self.reverse(&[(output, 1.0)])
    }

    /// Forward-mode tangents of every node for the input direction `u`.
    pub fn tangents(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(
            u.len(),
            self.inputs.len(),
            "tangent length must match inputs"
        );
        let mut tan = vec![0.0; self.nodes.len()];
        let mut next_input = 0;
        for i in 0..self.nodes.len() {
            let node = &self.nodes[i];
            let ops = self.operands(node);
            tan[i] = match node.op {
                Op::Input => {
                    let t = u[next_input];
                    next_input += 1;
                    t
                }
                Op::Const => 0.0,
                Op::Add | Op::Sum => ops.iter().map(|&a| tan[a as usize]).sum(),
                Op::Mul => {
                    let (a, b) = (ops[0] as usize, ops[1] as usize);
                    tan[a] * self.nodes[b].value + self.nodes[a].value * tan[b]
                }
                Op::Dot => ops
                    .chunks_exact(2)
                    .map(|p| {
                        let (a, b) = (p[0] as usize, p[1] as usize);
                        tan[a] * self.nodes[b].value + self.nodes[a].value * tan[b]
                    })
                    .sum(),
                Op::LogSumExp => ops
                    .iter()
                    .zip(self.lse_weights(ops))
                    .map(|(&a, p)| p * tan[a as usize])
                    .sum(),
                op => {
                    let a = ops[0] as usize;
                    Self::unary_derivs(op, self.nodes[a].value, node.value).0 * tan[a]
                }
            };
        }
        tan
    }

    /// Hessian of `output` with respect to the inputs, applied to `u`.
    pub fn hvp(&self, output: Var, u: &[f64]) -> Vec<f64> {
        let tan = self.tangents(u);
        let n = self.nodes.len();
        let mut adj = vec![0.0; n];
        let mut adj_dot = vec![0.0; n];
        adj[output.index()] = 1.0;
        for i in (0..n).rev() {
            let (g, gd) = (adj[i], adj_dot[i]);
            if g == 0.0 && gd == 0.0 {
                continue;
            }
            let node = &self.nodes[i];
            let ops = self.operands(node);
            match node.op {
                Op::Input | Op::Const => {}
                Op::Add | Op::Sum => {
                    for &a in ops {
                        adj[a as usize] += g;
                        adj_dot[a as usize] += gd;
                    }
                }
                Op::Mul | Op::Dot => {
                    for pair in ops.chunks_exact(2) {
                        let (a, b) = (pair[0] as usize, pair[1] as usize);
                        let (va, vb) = (self.nodes[a].value, self.nodes[b].value);
                        adj[a] += g * vb;
                        adj_dot[a] += gd * vb + g * tan[b];
                        adj[b] += g * va;
                        adj_dot[b] += gd * va + g * tan[a];
                    }
                }
                Op::LogSumExp => {
                    let zt = tan[i];
                    for (&a, p) in ops.iter().zip(self.lse_weights(ops)) {
                        let a = a as usize;
                        adj[a] += g * p;
                        adj_dot[a] += gd * p + g * p * (tan[a] - zt);
                    }
                }
                op => {
                    let a = ops[0] as usize;
                    let (d1, d2) = Self::unary_derivs(op, self.nodes[a].value, node.value);
                    adj[a] += g * d1;
                    adj_dot[a] += gd * d1 + g * d2 * tan[a];
                }
            }
        }
        self.inputs.iter().map(|&i| adj_dot[i as usize]).collect()
    }
}

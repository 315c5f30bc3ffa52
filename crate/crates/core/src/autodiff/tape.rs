//! Wengert list for reverse-mode differentiation.
//!
//! Every node stores its value and the local partial derivatives with respect
//! to its parents, both in the tape's scalar type. Recording with [`Dual`]
//! scalars seeded along a direction `v` and running the reverse sweep in the
//! same dual arithmetic yields adjoints whose tangent parts are `∇²L·v`
//! (forward-over-reverse).
//!
//! [`Dual`]: super::Dual

use super::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug)]
pub struct Tape<S> {
    values: Vec<S>,
    // node i owns edges spans[i].0 .. spans[i].1
    spans: Vec<(u32, u32)>,
    parents: Vec<u32>,
    partials: Vec<S>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape {
            values: Vec::new(),
            spans: Vec::new(),
            parents: Vec::new(),
            partials: Vec::new(),
        }
    }

    pub fn with_capacity(nodes: usize, edges: usize) -> Self {
        Tape {
            values: Vec::with_capacity(nodes),
            spans: Vec::with_capacity(nodes),
            parents: Vec::with_capacity(edges),
            partials: Vec::with_capacity(edges),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, v: Var) -> S {
        self.values[v.index()]
    }

    fn push_node(&mut self, value: S) -> Var {
        let id = u32::try_from(self.values.len()).expect("tape exceeds u32 nodes");
        let edge = self.parents.len() as u32;
        self.values.push(value);
        self.spans.push((edge, edge));
        Var(id)
    }

    fn edge(&mut self, parent: Var, partial: S) {
        self.parents.push(parent.0);
        self.partials.push(partial);
        let end = self.parents.len() as u32;
        self.spans.last_mut().expect("edge without node").1 = end;
    }

    /// Leaf node (parameter or constant).
    pub fn input(&mut self, value: S) -> Var {
        self.push_node(value)
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.push_node(S::from_f64(value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        let out = self.push_node(v);
        self.edge(a, S::one());
        self.edge(b, S::one());
        out
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        let out = self.push_node(v);
        self.edge(a, S::one());
        self.edge(b, -S::one());
        out
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let out = self.push_node(va * vb);
        self.edge(a, vb);
        self.edge(b, va);
        out
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let q = va / vb;
        let out = self.push_node(q);
        self.edge(a, S::one() / vb);
        self.edge(b, -q / vb);
        out
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).scale(c);
        let out = self.push_node(v);
        self.edge(a, S::from_f64(c));
        out
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) + S::from_f64(c);
        let out = self.push_node(v);
        self.edge(a, S::one());
        out
    }

    pub fn square(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let out = self.push_node(va * va);
        self.edge(a, va.scale(2.0));
        out
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).tanh();
        let out = self.push_node(t);
        self.edge(a, S::one() - t * t);
        out
    }

    /// Piecewise linear; its second derivative is zero almost everywhere and
    /// undefined at the kink.
    pub fn relu(&mut self, a: Var) -> Var {
        let va = self.value(a);
        if va.value() > 0.0 {
            let out = self.push_node(va);
            self.edge(a, S::one());
            out
        } else {
            let out = self.push_node(S::zero());
            self.edge(a, S::zero());
            out
        }
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let e = self.value(a).exp();
        let out = self.push_node(e);
        self.edge(a, e);
        out
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let out = self.push_node(va.ln());
        self.edge(a, S::one() / va);
        out
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let out = self.push_node(va.sin());
        self.edge(a, va.cos());
        out
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let out = self.push_node(va.cos());
        self.edge(a, -va.sin());
        out
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let mut acc = S::zero();
        for &x in xs {
            acc += self.value(x);
        }
        let out = self.push_node(acc);
        for &x in xs {
            self.edge(x, S::one());
        }
        out
    }

    /// `bias + Σ weights[i]·inputs[i]` as a single node.
    pub fn affine(&mut self, weights: &[Var], inputs: &[Var], bias: Var) -> Var {
        debug_assert_eq!(weights.len(), inputs.len());
        let mut acc = self.value(bias);
        for (&w, &x) in weights.iter().zip(inputs) {
            acc += self.value(w) * self.value(x);
        }
        let out = self.push_node(acc);
        for (&w, &x) in weights.iter().zip(inputs) {
            let (vw, vx) = (self.value(w), self.value(x));
            self.edge(w, vx);
            self.edge(x, vw);
        }
        self.edge(bias, S::one());
        out
    }

    /// Like [`Tape::affine`] with data inputs that carry no adjoint.
    pub fn affine_data(&mut self, weights: &[Var], inputs: &[f64], bias: Var) -> Var {
        debug_assert_eq!(weights.len(), inputs.len());
        let mut acc = self.value(bias);
        for (&w, &x) in weights.iter().zip(inputs) {
            acc += self.value(w).scale(x);
        }
        let out = self.push_node(acc);
        for (&w, &x) in weights.iter().zip(inputs) {
            self.edge(w, S::from_f64(x));
        }
        self.edge(bias, S::one());
        out
    }

    /// Stable `ln Σ exp(xs[i])`.
    pub fn log_sum_exp(&mut self, xs: &[Var]) -> Var {
        let shift = xs
            .iter()
            .map(|&x| self.value(x))
            .fold(None::<S>, |m, v| match m {
                Some(m) if m.value() >= v.value() => Some(m),
                _ => Some(v),
            })
            .expect("log_sum_exp of empty slice");
        let exps: Vec<S> = xs.iter().map(|&x| (self.value(x) - shift).exp()).collect();
        let mut total = S::zero();
        for &e in &exps {
            total += e;
        }
        let out = self.push_node(shift + total.ln());
        for (&x, &e) in xs.iter().zip(&exps) {
            self.edge(x, e / total);
        }
        out
    }

    /// Adjoints of every node with respect to `output`.
    pub fn backward(&self, output: Var) -> Vec<S> {
        let mut adj = vec![S::zero(); output.index() + 1];
        adj[output.index()] = S::one();
        for node in (0..=output.index()).rev() {
            let a = adj[node];
            let (start, end) = self.spans[node];
            for e in start as usize..end as usize {
                let p = self.parents[e] as usize;
                let contrib = a * self.partials[e];
                adj[p] += contrib;
            }
        }
        adj
    }
}

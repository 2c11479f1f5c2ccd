//! Minimal reverse-mode differentiation over dense matrices.
//!
//! Graphs are built eagerly on a [`Tape`]; [`Tape::backward`] accepts
//! arbitrary seed gradients so callers can differentiate any scalar whose
//! gradient with respect to some intermediate node they already know.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow this when std is linked
use num_traits::Float;

use crate::tensor::{matmul_into, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Silu(Var),
    SoftmaxRows(Var),
    Shift {
        x: Var,
        dy: isize,
        dx: isize,
        height: usize,
        width: usize,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
}

struct Node {
    value: Mat,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Grads {
    grads: Vec<Option<Mat>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Mat> {
        self.grads[v.0].take()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Mat, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Input that gradients flow into.
    pub fn variable(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Input treated as a constant.
    pub fn constant(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::MatMul(a, b), ng)
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_nt(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::MatMulNt(a, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::Add(a, b), ng)
    }

    /// Add the `1 × cols` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let row = self.value(b).data.clone();
        let mut v = self.value(a).clone();
        for r in v.data.chunks_mut(row.len()) {
            for (x, y) in r.iter_mut().zip(&row) {
                *x += y;
            }
        }
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::AddRow(a, b), ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        let v = Mat {
            rows: x.rows,
            cols: x.cols,
            data: x.data.iter().zip(&y.data).map(|(p, q)| p * q).collect(),
        };
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::Mul(a, b), ng)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).scale(s);
        let ng = self.needs(a);
        self.push(v, Op::Scale(a, s), ng)
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = Mat {
            rows: x.rows,
            cols: x.cols,
            data: x.data.iter().map(|&u| u * sigmoid(u)).collect(),
        };
        let ng = self.needs(a);
        self.push(v, Op::Silu(a), ng)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut v = x.clone();
        for r in v.data.chunks_mut(x.cols) {
            let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for e in r.iter_mut() {
                *e = (*e - max).exp();
                z += *e;
            }
            for e in r.iter_mut() {
                *e /= z;
            }
        }
        let ng = self.needs(a);
        self.push(v, Op::SoftmaxRows(a), ng)
    }

    /// Rows of `x` index a `height × width` grid; output row `(y, x)` takes
    /// input row `(y + dy, x + dx)`, or zero outside the grid.
    pub fn shift(&mut self, x: Var, dy: isize, dx: isize, height: usize, width: usize) -> Var {
        let src = self.value(x);
        let mut v = Mat::zeros(src.rows, src.cols);
        for_each_shift(height, width, dy, dx, |dst, s| {
            v.data[dst * src.cols..(dst + 1) * src.cols].copy_from_slice(src.row(s));
        });
        let ng = self.needs(x);
        self.push(
            v,
            Op::Shift {
                x,
                dy,
                dx,
                height,
                width,
            },
            ng,
        )
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let src = self.value(x);
        let v = Mat::from_fn(src.rows, len, |r, c| src.get(r, start + c));
        let ng = self.needs(x);
        self.push(v, Op::SliceCols { x, start }, ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut v = Mat::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let m = self.value(p);
            for r in 0..rows {
                v.data[r * cols + off..r * cols + off + m.cols].copy_from_slice(m.row(r));
            }
            off += m.cols;
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(v, Op::ConcatCols(parts.to_vec()), ng)
    }

    /// Propagate the seed gradients back through the tape.
    pub fn backward(&self, seeds: &[(Var, &Mat)]) -> Grads {
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut last = 0;
        for (v, g) in seeds {
            debug_assert!(self.value(*v).same_shape(g));
            accumulate(&mut grads[v.0], (*g).clone());
            last = last.max(v.0);
        }
        for i in (0..=last).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[i] = Some(g);
        }
        Grads { grads }
    }

    fn propagate(&self, op: &Op, out: &Mat, g: &Mat, grads: &mut [Option<Mat>]) {
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    accumulate(&mut grads[a.0], g.matmul_nt(self.value(*b)));
                }
                if self.needs(*b) {
                    accumulate(&mut grads[b.0], self.value(*a).matmul_tn(g));
                }
            }
            Op::MatMulNt(a, b) => {
                if self.needs(*a) {
                    let bv = self.value(*b);
                    let mut da = Mat::zeros(g.rows, bv.cols);
                    matmul_into(&g.data, &bv.data, &mut da.data, g.rows, g.cols, bv.cols);
                    accumulate(&mut grads[a.0], da);
                }
                if self.needs(*b) {
                    accumulate(&mut grads[b.0], g.matmul_tn(self.value(*a)));
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if self.needs(*v) {
                        accumulate(&mut grads[v.0], (*g).clone());
                    }
                }
            }
            Op::AddRow(a, b) => {
                if self.needs(*a) {
                    accumulate(&mut grads[a.0], g.clone());
                }
                if self.needs(*b) {
                    let mut db = Mat::zeros(1, g.cols);
                    for r in g.data.chunks(g.cols) {
                        for (s, v) in db.data.iter_mut().zip(r) {
                            *s += v;
                        }
                    }
                    accumulate(&mut grads[b.0], db);
                }
            }
            Op::Mul(a, b) => {
                for (x, y) in [(a, b), (b, a)] {
                    if self.needs(*x) {
                        let other = self.value(*y);
                        let d = Mat {
                            rows: g.rows,
                            cols: g.cols,
                            data: g.data.iter().zip(&other.data).map(|(p, q)| p * q).collect(),
                        };
                        accumulate(&mut grads[x.0], d);
                    }
                }
            }
            Op::Scale(a, s) => accumulate(&mut grads[a.0], g.scale(*s)),
            Op::Silu(a) => {
                let x = self.value(*a);
                let d = Mat {
                    rows: g.rows,
                    cols: g.cols,
                    data: g
                        .data
                        .iter()
                        .zip(&x.data)
                        .map(|(gv, &u)| {
                            let s = sigmoid(u);
                            gv * s * (1.0 + u * (1.0 - s))
                        })
                        .collect(),
                };
                accumulate(&mut grads[a.0], d);
            }
            Op::SoftmaxRows(a) => {
                let mut d = Mat::zeros(g.rows, g.cols);
                for r in 0..g.rows {
                    let y = out.row(r);
                    let gy = g.row(r);
                    let inner: f64 = y.iter().zip(gy).map(|(p, q)| p * q).sum();
                    for c in 0..g.cols {
                        d.data[r * g.cols + c] = y[c] * (gy[c] - inner);
                    }
                }
                accumulate(&mut grads[a.0], d);
            }
            Op::Shift {
                x,
                dy,
                dx,
                height,
                width,
            } => {
                let mut d = Mat::zeros(g.rows, g.cols);
                for_each_shift(*height, *width, *dy, *dx, |dst, src| {
                    for c in 0..g.cols {
                        d.data[src * g.cols + c] += g.data[dst * g.cols + c];
                    }
                });
                accumulate(&mut grads[x.0], d);
            }
            Op::SliceCols { x, start } => {
                let xv = self.value(*x);
                let mut d = Mat::zeros(xv.rows, xv.cols);
                for r in 0..g.rows {
                    d.data[r * xv.cols + start..r * xv.cols + start + g.cols]
                        .copy_from_slice(g.row(r));
                }
                accumulate(&mut grads[x.0], d);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let cols = self.value(*p).cols;
                    if self.needs(*p) {
                        let d = Mat::from_fn(g.rows, cols, |r, c| g.get(r, off + c));
                        accumulate(&mut grads[p.0], d);
                    }
                    off += cols;
                }
            }
        }
    }
}

fn for_each_shift(
    height: usize,
    width: usize,
    dy: isize,
    dx: isize,
    mut f: impl FnMut(usize, usize),
) {
    for y in 0..height {
        let sy = y as isize + dy;
        if sy < 0 || sy >= height as isize {
            continue;
        }
        for x in 0..width {
            let sx = x as isize + dx;
            if sx < 0 || sx >= width as isize {
                continue;
            }
            f(y * width + x, sy as usize * width + sx as usize);
        }
    }
}

fn accumulate(slot: &mut Option<Mat>, g: Mat) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

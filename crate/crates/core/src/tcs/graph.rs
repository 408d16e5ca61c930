//! A small reverse-mode autodiff tape over dense `f64` matrices.
//!
//! A [`Graph`] records one forward computation; [`Graph::backward`] walks it
//! in reverse and returns gradients for every parameter that was read.

use std::borrow::Cow;
use std::collections::HashMap;

use ndarray::{concatenate, s, Array2, Axis, Zip};

pub type Mat = Array2<f64>;

pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(usize),
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Add(Var, Var),
    /// `a + b` with the single row `b` broadcast.
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Mat,
        inv_std: Vec<f64>,
    },
    Softmax(Var),
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    SliceCols {
        x: Var,
        lo: usize,
    },
    ConcatCols(Vec<Var>),
    /// Summed negative log-likelihood; keeps the softmax for the backward pass.
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Mat,
    },
    /// Weighted sum of 1×1 values.
    WeightedSum(Vec<(Var, f64)>),
}

struct Node<'a> {
    value: Cow<'a, Mat>,
    op: Op,
}

/// Parameter values the graph can read by index.
pub trait ParamSource {
    fn param_value(&self, index: usize) -> &Mat;
}

impl ParamSource for [Mat] {
    fn param_value(&self, index: usize) -> &Mat {
        &self[index]
    }
}

#[derive(Default)]
pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
    params: HashMap<usize, Var>,
}

/// Row-wise softmax; with `causal`, entry `(i, j)` for `j > i` is forced to zero.
pub fn softmax_rows(x: &Mat, causal: bool) -> Mat {
    let mut out = x.clone();
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let live = if causal { (i + 1).min(row.len()) } else { row.len() };
        let max = row.iter().take(live).cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (j, v) in row.iter_mut().enumerate() {
            if j < live {
                *v = (*v - max).exp();
                total += *v;
            } else {
                *v = 0.0;
            }
        }
        row.mapv_inplace(|v| v / total);
    }
    out
}

impl<'a> Graph<'a> {
    pub fn new() -> Graph<'a> {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node { value: Cow::Owned(value), op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn input(&mut self, value: Mat) -> Var {
        self.push(value, Op::Input)
    }

    /// Reads parameter `index` without copying it; repeated reads share one node.
    pub fn param<P: ParamSource + ?Sized>(&mut self, source: &'a P, index: usize) -> Var {
        if let Some(&v) = self.params.get(&index) {
            return v;
        }
        self.nodes.push(Node {
            value: Cow::Borrowed(source.param_value(index)),
            op: Op::Param(index),
        });
        let v = Var(self.nodes.len() - 1);
        self.params.insert(index, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(&self.value(b).t());
        self.push(value, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(value, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "broadcast operand must be a single row");
        let value = self.value(a) + self.value(row);
        self.push(value, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a) * k;
        self.push(value, Op::Scale(a, k))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|v| v.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let d = xv.ncols() as f64;
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.axis_iter_mut(Axis(0)) {
            let mean = row.sum() / d;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d;
            let is = 1.0 / (var + LN_EPS).sqrt();
            row.mapv_inplace(|v| (v - mean) * is);
            inv_std.push(is);
        }
        let value = &xhat * self.value(gain) + self.value(bias);
        self.push(
            value,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        )
    }

    pub fn softmax(&mut self, x: Var, causal: bool) -> Var {
        let value = softmax_rows(self.value(x), causal);
        self.push(value, Op::Softmax(x))
    }

    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let mut value = Mat::zeros((ids.len(), t.ncols()));
        for (r, &id) in ids.iter().enumerate() {
            value.row_mut(r).assign(&t.row(id));
        }
        self.push(value, Op::Gather { table, ids: ids.to_vec() })
    }

    pub fn slice_cols(&mut self, x: Var, lo: usize, hi: usize) -> Var {
        let value = self.value(x).slice(s![.., lo..hi]).to_owned();
        self.push(value, Op::SliceCols { x, lo })
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let value = concatenate(Axis(1), &views).expect("concatenated parts share a row count");
        self.push(value, Op::ConcatCols(parts.to_vec()))
    }

    /// `Σ_i -log softmax(logits_i)[targets_i]` as a 1×1 value.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let x = self.value(logits);
        assert_eq!(x.nrows(), targets.len());
        let nll: f64 = x
            .axis_iter(Axis(0))
            .zip(targets)
            .map(|(row, &t)| {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                lse - row[t]
            })
            .sum();
        let probs = softmax_rows(x, false);
        self.push(
            Mat::from_elem((1, 1), nll),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        )
    }

    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Var {
        let total: f64 = terms.iter().map(|(v, w)| w * self.scalar(*v)).sum();
        self.push(Mat::from_elem((1, 1), total), Op::WeightedSum(terms.to_vec()))
    }

    /// Gradients of the 1×1 node `loss` with respect to every parameter read, keyed by parameter index.
    pub fn backward(&self, loss: Var) -> HashMap<usize, Mat> {
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Mat::ones((1, 1)));
        let mut out = HashMap::new();
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let mut acc = |v: Var, d: Mat| match &mut grads[v.0] {
                Some(existing) => *existing += &d,
                slot => *slot = Some(d),
            };
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    out.insert(*p, g);
                }
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.value(*b).t());
                    let db = self.value(*a).t().dot(&g);
                    acc(*a, da);
                    acc(*b, db);
                }
                Op::MatMulT(a, b) => {
                    let da = g.dot(self.value(*b));
                    let db = g.t().dot(self.value(*a));
                    acc(*a, da);
                    acc(*b, db);
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::AddRow(a, row) => {
                    let drow = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(*a, g);
                    acc(*row, drow);
                }
                Op::Scale(a, k) => acc(*a, g * *k),
                Op::Relu(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(self.value(*a)).for_each(|d, &x| {
                        if x <= 0.0 {
                            *d = 0.0;
                        }
                    });
                    acc(*a, d);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let dbias = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dgain = (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dxhat = &g * self.value(*gain);
                    let d = xhat.ncols() as f64;
                    let mut dx = Mat::zeros(xhat.raw_dim());
                    for r in 0..xhat.nrows() {
                        let dh = dxhat.row(r);
                        let h = xhat.row(r);
                        let sum_dh = dh.sum();
                        let sum_dh_h = dh.dot(&h);
                        let k = inv_std[r] / d;
                        Zip::from(dx.row_mut(r))
                            .and(&dh)
                            .and(&h)
                            .for_each(|o, &dh, &h| *o = k * (d * dh - sum_dh - h * sum_dh_h));
                    }
                    acc(*x, dx);
                    acc(*gain, dgain);
                    acc(*bias, dbias);
                }
                Op::Softmax(x) => {
                    let y: &Mat = &node.value;
                    let mut dx = &g * y;
                    for (mut row, yr) in dx.axis_iter_mut(Axis(0)).zip(y.axis_iter(Axis(0))) {
                        let dot = row.sum();
                        Zip::from(&mut row).and(&yr).for_each(|d, &y| *d -= y * dot);
                    }
                    acc(*x, dx);
                }
                Op::Gather { table, ids } => {
                    let mut dt = Mat::zeros(self.value(*table).raw_dim());
                    for (r, &id) in ids.iter().enumerate() {
                        let mut row = dt.row_mut(id);
                        row += &g.row(r);
                    }
                    acc(*table, dt);
                }
                Op::SliceCols { x, lo } => {
                    let mut dx = Mat::zeros(self.value(*x).raw_dim());
                    dx.slice_mut(s![.., *lo..*lo + g.ncols()]).assign(&g);
                    acc(*x, dx);
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for p in parts {
                        let w = self.value(*p).ncols();
                        acc(*p, g.slice(s![.., at..at + w]).to_owned());
                        at += w;
                    }
                }
                Op::CrossEntropy { logits, targets, probs } => {
                    let mut d = probs.clone();
                    for (i, &t) in targets.iter().enumerate() {
                        d[[i, t]] -= 1.0;
                    }
                    acc(*logits, d * g[[0, 0]]);
                }
                Op::WeightedSum(terms) => {
                    for (v, w) in terms {
                        acc(*v, Mat::from_elem((1, 1), w * g[[0, 0]]));
                    }
                }
            }
        }
        out
    }
}

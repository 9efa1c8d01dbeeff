//! Matrix-valued reverse-mode tape.
//!
//! Every value is a dense `Array2<f64>`; scalars are 1x1. Parameters enter as
//! leaves tagged with their slot in the model so `backward` can return one
//! gradient per slot.

use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};

use crate::constraint::{constraint_forward, constraint_grad, ConstraintBreakdown};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Incoming neighbor lists shared between heads.
pub type Neighbors = Arc<Vec<Vec<usize>>>;

enum Op {
    Const,
    Param(usize),
    MatMul(Var, Var),
    AddRow(Var, Var),
    Elu(Var),
    Mask(Var, Array2<f64>),
    Concat(Vec<Var>),
    Mean(Vec<Var>),
    Attend {
        z: Var,
        a_src: Var,
        a_dst: Var,
        targets: Vec<usize>,
        nbrs: Neighbors,
        alpha: Vec<Vec<f64>>,
        pre: Vec<Vec<f64>>,
    },
    GatherRows(Var, Vec<usize>),
    Softmax(Var),
    CrossEntropy(Var, Vec<usize>),
    Constraint {
        p: Var,
        num_rows: usize,
        uniqueness: Vec<f64>,
    },
    Axpy(Var, Var, f64),
}

#[derive(Default)]
pub struct Tape {
    vals: Vec<Array2<f64>>,
    ops: Vec<Op>,
    /// Nodes with no incoming edge, collected from every attention op.
    pub isolated: Vec<usize>,
}

fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

fn leaky_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Attention weights and pre-activation logits for `v` over `nbrs`.
pub fn attend_weights(z: &Array2<f64>, a_src: &[f64], a_dst: &[f64], v: usize, nbrs: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let dot = |row: usize, a: &[f64]| z.row(row).iter().zip(a).map(|(x, y)| x * y).sum::<f64>();
    let s = dot(v, a_dst);
    let pre: Vec<f64> = nbrs.iter().map(|&u| s + dot(u, a_src)).collect();
    let e: Vec<f64> = pre.iter().map(|&x| leaky(x)).collect();
    let m = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = e.iter().map(|x| (x - m).exp()).collect();
    let tot: f64 = ex.iter().sum();
    (ex.iter().map(|x| x / tot).collect(), pre)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, v: Array2<f64>, op: Op) -> Var {
        self.vals.push(v);
        self.ops.push(op);
        Var(self.vals.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.vals[v.0]
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.vals[v.0][[0, 0]]
    }

    pub fn constant(&mut self, v: Array2<f64>) -> Var {
        self.push(v, Op::Const)
    }

    pub fn param(&mut self, slot: usize, v: Array2<f64>) -> Var {
        self.push(v, Op::Param(slot))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.vals[a.0].dot(&self.vals[b.0]);
        self.push(v, Op::MatMul(a, b))
    }

    /// `a` plus the 1xm row `b` broadcast over rows.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let v = &self.vals[a.0] + &self.vals[b.0];
        self.push(v, Op::AddRow(a, b))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let v = self.vals[a.0].mapv(elu);
        self.push(v, Op::Elu(a))
    }

    pub fn mask(&mut self, a: Var, m: Array2<f64>) -> Var {
        let v = &self.vals[a.0] * &m;
        self.push(v, Op::Mask(a, m))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.vals[p.0].view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat shapes");
        self.push(v, Op::Concat(parts.to_vec()))
    }

    pub fn mean(&mut self, parts: &[Var]) -> Var {
        let mut v = self.vals[parts[0].0].clone();
        for p in &parts[1..] {
            v += &self.vals[p.0];
        }
        v /= parts.len() as f64;
        self.push(v, Op::Mean(parts.to_vec()))
    }

    /// One attention head: for every target `v`, the attention-weighted sum
    /// of `z` over `nbrs[v]`. Targets without neighbors get a zero row.
    pub fn attend(&mut self, z: Var, a_src: Var, a_dst: Var, targets: &[usize], nbrs: &Neighbors) -> Var {
        let zv = &self.vals[z.0];
        let h = zv.ncols();
        let src = self.vals[a_src.0].row(0).to_vec();
        let dst = self.vals[a_dst.0].row(0).to_vec();
        let mut out = Array2::zeros((targets.len(), h));
        let mut alpha = Vec::with_capacity(targets.len());
        let mut pre = Vec::with_capacity(targets.len());
        let mut isolated = Vec::new();
        for (t, &v) in targets.iter().enumerate() {
            let nb = &nbrs[v];
            if nb.is_empty() {
                isolated.push(v);
                alpha.push(Vec::new());
                pre.push(Vec::new());
                continue;
            }
            let (al, pr) = attend_weights(zv, &src, &dst, v, nb);
            let mut row = out.row_mut(t);
            for (&u, &w) in nb.iter().zip(&al) {
                row.scaled_add(w, &zv.row(u));
            }
            alpha.push(al);
            pre.push(pr);
        }
        for v in isolated {
            if !self.isolated.contains(&v) {
                self.isolated.push(v);
            }
        }
        self.push(
            out,
            Op::Attend {
                z,
                a_src,
                a_dst,
                targets: targets.to_vec(),
                nbrs: nbrs.clone(),
                alpha,
                pre,
            },
        )
    }

    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Var {
        let v = self.vals[a.0].select(Axis(0), idx);
        self.push(v, Op::GatherRows(a, idx.to_vec()))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let mut v = self.vals[a.0].clone();
        for mut row in v.rows_mut() {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|x| (x - m).exp());
            let s = row.sum();
            row /= s;
        }
        self.push(v, Op::Softmax(a))
    }

    /// Mean negative log-probability of `gold` over rows of a probability matrix.
    pub fn cross_entropy(&mut self, p: Var, gold: &[usize]) -> Var {
        let pv = &self.vals[p.0];
        let n = gold.len().max(1) as f64;
        let l: f64 = gold.iter().enumerate().map(|(i, &g)| -pv[[i, g]].ln()).sum::<f64>() / n;
        self.push(Array2::from_elem((1, 1), l), Op::CrossEntropy(p, gold.to_vec()))
    }

    pub fn constraint(&mut self, p: Var, num_rows: usize, uniqueness: &[f64]) -> (Var, ConstraintBreakdown) {
        let b = constraint_forward(self.vals[p.0].view(), num_rows, uniqueness);
        let v = self.push(
            Array2::from_elem((1, 1), b.loss),
            Op::Constraint {
                p,
                num_rows,
                uniqueness: uniqueness.to_vec(),
            },
        );
        (v, b)
    }

    /// Scalar `a + c * b`.
    pub fn axpy(&mut self, a: Var, b: Var, c: f64) -> Var {
        let v = &self.vals[a.0] + &(&self.vals[b.0] * c);
        self.push(v, Op::Axpy(a, b, c))
    }

    /// Gradients of scalar `out` for parameter slots `0..num_params`.
    /// Slots never touched keep a zero gradient of shape `shapes[slot]`.
    pub fn backward(&self, out: Var, shapes: &[(usize, usize)]) -> Vec<Array2<f64>> {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; out.0 + 1];
        grads[out.0] = Some(Array2::ones((1, 1)));
        let mut params: Vec<Array2<f64>> = shapes.iter().map(|&s| Array2::zeros(s)).collect();

        fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(x) => *x += &g,
                slot => *slot = Some(g),
            }
        }

        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.ops[i] {
                Op::Const => {}
                Op::Param(slot) => params[*slot] += &g,
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.vals[b.0].t());
                    let gb = self.vals[a.0].t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::AddRow(a, b) => {
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *a, g);
                    acc(&mut grads, *b, gb);
                }
                Op::Elu(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(&self.vals[a.0]).for_each(|d, &x| {
                        if x <= 0.0 {
                            *d *= x.exp();
                        }
                    });
                    acc(&mut grads, *a, ga);
                }
                Op::Mask(a, m) => acc(&mut grads, *a, g * m),
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.vals[p.0].ncols();
                        acc(&mut grads, *p, g.slice(ndarray::s![.., off..off + w]).to_owned());
                        off += w;
                    }
                }
                Op::Mean(parts) => {
                    let k = parts.len() as f64;
                    for p in parts {
                        acc(&mut grads, *p, &g / k);
                    }
                }
                Op::Attend {
                    z,
                    a_src,
                    a_dst,
                    targets,
                    nbrs,
                    alpha,
                    pre,
                } => {
                    let zv = &self.vals[z.0];
                    let src = self.vals[a_src.0].row(0);
                    let dst = self.vals[a_dst.0].row(0);
                    let mut gz = Array2::zeros(zv.raw_dim());
                    let mut gsrc = Array2::zeros((1, zv.ncols()));
                    let mut gdst = Array2::zeros((1, zv.ncols()));
                    for (t, &v) in targets.iter().enumerate() {
                        let nb = &nbrs[v];
                        if nb.is_empty() {
                            continue;
                        }
                        let gv = g.row(t);
                        let al = &alpha[t];
                        let dal: Vec<f64> = nb.iter().map(|&u| gv.dot(&zv.row(u))).collect();
                        let mean: f64 = al.iter().zip(&dal).map(|(a, d)| a * d).sum();
                        let mut ds = 0.0;
                        for (k, &u) in nb.iter().enumerate() {
                            gz.row_mut(u).scaled_add(al[k], &gv);
                            let dpre = al[k] * (dal[k] - mean) * leaky_grad(pre[t][k]);
                            ds += dpre;
                            gsrc.row_mut(0).scaled_add(dpre, &zv.row(u));
                            gz.row_mut(u).scaled_add(dpre, &src);
                        }
                        gdst.row_mut(0).scaled_add(ds, &zv.row(v));
                        gz.row_mut(v).scaled_add(ds, &dst);
                    }
                    acc(&mut grads, *z, gz);
                    acc(&mut grads, *a_src, gsrc);
                    acc(&mut grads, *a_dst, gdst);
                }
                Op::GatherRows(a, idx) => {
                    let mut ga = Array2::zeros(self.vals[a.0].raw_dim());
                    for (r, &src) in idx.iter().enumerate() {
                        let mut row = ga.row_mut(src);
                        row += &g.row(r);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Softmax(a) => {
                    let p = &self.vals[i];
                    let mut ga = Array2::zeros(p.raw_dim());
                    for r in 0..p.nrows() {
                        let dot = p.row(r).dot(&g.row(r));
                        for c in 0..p.ncols() {
                            ga[[r, c]] = p[[r, c]] * (g[[r, c]] - dot);
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::CrossEntropy(p, gold) => {
                    let pv = &self.vals[p.0];
                    let n = gold.len().max(1) as f64;
                    let s = g[[0, 0]];
                    let mut gp = Array2::zeros(pv.raw_dim());
                    for (r, &c) in gold.iter().enumerate() {
                        gp[[r, c]] = -s / (n * pv[[r, c]]);
                    }
                    acc(&mut grads, *p, gp);
                }
                Op::Constraint { p, num_rows, uniqueness } => {
                    let gp = constraint_grad(self.vals[p.0].view(), *num_rows, uniqueness) * g[[0, 0]];
                    acc(&mut grads, *p, gp);
                }
                Op::Axpy(a, b, c) => {
                    acc(&mut grads, *b, &g * *c);
                    acc(&mut grads, *a, g);
                }
            }
        }
        params
    }
}

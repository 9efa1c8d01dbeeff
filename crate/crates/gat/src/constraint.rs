//! Structural constraint loss over header class probabilities.
//!
//! Headers are ordered rows first, then columns. `p_gid` is the material-id
//! class mass and `p_prop` the summed mass of the property classes.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use tablekb_core::LabelCode;

/// Material-id headers below this probability are not checked for uniqueness.
pub const GID_ID_GATE: f64 = 0.25;
/// Uniqueness ratio a material-id header is expected to reach.
pub const GID_ID_TARGET: f64 = 0.5;

const GID: usize = 3;
const FIRST_PROP: usize = 4;

pub fn p_gid(p: ArrayView2<f64>) -> Array1<f64> {
    p.column(GID).to_owned()
}

pub fn p_prop(p: ArrayView2<f64>) -> Array1<f64> {
    p.slice(s![.., FIRST_PROP..]).sum_axis(Axis(1))
}

/// Summed ReLU'd terms per family plus their counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintBreakdown {
    pub gid_prop: f64,
    pub gid_gid: f64,
    pub prop_prop: f64,
    pub gid_id: f64,
    pub n_gid_prop: usize,
    pub n_gid_gid: usize,
    pub n_prop_prop: usize,
    pub n_gid_id: usize,
    /// Mean over every generated term; 0 when there are none.
    pub loss: f64,
}

impl ConstraintBreakdown {
    pub fn terms(&self) -> usize {
        self.n_gid_prop + self.n_gid_gid + self.n_prop_prop + self.n_gid_id
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn outer_sum(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let col = a.view().insert_axis(Axis(1));
    let row = b.view().insert_axis(Axis(0));
    &col + &row - 1.0
}

pub fn constraint_forward(p: ArrayView2<f64>, num_rows: usize, uniqueness: &[f64]) -> ConstraintBreakdown {
    let h = p.nrows();
    let g = p_gid(p);
    let q = p_prop(p);
    let (gr, gc) = (g.slice(s![..num_rows]).to_owned(), g.slice(s![num_rows..]).to_owned());
    let (qr, qc) = (q.slice(s![..num_rows]).to_owned(), q.slice(s![num_rows..]).to_owned());
    let cross = num_rows * (h - num_rows);

    let gid_prop = outer_sum(&gr, &qc).mapv(relu).sum() + outer_sum(&qr, &gc).mapv(relu).sum();
    let prop_prop = outer_sum(&qr, &qc).mapv(relu).sum();
    let gg = outer_sum(&g, &g).mapv(relu);
    let gid_gid = (gg.sum() - gg.diag().sum()) / 2.0;
    let gated: Vec<usize> = (0..h).filter(|&i| g[i] > GID_ID_GATE).collect();
    let gid_id: f64 = gated.iter().map(|&i| relu(GID_ID_TARGET - uniqueness[i])).sum();

    let mut b = ConstraintBreakdown {
        gid_prop,
        gid_gid,
        prop_prop,
        gid_id,
        n_gid_prop: 2 * cross,
        n_gid_gid: h * h.saturating_sub(1) / 2,
        n_prop_prop: cross,
        n_gid_id: gated.len(),
        loss: 0.0,
    };
    let n = b.terms();
    if n > 0 {
        b.loss = (gid_prop + gid_gid + prop_prop + gid_id) / n as f64;
    }
    b
}

/// Gradient of the mean constraint loss with respect to `p`. The
/// uniqueness term does not depend on `p` beyond its gate.
pub fn constraint_grad(p: ArrayView2<f64>, num_rows: usize, uniqueness: &[f64]) -> Array2<f64> {
    let h = p.nrows();
    let mut out = Array2::zeros(p.raw_dim());
    let n = constraint_forward(p, num_rows, uniqueness).terms();
    if n == 0 {
        return out;
    }
    let g = p_gid(p);
    let q = p_prop(p);
    let mut dg = vec![0.0; h];
    let mut dq = vec![0.0; h];
    for i in 0..num_rows {
        for j in num_rows..h {
            if g[i] + q[j] - 1.0 > 0.0 {
                dg[i] += 1.0;
                dq[j] += 1.0;
            }
            if q[i] + g[j] - 1.0 > 0.0 {
                dq[i] += 1.0;
                dg[j] += 1.0;
            }
            if q[i] + q[j] - 1.0 > 0.0 {
                dq[i] += 1.0;
                dq[j] += 1.0;
            }
        }
    }
    for i in 0..h {
        for j in i + 1..h {
            if g[i] + g[j] - 1.0 > 0.0 {
                dg[i] += 1.0;
                dg[j] += 1.0;
            }
        }
    }
    let scale = 1.0 / n as f64;
    for i in 0..h {
        out[[i, GID]] = dg[i] * scale;
        for c in FIRST_PROP..p.ncols() {
            out[[i, c]] = dq[i] * scale;
        }
    }
    out
}

/// Gold labels as rows-then-columns class indices.
pub fn gold_indices(row_labels: &[LabelCode], col_labels: &[LabelCode]) -> Vec<usize> {
    row_labels.iter().chain(col_labels).map(|l| l.index()).collect()
}

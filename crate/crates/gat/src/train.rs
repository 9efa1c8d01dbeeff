//! Loss, training loop and finite-difference gradient check.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tablekb_core::graph::{build_graph, TableGraph};
use tablekb_core::Table;

use crate::constraint::{gold_indices, ConstraintBreakdown};
use crate::model::{Dropout, FeatureSpec, GatModel, ModelDims};
use crate::tape::Tape;
use crate::{GatError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub dropout: f64,
    pub hidden1: usize,
    pub hidden2: usize,
    pub heads: usize,
    pub seed: u64,
    pub alpha_thr: f64,
    /// Tables per gradient step.
    pub batch_size: usize,
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 50.0,
            learning_rate: 0.1,
            epochs: 200,
            dropout: 0.2,
            hidden1: 64,
            hidden2: 32,
            heads: 4,
            seed: 0,
            alpha_thr: 0.7,
            batch_size: 1,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GatError::Config(m.into()));
        if !(self.lambda >= 0.0) {
            return bad("lambda must be >= 0");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.alpha_thr) {
            return bad("alpha_thr must lie in [0, 1]");
        }
        if !(self.learning_rate >= 0.0) || !(self.clip_norm > 0.0) {
            return bad("learning rate must be >= 0 and clip norm > 0");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        Ok(())
    }

    pub fn dims(&self, input: usize) -> ModelDims {
        ModelDims {
            input,
            hidden1: self.hidden1,
            hidden2: self.hidden2,
            heads: self.heads,
            classes: tablekb_core::NUM_CLASSES,
        }
    }
}

/// One training table: its graph and gold class per header.
#[derive(Debug, Clone)]
pub struct Example {
    pub graph: TableGraph,
    pub gold: Vec<usize>,
}

impl Example {
    pub fn from_table(table: &Table, feature: &FeatureSpec) -> Self {
        Example {
            graph: build_graph(table, &feature.provider(), &feature.graph_config()),
            gold: gold_indices(&table.row_labels, &table.col_labels),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub ce: f64,
    pub constraint: ConstraintBreakdown,
}

fn record(model: &GatModel, ex: &Example, lambda: f64, dropout: Option<Dropout>) -> Result<(Tape, crate::tape::Var, LossParts)> {
    if ex.gold.len() != ex.graph.num_headers() {
        return Err(GatError::Dimension {
            what: "gold labels",
            expected: ex.graph.num_headers(),
            found: ex.gold.len(),
        });
    }
    let mut tape = Tape::new();
    let p = model.forward_on(&mut tape, &ex.graph, dropout)?;
    let ce = tape.cross_entropy(p, &ex.gold);
    let (c, breakdown) = tape.constraint(p, ex.graph.num_rows, &ex.graph.uniqueness);
    let total = tape.axpy(ce, c, lambda);
    let parts = LossParts {
        total: tape.scalar(total),
        ce: tape.scalar(ce),
        constraint: breakdown,
    };
    Ok((tape, total, parts))
}

/// Cross-entropy plus `lambda` times the constraint loss.
pub fn total_loss(model: &GatModel, ex: &Example, lambda: f64, dropout: Option<Dropout>) -> Result<LossParts> {
    record(model, ex, lambda, dropout).map(|r| r.2)
}

/// Loss and one gradient tensor per parameter slot.
pub fn loss_and_grad(
    model: &GatModel,
    ex: &Example,
    lambda: f64,
    dropout: Option<Dropout>,
) -> Result<(LossParts, Vec<Array2<f64>>)> {
    let (tape, out, parts) = record(model, ex, lambda, dropout)?;
    let grads = tape.backward(out, &model.param_shapes());
    Ok((parts, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub ce: f64,
    pub constraint: f64,
}

fn clip(grads: &mut [Array2<f64>], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Plain gradient descent over shuffled mini-batches. Every step's
/// gradient is the batch mean, clipped to `clip_norm`.
pub fn train(model: &mut GatModel, data: &[Example], cfg: &TrainConfig) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(GatError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss, mut ce, mut con) = (0.0, 0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            let mut acc: Option<Vec<Array2<f64>>> = None;
            for &i in batch {
                let dropout = Dropout {
                    rate: cfg.dropout,
                    seed: rng.next_u64(),
                };
                let (parts, grads) = loss_and_grad(model, &data[i], cfg.lambda, Some(dropout))?;
                if !parts.total.is_finite() || grads.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
                    return Err(GatError::NonFinite {
                        table: data[i].graph.key.clone(),
                        epoch,
                    });
                }
                loss += parts.total;
                ce += parts.ce;
                con += parts.constraint.loss;
                match &mut acc {
                    None => acc = Some(grads),
                    Some(a) => a.iter_mut().zip(&grads).for_each(|(x, g)| *x += g),
                }
            }
            let mut grads = acc.expect("non-empty batch");
            let k = batch.len() as f64;
            grads.iter_mut().for_each(|g| *g /= k);
            clip(&mut grads, cfg.clip_norm);
            for (p, g) in model.params_mut().into_iter().zip(&grads) {
                p.scaled_add(-cfg.learning_rate, g);
            }
        }
        let n = data.len() as f64;
        let stats = EpochStats {
            epoch,
            loss: loss / n,
            ce: ce / n,
            constraint: con / n,
        };
        log::debug!("epoch {epoch}: loss {:.6} ce {:.6} constraint {:.6}", stats.loss, stats.ce, stats.constraint);
        trace.push(stats);
    }
    Ok(trace)
}

/// Below this magnitude gradients are compared on an absolute scale.
pub const GRAD_CHECK_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compare every analytic gradient entry with a central difference of
/// step `h`. Dropout, when given, uses the same mask on every evaluation.
pub fn gradient_check(
    model: &GatModel,
    ex: &Example,
    lambda: f64,
    dropout: Option<Dropout>,
    h: f64,
) -> Result<GradCheckReport> {
    let (_, grads) = loss_and_grad(model, ex, lambda, dropout)?;
    let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (slot, g) in grads.iter().enumerate() {
        for idx in 0..g.len() {
            let orig = {
                let mut ps = probe.params_mut();
                let x = &mut ps[slot].as_slice_mut().expect("contiguous")[idx];
                let o = *x;
                *x = o + h;
                o
            };
            let up = total_loss(&probe, ex, lambda, dropout)?.total;
            probe.params_mut()[slot].as_slice_mut().expect("contiguous")[idx] = orig - h;
            let down = total_loss(&probe, ex, lambda, dropout)?.total;
            probe.params_mut()[slot].as_slice_mut().expect("contiguous")[idx] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = g.as_slice().expect("contiguous")[idx];
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_param = names[slot].clone();
                report.worst_index = idx;
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

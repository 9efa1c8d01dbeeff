//! Two-layer multi-head graph attention classifier over header nodes.

use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tablekb_core::graph::{GraphConfig, HashEmbedding, TableGraph, DEFAULT_POSITIONAL_DIM};
use tablekb_core::{LabelCode, NUM_CLASSES};

use crate::constraint::{p_gid, p_prop};
use crate::tape::{attend_weights, Neighbors, Tape, Var};
use crate::{GatError, Result};

pub const CHECKPOINT_FORMAT: &str = "tablekb.gat";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    /// Width of the first layer after concatenating heads.
    pub hidden1: usize,
    /// Width of each second-layer head; heads are averaged.
    pub hidden2: usize,
    pub heads: usize,
    pub classes: usize,
}

impl ModelDims {
    pub fn desk(input: usize) -> Self {
        ModelDims {
            input,
            hidden1: 64,
            hidden2: 32,
            heads: 4,
            classes: NUM_CLASSES,
        }
    }

    pub fn full(input: usize) -> Self {
        ModelDims {
            input,
            hidden1: 2048,
            hidden2: 1024,
            heads: 4,
            classes: NUM_CLASSES,
        }
    }

    pub fn preset(name: &str, input: usize) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk(input)),
            "full" => Ok(Self::full(input)),
            other => Err(GatError::Config(format!("unknown preset '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.hidden1 == 0 || self.hidden2 == 0 || self.input == 0 || self.classes == 0 {
            return Err(GatError::Config("model dimensions must be positive".into()));
        }
        if self.hidden1 % self.heads != 0 {
            return Err(GatError::Config(format!(
                "hidden1 {} is not divisible by {} heads",
                self.hidden1, self.heads
            )));
        }
        Ok(())
    }
}

/// How graphs fed to the model are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub embedding_dim: usize,
    pub positional_dim: usize,
    pub graph_seed: u64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            embedding_dim: 64,
            positional_dim: DEFAULT_POSITIONAL_DIM,
            graph_seed: 0,
        }
    }
}

impl FeatureSpec {
    pub fn input_dim(&self) -> usize {
        self.embedding_dim + self.positional_dim
    }

    pub fn provider(&self) -> HashEmbedding {
        HashEmbedding { dim: self.embedding_dim }
    }

    pub fn graph_config(&self) -> GraphConfig {
        GraphConfig {
            positional_dim: self.positional_dim,
            seed: self.graph_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead {
    pub w: Array2<f64>,
    pub a_src: Array2<f64>,
    pub a_dst: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer {
    pub heads: Vec<AttentionHead>,
    /// Concatenate head outputs; otherwise average them.
    pub concat: bool,
}

impl GatLayer {
    fn init(rng: &mut ChaCha8Rng, d_in: usize, d_head: usize, heads: usize, concat: bool) -> Self {
        GatLayer {
            heads: (0..heads)
                .map(|_| AttentionHead {
                    w: glorot(rng, d_in, d_head),
                    a_src: glorot(rng, 1, d_head),
                    a_dst: glorot(rng, 1, d_head),
                })
                .collect(),
            concat,
        }
    }

    pub fn d_in(&self) -> usize {
        self.heads[0].w.nrows()
    }

    pub fn out_dim(&self) -> usize {
        let d = self.heads[0].w.ncols();
        if self.concat {
            d * self.heads.len()
        } else {
            d
        }
    }
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let lim = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-lim..lim))
}

/// Attention weights of one head for every node, in incoming-neighbor
/// order. Isolated nodes get an empty vector.
pub fn attention_coefficients(
    layer: &GatLayer,
    features: &Array2<f64>,
    graph: &TableGraph,
    head: usize,
) -> Result<Vec<Vec<f64>>> {
    if features.ncols() != layer.d_in() {
        return Err(GatError::Dimension {
            what: "attention features",
            expected: layer.d_in(),
            found: features.ncols(),
        });
    }
    let h = &layer.heads[head];
    let z = features.dot(&h.w);
    let src = h.a_src.row(0).to_vec();
    let dst = h.a_dst.row(0).to_vec();
    Ok(graph
        .incoming()
        .iter()
        .enumerate()
        .map(|(v, nb)| {
            if nb.is_empty() {
                Vec::new()
            } else {
                attend_weights(&z, &src, &dst, v, nb).0
            }
        })
        .collect())
}

/// Per-header class probabilities, row headers first.
#[derive(Debug, Clone, PartialEq)]
pub struct HeaderPrediction {
    pub probs: Array2<f64>,
    pub num_rows: usize,
}

impl HeaderPrediction {
    pub fn p_gid(&self) -> Vec<f64> {
        p_gid(self.probs.view()).to_vec()
    }

    pub fn p_prop(&self) -> Vec<f64> {
        p_prop(self.probs.view()).to_vec()
    }
}

/// Arg-max labels; composition-role winners (classes 1-3) under
/// `alpha_thr` fall back to 0. Property classes are never thresholded.
pub fn threshold_labels(probs: &Array2<f64>, alpha_thr: f64) -> Vec<LabelCode> {
    probs
        .rows()
        .into_iter()
        .map(|row| {
            let (best, p) = row
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
            let code = if (1..=3).contains(&best) && p < alpha_thr { 0 } else { best };
            LabelCode::new(code as u8).expect("class index in range")
        })
        .collect()
}

/// Inverted dropout applied between the two attention layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatModel {
    pub dims: ModelDims,
    pub feature: FeatureSpec,
    pub seed: u64,
    pub layer1: GatLayer,
    pub layer2: GatLayer,
    pub out_w: Array2<f64>,
    pub out_b: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamRecord {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    dims: ModelDims,
    feature: FeatureSpec,
    seed: u64,
    params: Vec<ParamRecord>,
}

impl GatModel {
    pub fn new(dims: ModelDims, feature: FeatureSpec, seed: u64) -> Result<Self> {
        dims.validate()?;
        if feature.input_dim() != dims.input {
            return Err(GatError::Dimension {
                what: "feature spec",
                expected: dims.input,
                found: feature.input_dim(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layer1 = GatLayer::init(&mut rng, dims.input, dims.hidden1 / dims.heads, dims.heads, true);
        let layer2 = GatLayer::init(&mut rng, dims.hidden1, dims.hidden2, dims.heads, false);
        let out_w = glorot(&mut rng, dims.hidden2, dims.classes);
        let out_b = Array2::zeros((1, dims.classes));
        Ok(GatModel {
            dims,
            feature,
            seed,
            layer1,
            layer2,
            out_w,
            out_b,
        })
    }

    /// Parameter tensors in slot order with stable names.
    pub fn named_params(&self) -> Vec<(String, &Array2<f64>)> {
        let mut v = Vec::new();
        for (l, layer) in [(1, &self.layer1), (2, &self.layer2)] {
            for (k, h) in layer.heads.iter().enumerate() {
                v.push((format!("l{l}.h{k}.w"), &h.w));
                v.push((format!("l{l}.h{k}.a_src"), &h.a_src));
                v.push((format!("l{l}.h{k}.a_dst"), &h.a_dst));
            }
        }
        v.push(("out.w".into(), &self.out_w));
        v.push(("out.b".into(), &self.out_b));
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut v = Vec::new();
        for layer in [&mut self.layer1, &mut self.layer2] {
            for h in layer.heads.iter_mut() {
                v.push(&mut h.w);
                v.push(&mut h.a_src);
                v.push(&mut h.a_dst);
            }
        }
        v.push(&mut self.out_w);
        v.push(&mut self.out_b);
        v
    }

    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.named_params().iter().map(|(_, a)| a.dim()).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.named_params().iter().map(|(_, a)| a.len()).sum()
    }

    pub fn check_graph(&self, graph: &TableGraph) -> Result<()> {
        if graph.feature_dim != self.dims.input {
            return Err(GatError::Dimension {
                what: "graph features",
                expected: self.dims.input,
                found: graph.feature_dim,
            });
        }
        Ok(())
    }

    /// Record the forward pass on `tape`; returns the header probability matrix.
    pub fn forward_on(&self, tape: &mut Tape, graph: &TableGraph, dropout: Option<Dropout>) -> Result<Var> {
        self.check_graph(graph)?;
        let n = graph.num_nodes();
        let x = Array2::from_shape_vec((n, graph.feature_dim), graph.features.clone())
            .map_err(|e| GatError::Config(e.to_string()))?;
        let x = tape.constant(x);
        let nbrs: Neighbors = Arc::new(graph.incoming());
        let all: Vec<usize> = (0..n).collect();
        let headers = graph.header_nodes();

        let mut slot = 0;
        let mut next = |tape: &mut Tape, a: &Array2<f64>| {
            let v = tape.param(slot, a.clone());
            slot += 1;
            v
        };

        let mut outs = Vec::new();
        for h in &self.layer1.heads {
            let w = next(tape, &h.w);
            let a_src = next(tape, &h.a_src);
            let a_dst = next(tape, &h.a_dst);
            let z = tape.matmul(x, w);
            let agg = tape.attend(z, a_src, a_dst, &all, &nbrs);
            outs.push(tape.elu(agg));
        }
        let mut h1 = tape.concat(&outs);
        if let Some(d) = dropout.filter(|d| d.rate > 0.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
            let keep = 1.0 / (1.0 - d.rate);
            let m = Array2::from_shape_fn(tape.value(h1).raw_dim(), |_| {
                if rng.random::<f64>() < d.rate {
                    0.0
                } else {
                    keep
                }
            });
            h1 = tape.mask(h1, m);
        }

        let mut outs = Vec::new();
        for h in &self.layer2.heads {
            let w = next(tape, &h.w);
            let a_src = next(tape, &h.a_src);
            let a_dst = next(tape, &h.a_dst);
            let z = tape.matmul(h1, w);
            outs.push(tape.attend(z, a_src, a_dst, &headers, &nbrs));
        }
        let h2 = tape.mean(&outs);
        let h2 = tape.elu(h2);
        let ow = next(tape, &self.out_w);
        let ob = next(tape, &self.out_b);
        let logits = tape.matmul(h2, ow);
        let logits = tape.add_row(logits, ob);
        Ok(tape.softmax(logits))
    }

    pub fn predict(&self, graph: &TableGraph) -> Result<HeaderPrediction> {
        let mut tape = Tape::new();
        let p = self.forward_on(&mut tape, graph, None)?;
        if !tape.isolated.is_empty() {
            log::debug!("{}: {} isolated node(s) skipped", graph.key, tape.isolated.len());
        }
        Ok(HeaderPrediction {
            probs: tape.value(p).clone(),
            num_rows: graph.num_rows,
        })
    }

    /// Row and column labels for `graph`.
    pub fn predict_labels(&self, graph: &TableGraph, alpha_thr: f64) -> Result<(Vec<LabelCode>, Vec<LabelCode>)> {
        let pred = self.predict(graph)?;
        let mut labels = threshold_labels(&pred.probs, alpha_thr);
        let cols = labels.split_off(graph.num_rows);
        Ok((labels, cols))
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            dims: self.dims,
            feature: self.feature,
            seed: self.seed,
            params: self
                .named_params()
                .into_iter()
                .map(|(name, a)| ParamRecord {
                    name,
                    rows: a.nrows(),
                    cols: a.ncols(),
                    data: a.iter().copied().collect(),
                })
                .collect(),
        };
        let mut out = serde_json::to_vec_pretty(&ck)?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_slice(bytes)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(GatError::Checkpoint(format!("unexpected format '{}'", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(GatError::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        let mut model = GatModel::new(ck.dims, ck.feature, ck.seed)?;
        let names: Vec<(String, (usize, usize))> =
            model.named_params().into_iter().map(|(n, a)| (n, a.dim())).collect();
        if names.len() != ck.params.len() {
            return Err(GatError::Checkpoint(format!(
                "expected {} tensors, found {}",
                names.len(),
                ck.params.len()
            )));
        }
        for ((slot, (name, shape)), rec) in model.params_mut().into_iter().zip(names).zip(ck.params) {
            if rec.name != name || (rec.rows, rec.cols) != shape || rec.data.len() != rec.rows * rec.cols {
                return Err(GatError::Checkpoint(format!(
                    "tensor '{}' {}x{} does not match '{}' {}x{}",
                    rec.name, rec.rows, rec.cols, name, shape.0, shape.1
                )));
            }
            *slot = Array2::from_shape_vec(shape, rec.data).expect("length checked");
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read(path)?)
    }

    /// Load and insist on `dims`.
    pub fn load_expecting(path: &Path, dims: &ModelDims) -> Result<Self> {
        let m = Self::load(path)?;
        if &m.dims != dims {
            return Err(GatError::Checkpoint(format!(
                "checkpoint dims {:?} differ from requested {:?}",
                m.dims, dims
            )));
        }
        Ok(m)
    }
}

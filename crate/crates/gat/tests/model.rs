use ndarray::Array2;
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tablekb_core::graph::{build_graph, HashEmbedding, TableGraph};
use tablekb_core::{LabelCode, Table};
use tablekb_gat::constraint::constraint_forward;
use tablekb_gat::tape::Tape;
use tablekb_gat::{
    attention_coefficients, threshold_labels, total_loss, Example, FeatureSpec, GatError, GatModel, ModelDims,
};

fn small_spec() -> FeatureSpec {
    FeatureSpec {
        embedding_dim: 8,
        positional_dim: 8,
        graph_seed: 0,
    }
}

fn small_dims() -> ModelDims {
    ModelDims {
        input: 16,
        hidden1: 8,
        hidden2: 4,
        heads: 2,
        classes: 22,
    }
}

fn grid(rows: usize, cols: usize, salt: u64) -> Table {
    let cells = (0..rows)
        .map(|i| (0..cols).map(|j| format!("v{}", (i * 7 + j * 3) as u64 ^ salt)).collect())
        .collect();
    Table::new("PT", salt as usize, "caption", cells).unwrap()
}

fn graph_of(t: &Table, spec: &FeatureSpec) -> TableGraph {
    build_graph(t, &spec.provider(), &spec.graph_config())
}

fn features(g: &TableGraph) -> Array2<f64> {
    Array2::from_shape_vec((g.num_nodes(), g.feature_dim), g.features.clone()).unwrap()
}

/// Pairwise enumeration of every constraint term.
fn brute_constraint(p: &Array2<f64>, rows: usize, uniq: &[f64]) -> f64 {
    let h = p.nrows();
    let gid = |i: usize| p[[i, 3]];
    let prop = |i: usize| (4..22).map(|c| p[[i, c]]).sum::<f64>();
    let mut terms = Vec::new();
    for i in 0..rows {
        for j in rows..h {
            terms.push(gid(i) + prop(j) - 1.0);
            terms.push(prop(i) + gid(j) - 1.0);
        }
    }
    for i in 0..h {
        for j in 0..h {
            if i < j {
                terms.push(gid(i) + gid(j) - 1.0);
            }
        }
    }
    for i in 0..rows {
        for j in rows..h {
            terms.push(prop(i) + prop(j) - 1.0);
        }
    }
    for i in 0..h {
        if gid(i) > 0.25 {
            terms.push(0.5 - uniq[i]);
        }
    }
    if terms.is_empty() {
        return 0.0;
    }
    terms.iter().map(|t| t.max(0.0)).sum::<f64>() / terms.len() as f64
}

fn random_probs(rng: &mut ChaCha8Rng, h: usize) -> Array2<f64> {
    let mut p = Array2::from_shape_fn((h, 22), |_| rng.random::<f64>().powi(3));
    // occasionally concentrate mass on the material-id class
    for i in 0..h {
        if rng.random::<f64>() < 0.3 {
            p[[i, 3]] += 5.0 * rng.random::<f64>();
        }
        let s = p.row(i).sum();
        p.row_mut(i).mapv_inplace(|x| x / s);
    }
    p
}

#[test]
fn singleton_and_uniform_attention() {
    let spec = small_spec();
    let mut model = GatModel::new(small_dims(), spec, 1).unwrap();
    // a 1x2 table: each cell has exactly one neighbor
    let g = graph_of(&grid(1, 2, 1), &spec);
    let a = attention_coefficients(&model.layer1, &features(&g), &g, 0).unwrap();
    assert_eq!(a[g.cell_node(0, 0)], vec![1.0]);
    // zero attention vectors make every logit equal
    for h in &mut model.layer1.heads {
        h.a_src.fill(0.0);
        h.a_dst.fill(0.0);
    }
    let g = graph_of(&grid(3, 4, 2), &spec);
    let a = attention_coefficients(&model.layer1, &features(&g), &g, 1).unwrap();
    let v = g.cell_node(1, 1);
    assert_eq!(a[v].len(), 5);
    assert!(a[v].iter().all(|x| (x - 0.2).abs() < 1e-15));
    // caption node has no incoming edge
    assert!(a[g.caption_node()].is_empty());
}

#[test]
fn attention_rejects_wrong_width() {
    let spec = small_spec();
    let model = GatModel::new(small_dims(), spec, 1).unwrap();
    let g = graph_of(&grid(2, 2, 1), &spec);
    let bad = Array2::zeros((g.num_nodes(), 3));
    assert!(matches!(
        attention_coefficients(&model.layer1, &bad, &g, 0),
        Err(GatError::Dimension { .. })
    ));
}

#[test]
fn forward_is_deterministic_and_normalized() {
    let spec = small_spec();
    let model = GatModel::new(small_dims(), spec, 9).unwrap();
    let g = graph_of(&grid(4, 3, 5), &spec);
    let a = model.predict(&g).unwrap();
    let b = model.predict(&g).unwrap();
    assert_eq!(a.probs.as_slice().unwrap(), b.probs.as_slice().unwrap());
    assert_eq!(a.probs.nrows(), 7);
    for r in a.probs.rows() {
        assert!((r.sum() - 1.0).abs() < 1e-9);
        assert!(r.iter().all(|&x| x >= 0.0));
    }
    for (g_, q) in a.p_gid().iter().zip(a.p_prop()) {
        assert!((0.0..=1.0).contains(g_) && (0.0..=1.0 + 1e-12).contains(&q));
    }
}

#[test]
fn zero_features_and_head_give_uniform() {
    let spec = small_spec();
    let mut model = GatModel::new(small_dims(), spec, 2).unwrap();
    model.out_w.fill(0.0);
    let mut g = graph_of(&grid(2, 3, 1), &spec);
    g.features.iter_mut().for_each(|x| *x = 0.0);
    let p = model.predict(&g).unwrap();
    assert!(p.probs.iter().all(|&x| (x - 1.0 / 22.0).abs() < 1e-15));
}

#[test]
fn mismatched_graph_is_a_config_error() {
    let model = GatModel::new(small_dims(), small_spec(), 2).unwrap();
    let other = FeatureSpec {
        embedding_dim: 4,
        ..small_spec()
    };
    let g = graph_of(&grid(2, 2, 1), &other);
    assert!(matches!(model.predict(&g), Err(GatError::Dimension { .. })));
}

#[test]
fn constraint_matches_enumeration_fixed_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let rows = rng.random_range(0..5usize);
        let cols = rng.random_range(0..5usize);
        let h = rows + cols;
        if h == 0 {
            continue;
        }
        let p = random_probs(&mut rng, h);
        let uniq: Vec<f64> = (0..h).map(|_| rng.random::<f64>()).collect();
        let v = constraint_forward(p.view(), rows, &uniq).loss;
        assert!((v - brute_constraint(&p, rows, &uniq)).abs() <= 1e-12);
    }
}

#[test]
fn zero_on_consistent_one_hot() {
    // rows: header row other, two material rows other; columns: gid + two properties
    let mut p = Array2::zeros((6, 22));
    for (i, c) in [0, 0, 0, 3, 13, 7].into_iter().enumerate() {
        p[[i, c]] = 1.0;
    }
    let uniq = [1.0, 1.0, 1.0, 0.5, 1.0, 1.0];
    assert_eq!(constraint_forward(p.view(), 3, &uniq).loss, 0.0);
    // a property on the other axis breaks it
    p[[0, 0]] = 0.0;
    p[[0, 9]] = 1.0;
    assert!(constraint_forward(p.view(), 3, &uniq).loss > 0.0);
}

#[test]
fn perfect_predictions_have_zero_loss() {
    let mut p = Array2::zeros((3, 22));
    for (i, c) in [0, 3, 13].into_iter().enumerate() {
        p[[i, c]] = 1.0;
    }
    let mut tape = Tape::new();
    let pv = tape.constant(p);
    let ce = tape.cross_entropy(pv, &[0, 3, 13]);
    let (c, _) = tape.constraint(pv, 1, &[1.0, 1.0, 1.0]);
    let tot = tape.axpy(ce, c, 50.0);
    assert_eq!(tape.scalar(tot), 0.0);
}

#[test]
fn total_loss_composes_independent_oracles() {
    let spec = small_spec();
    let model = GatModel::new(small_dims(), spec, 4).unwrap();
    let mut t = grid(3, 3, 8);
    t.col_labels = vec![LabelCode::MATERIAL_ID, LabelCode::new(13).unwrap(), LabelCode::new(9).unwrap()];
    let ex = Example::from_table(&t, &spec);
    let pred = model.predict(&ex.graph).unwrap();
    let ce: f64 = ex.gold.iter().enumerate().map(|(i, &g)| -pred.probs[[i, g]].ln()).sum::<f64>() / 6.0;
    let con = brute_constraint(&pred.probs, 3, &ex.graph.uniqueness);
    let l50 = total_loss(&model, &ex, 50.0, None).unwrap();
    assert!((l50.total - (ce + 50.0 * con)).abs() < 1e-12);
    let l0 = total_loss(&model, &ex, 0.0, None).unwrap();
    assert!((l0.total - ce).abs() < 1e-14);
}

#[test]
fn thresholding_composition_roles_only() {
    let row = |k: usize, p: f64| {
        let mut r = vec![(1.0 - p) / 21.0; 22];
        r[k] = p;
        r
    };
    let probs = Array2::from_shape_vec(
        (5, 22),
        [row(2, 0.65), row(2, 0.71), row(9, 0.3), row(13, 0.3), row(3, 0.69)].concat(),
    )
    .unwrap();
    let codes: Vec<u8> = threshold_labels(&probs, 0.7).iter().map(|l| l.code()).collect();
    assert_eq!(codes, vec![0, 2, 9, 13, 0]);
}

#[test]
fn checkpoint_roundtrip_and_dims() {
    let spec = small_spec();
    let model = GatModel::new(small_dims(), spec, 5).unwrap();
    let dir = std::env::temp_dir().join(format!("gat-ck-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("m.json");
    model.save(&path).unwrap();
    assert_eq!(GatModel::load(&path).unwrap(), model);
    let other = ModelDims {
        hidden2: 6,
        ..small_dims()
    };
    assert!(matches!(GatModel::load_expecting(&path, &other), Err(GatError::Checkpoint(_))));

    let mut v: serde_json::Value = serde_json::from_slice(&model.to_json().unwrap()).unwrap();
    v["dims"]["hidden1"] = 12.into();
    let bytes = serde_json::to_vec(&v).unwrap();
    assert!(matches!(GatModel::from_json(&bytes), Err(GatError::Checkpoint(_))));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn presets() {
    let p = ModelDims::preset("full", 72).unwrap();
    assert_eq!((p.hidden1, p.hidden2, p.heads), (2048, 1024, 4));
    let d = ModelDims::preset("desk", 72).unwrap();
    assert_eq!((d.hidden1, d.hidden2, d.heads), (64, 32, 4));
    assert!(ModelDims::preset("huge", 72).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attention_rows_are_distributions(rows in 1usize..6, cols in 1usize..6, salt in 0u64..1000, seed in 0u64..50) {
        let spec = small_spec();
        let model = GatModel::new(small_dims(), spec, seed).unwrap();
        let g = graph_of(&grid(rows, cols, salt), &spec);
        let x = features(&g);
        for head in 0..2 {
            for a in attention_coefficients(&model.layer1, &x, &g, head).unwrap() {
                if !a.is_empty() {
                    prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    prop_assert!(a.iter().all(|&w| w >= 0.0));
                }
            }
        }
    }

    #[test]
    fn constraint_is_nonnegative_and_matches_enumeration(rows in 0usize..5, cols in 0usize..5, seed in any::<u64>()) {
        prop_assume!(rows + cols > 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_probs(&mut rng, rows + cols);
        let uniq: Vec<f64> = (0..rows + cols).map(|_| rng.random::<f64>()).collect();
        let v = constraint_forward(p.view(), rows, &uniq).loss;
        prop_assert!(v >= 0.0);
        prop_assert!((v - brute_constraint(&p, rows, &uniq)).abs() <= 1e-12);
    }
}

#[test]
fn isolated_nodes_do_not_break_prediction() {
    let spec = small_spec();
    let model = GatModel::new(small_dims(), spec, 3).unwrap();
    let g = build_graph(&grid(2, 2, 3), &HashEmbedding { dim: 8 }, &spec.graph_config());
    let p = model.predict(&g).unwrap();
    assert!(p.probs.iter().all(|x| x.is_finite()));
}

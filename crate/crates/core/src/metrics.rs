//! Strict-match precision/recall/F1 and conditional unit accuracy.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::label::Property;
use crate::postprocess::ExtractedTuple;

/// Value rendered to six significant digits.
pub fn value_key(v: f64) -> String {
    format!("{v:.5e}")
}

type StrictKey = (String, Property, String, String);
type ValueKeyT = (String, Property, String);

fn strict_key(t: &ExtractedTuple) -> StrictKey {
    (t.entity.to_string(), t.property, value_key(t.value), t.unit.clone())
}

fn ev_key(t: &ExtractedTuple) -> ValueKeyT {
    (t.entity.to_string(), t.property, value_key(t.value))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
    /// Set when a denominator was zero and the affected score defaulted to 0.
    pub undefined: bool,
}

pub fn prf_from_counts(correct: usize, predicted: usize, gold: usize) -> Prf {
    let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = div(correct, predicted);
    let recall = div(correct, gold);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f1,
        correct,
        predicted,
        gold,
        undefined: predicted == 0 || gold == 0,
    }
}

/// A prediction is correct when entity, property, value and unit all match
/// a gold tuple. Duplicates on either side count once.
pub fn strict_prf(predicted: &[ExtractedTuple], gold: &[ExtractedTuple]) -> Prf {
    let p: BTreeSet<StrictKey> = predicted.iter().map(strict_key).collect();
    let g: BTreeSet<StrictKey> = gold.iter().map(strict_key).collect();
    prf_from_counts(p.intersection(&g).count(), p.len(), g.len())
}

/// Correct units over predictions whose entity, property and value match
/// gold. `None` when no prediction matched.
pub fn unit_accuracy(predicted: &[ExtractedTuple], gold: &[ExtractedTuple]) -> Option<f64> {
    let gold_units: BTreeMap<ValueKeyT, BTreeSet<String>> = gold.iter().fold(BTreeMap::new(), |mut m, t| {
        m.entry(ev_key(t)).or_default().insert(t.unit.clone());
        m
    });
    let preds: BTreeSet<StrictKey> = predicted.iter().map(strict_key).collect();
    let mut matched = 0usize;
    let mut correct = 0usize;
    for (e, p, v, u) in preds {
        if let Some(units) = gold_units.get(&(e, p, v)) {
            matched += 1;
            if units.contains(&u) {
                correct += 1;
            }
        }
    }
    (matched > 0).then(|| correct as f64 / matched as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Prf,
    pub unit_accuracy: Option<f64>,
    pub per_property: BTreeMap<Property, Prf>,
}

pub fn evaluate(predicted: &[ExtractedTuple], gold: &[ExtractedTuple]) -> EvalReport {
    let props: BTreeSet<Property> = predicted.iter().chain(gold).map(|t| t.property).collect();
    let per_property = props
        .into_iter()
        .map(|p| {
            let pp: Vec<_> = predicted.iter().filter(|t| t.property == p).cloned().collect();
            let gp: Vec<_> = gold.iter().filter(|t| t.property == p).cloned().collect();
            (p, strict_prf(&pp, &gp))
        })
        .collect();
    EvalReport {
        overall: strict_prf(predicted, gold),
        unit_accuracy: unit_accuracy(predicted, gold),
        per_property,
    }
}

//! Weak labels from a reference database of known materials.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::composition::detect_constituents;
use crate::config::Engine;
use crate::error::{Error, Result};
use crate::label::{LabelCode, Property};
use crate::table::{Axis, Table};
use crate::units::norm_unit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbValue {
    pub value: f64,
    #[serde(default)]
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbRecord {
    pub id: String,
    #[serde(default)]
    pub composition: BTreeMap<String, f64>,
    #[serde(default)]
    pub properties: BTreeMap<Property, DbValue>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceDatabase {
    pub records: Vec<DbRecord>,
}

impl ReferenceDatabase {
    pub fn new(records: Vec<DbRecord>) -> Result<ReferenceDatabase> {
        for r in &records {
            if r.composition.values().any(|f| !f.is_finite() || *f < 0.0) {
                return Err(Error::Config(format!("record {}: negative or non-finite fraction", r.id)));
            }
            if r.properties.values().any(|v| !v.value.is_finite()) {
                return Err(Error::Config(format!("record {}: non-finite property value", r.id)));
            }
        }
        Ok(ReferenceDatabase { records })
    }

    /// One JSON record per line; blank lines are ignored.
    pub fn parse(bytes: &[u8]) -> Result<ReferenceDatabase> {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
            offset: e.valid_up_to(),
            line: 0,
            message: "invalid UTF-8".into(),
        })?;
        let mut records = Vec::new();
        let mut offset = 0;
        for (n, line) in text.split_inclusive('\n').enumerate() {
            let body = line.trim_end_matches(['\n', '\r']);
            if !body.trim().is_empty() {
                let rec: DbRecord = serde_json::from_str(body).map_err(|e| Error::Parse {
                    offset,
                    line: n + 1,
                    message: e.to_string(),
                })?;
                records.push(rec);
            }
            offset += line.len();
        }
        ReferenceDatabase::new(records)
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn property_values(&self, p: Property) -> Vec<(f64, usize)> {
        let mut v: Vec<(f64, usize)> = self
            .records
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.properties.get(&p).map(|d| (d.value, i)))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        v
    }
}

/// Dimensional reconciliation applied to an observed cell before comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Times1000,
    Div1000,
    Plus273,
    Minus273,
}

impl Transform {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Transform::Identity => v,
            Transform::Times1000 => v * 1000.0,
            Transform::Div1000 => v / 1000.0,
            Transform::Plus273 => v + 273.0,
            Transform::Minus273 => v - 273.0,
        }
    }

    /// Transforms tried for a property, identity first.
    pub fn candidates(p: Property) -> &'static [Transform] {
        if p == Property::Density {
            &[Transform::Identity, Transform::Times1000, Transform::Div1000]
        } else if p.is_temperature() {
            &[Transform::Identity, Transform::Plus273, Transform::Minus273]
        } else {
            &[Transform::Identity]
        }
    }

    /// Unit of the observed cells given the database unit.
    pub fn observed_unit(self, db_unit: &str) -> String {
        let u = match (self, db_unit) {
            (Transform::Identity, u) => u,
            (Transform::Times1000, "kg/m3") => "g/cm3",
            (Transform::Div1000, "g/cm3") => "kg/m3",
            (Transform::Plus273, "K") => "degC",
            (Transform::Minus273, "degC") => "K",
            _ => "",
        };
        u.to_string()
    }
}

pub fn values_match(observed: f64, reference: f64, rel_tol: f64) -> bool {
    observed == reference || (observed - reference).abs() <= rel_tol * reference.abs().max(observed.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTuple {
    pub db_index: usize,
    pub observed: f64,
    pub unit: String,
    pub property: Property,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineMatch {
    pub axis: Axis,
    pub index: usize,
    /// `None` for composition matches.
    pub property: Option<Property>,
    pub matches: usize,
    pub numeric: usize,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub retained: bool,
    pub orientation: Axis,
    pub transforms: BTreeMap<Property, Transform>,
    pub lines: Vec<LineMatch>,
    pub candidates: Vec<CandidateTuple>,
    pub row_labels: Vec<LabelCode>,
    pub col_labels: Vec<LabelCode>,
}

struct PropertyScan {
    transform: Transform,
    /// matches per line, indexed [axis][line]
    counts: [Vec<usize>; 2],
    total: usize,
}

fn axis_idx(a: Axis) -> usize {
    match a {
        Axis::Row => 0,
        Axis::Col => 1,
    }
}

fn first_match(x: f64, values: &[(f64, usize)], tol: f64) -> Option<usize> {
    values
        .iter()
        .filter(|(d, _)| values_match(x, *d, tol))
        .map(|(_, i)| *i)
        .min()
}

fn scan_property(
    table: &Table,
    numeric: &[[Vec<(usize, f64)>; 2]],
    values: &[(f64, usize)],
    p: Property,
    tol: f64,
) -> PropertyScan {
    let mut best: Option<PropertyScan> = None;
    for &t in Transform::candidates(p) {
        let mut counts = [vec![0; table.num_rows()], vec![0; table.num_cols()]];
        for (a, lines) in counts.iter_mut().enumerate() {
            for (i, c) in lines.iter_mut().enumerate() {
                *c = numeric[i][a]
                    .iter()
                    .filter(|(_, v)| first_match(t.apply(*v), values, tol).is_some())
                    .count();
            }
        }
        let total: usize = counts[1].iter().sum();
        if best.as_ref().is_none_or(|b| total > b.total) {
            best = Some(PropertyScan {
                transform: t,
                counts,
                total,
            });
        }
    }
    best.expect("every property has the identity transform")
}

/// Align a table against the database and compute weak labels for lines
/// that are still unlabeled.
pub fn align_table(table: &Table, db: &ReferenceDatabase, engine: &Engine) -> AlignmentResult {
    let max_lines = table.num_rows().max(table.num_cols());
    let mut numeric: Vec<[Vec<(usize, f64)>; 2]> = vec![[Vec::new(), Vec::new()]; max_lines];
    for axis in [Axis::Row, Axis::Col] {
        for i in 0..table.num_lines(axis) {
            numeric[i][axis_idx(axis)] = table.line_values(axis, i).into_iter().map(|(k, n)| (k, n.value)).collect();
        }
    }

    let mut scans = BTreeMap::new();
    for p in Property::ALL {
        let values = db.property_values(p);
        if values.is_empty() {
            continue;
        }
        let scan = scan_property(table, &numeric, &values, p, engine.cfg.rel_tol(p));
        if scan.total > 0 {
            scans.insert(p, (scan, values));
        }
    }

    let axis_score = |a: Axis| -> usize {
        scans
            .values()
            .map(|(s, _)| s.counts[axis_idx(a)].iter().copied().max().unwrap_or(0))
            .sum()
    };
    let orientation = if axis_score(Axis::Row) > axis_score(Axis::Col) {
        Axis::Row
    } else {
        Axis::Col
    };
    let oi = axis_idx(orientation);
    let min_density = engine.cfg.supervision.min_density;

    let mut row_labels = table.row_labels.clone();
    let mut col_labels = table.col_labels.clone();
    let mut lines = Vec::new();
    let mut candidates = Vec::new();
    let mut transforms = BTreeMap::new();

    for i in 0..table.num_lines(orientation) {
        let n_numeric = numeric[i][oi].len();
        if n_numeric == 0 {
            continue;
        }
        let mut best: Option<(Property, f64, usize)> = None;
        for (p, (scan, _)) in &scans {
            let m = scan.counts[oi][i];
            if m == 0 {
                continue;
            }
            let d = m as f64 / n_numeric as f64;
            lines.push(LineMatch {
                axis: orientation,
                index: i,
                property: Some(*p),
                matches: m,
                numeric: n_numeric,
                density: d,
            });
            if d >= min_density && best.is_none_or(|(_, bd, _)| d > bd) {
                best = Some((*p, d, m));
            }
        }
        let labels = match orientation {
            Axis::Row => &mut row_labels,
            Axis::Col => &mut col_labels,
        };
        if let Some((p, _, _)) = best {
            if !labels[i].is_other() {
                continue;
            }
            labels[i] = p.label();
            let (scan, values) = &scans[&p];
            transforms.insert(p, scan.transform);
            for &(k, v) in &numeric[i][oi] {
                if let Some(idx) = first_match(scan.transform.apply(v), values, engine.cfg.rel_tol(p)) {
                    let db_unit = &db.records[idx].properties[&p].unit;
                    let db_unit = norm_unit(db_unit, p, engine).unwrap_or_default();
                    let (row, col) = Table::position(orientation, i, k);
                    candidates.push(CandidateTuple {
                        db_index: idx,
                        observed: v,
                        unit: scan.transform.observed_unit(&db_unit),
                        property: p,
                        row,
                        col,
                    });
                }
            }
        } else if labels[i].is_other() {
            if let Some(m) = composition_line(table, orientation, i, &numeric[i][oi], db, engine) {
                let d = m as f64 / n_numeric as f64;
                lines.push(LineMatch {
                    axis: orientation,
                    index: i,
                    property: None,
                    matches: m,
                    numeric: n_numeric,
                    density: d,
                });
                if d >= min_density {
                    labels[i] = LabelCode::COMPOSITION;
                }
            }
        }
    }

    let retained = row_labels != table.row_labels || col_labels != table.col_labels;
    AlignmentResult {
        retained,
        orientation,
        transforms,
        lines,
        candidates,
        row_labels,
        col_labels,
    }
}

fn composition_line(
    table: &Table,
    axis: Axis,
    i: usize,
    cells: &[(usize, f64)],
    db: &ReferenceDatabase,
    engine: &Engine,
) -> Option<usize> {
    let (_, constituent) = detect_constituents(table.cell_at(axis, i, 0), engine);
    if constituent.is_empty() {
        return None;
    }
    let fractions: Vec<f64> = db.records.iter().filter_map(|r| r.composition.get(&constituent).copied()).collect();
    if fractions.is_empty() {
        return None;
    }
    let tol = engine.cfg.supervision.composition_abs_tol;
    Some(
        cells
            .iter()
            .filter(|(_, v)| fractions.iter().any(|f| (f - v).abs() <= tol))
            .count(),
    )
}

/// Align and write the weak labels into the table.
pub fn supervise_table(table: &mut Table, db: &ReferenceDatabase, engine: &Engine) -> AlignmentResult {
    let result = align_table(table, db, engine);
    table.row_labels = result.row_labels.clone();
    table.col_labels = result.col_labels.clone();
    result
}

//! Rule-based property annotation of header lines, orientation suppression
//! and material-id detection.

use crate::config::{contains_any, Engine};
use crate::composition::composition_candidates;
use crate::graph::uniqueness_ratio;
use crate::label::{LabelCode, Property};
use crate::numeric::normalize_text;
use crate::table::{Axis, Table};
use crate::units::{header_segment_end, heading_unit};

/// The five binary evidence signals used to validate a symbolic match.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Signals {
    pub unit: bool,
    pub range: bool,
    pub caption: bool,
    pub symbol: bool,
    pub exact: bool,
}

impl Signals {
    pub fn score(&self) -> u32 {
        [self.unit, self.range, self.caption, self.symbol, self.exact]
            .iter()
            .map(|&b| b as u32)
            .sum()
    }

    pub fn from_bits(bits: u8) -> Signals {
        Signals {
            unit: bits & 1 != 0,
            range: bits & 2 != 0,
            caption: bits & 4 != 0,
            symbol: bits & 8 != 0,
            exact: bits & 16 != 0,
        }
    }
}

pub fn accept(signals: Signals, threshold: u32) -> bool {
    signals.score() >= threshold
}

/// Header text reduced for symbol lookup: text before any bracket, comma or
/// slash, without spacing, underscores, braces or dollar signs, lowercased.
pub fn symbol_key(header: &str) -> String {
    let t = normalize_text(header);
    let cut = t.find(['(', '[', ',', '/']).unwrap_or(t.len());
    t[..cut]
        .chars()
        .filter(|c| !c.is_whitespace() && !"_{}$".contains(*c))
        .collect::<String>()
        .to_lowercase()
}

pub fn is_symbol_of(header: &str, property: Property, engine: &Engine) -> bool {
    let key = symbol_key(header);
    !key.is_empty()
        && engine
            .cfg
            .rules(property)
            .symbols
            .iter()
            .any(|s| symbol_key(s) == key)
}

/// Canonical phrase contained in the header text, unless a disqualifying
/// token is also present. Properties are tried in code order.
pub fn direct_match(header: &str, engine: &Engine) -> Option<Property> {
    let lower = normalize_text(header).to_lowercase();
    Property::ALL.into_iter().find(|&p| {
        let rules = engine.cfg.rules(p);
        rules.phrases.iter().any(|ph| lower.contains(&ph.to_lowercase()))
            && !contains_any(&lower, &rules.disqualify)
    })
}

pub fn property_signals(
    property: Property,
    header: &str,
    unit: Option<&str>,
    values: &[f64],
    caption: &str,
    engine: &Engine,
) -> Signals {
    let rules = engine.cfg.rules(property);
    let [lo, hi] = rules.range;
    let lower = normalize_text(header).to_lowercase();
    let stem = lower.split(['(', '[', ',']).next().unwrap_or("").trim().to_string();
    Signals {
        unit: unit.is_some_and(|u| {
            !u.is_empty() && (rules.units.iter().any(|a| a == u) || rules.unit_aliases.iter().any(|a| a == u))
        }),
        range: values.iter().any(|v| lo <= *v && *v <= hi),
        caption: contains_any(caption, &rules.caption_keywords),
        symbol: is_symbol_of(header, property, engine),
        exact: rules.phrases.iter().any(|ph| ph.to_lowercase() == stem),
    }
}

/// Signal fusion: accept when the score reaches the property threshold.
pub fn validate_property(
    property: Property,
    header: &str,
    unit: Option<&str>,
    values: &[f64],
    caption: &str,
    engine: &Engine,
) -> bool {
    let s = property_signals(property, header, unit, values, caption, engine);
    accept(s, engine.cfg.threshold(property))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    Phrase,
    Symbol { score: u32 },
    MaterialId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub axis: Axis,
    pub index: usize,
    pub label: LabelCode,
    pub reason: Reason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationReport {
    pub assigned: Vec<Assignment>,
    /// Axis whose annotated property labels were reset by suppression.
    pub suppressed: Option<Axis>,
    pub suppressed_count: usize,
}

fn decide_line(table: &Table, axis: Axis, i: usize, engine: &Engine) -> Option<(Property, Reason)> {
    let values: Vec<f64> = table.line_values(axis, i).into_iter().map(|(_, n)| n.value).collect();
    if values.is_empty() {
        return None;
    }
    let line = table.line(axis, i);
    let segment = &line[..header_segment_end(&line)];
    let heading = segment.join(" ");
    if heading.trim().is_empty() {
        return None;
    }
    if let Some(p) = direct_match(&heading, engine) {
        return Some((p, Reason::Phrase));
    }
    let header = line[0];
    let mut best: Option<(Property, u32)> = None;
    for p in Property::ALL {
        if !is_symbol_of(header, p, engine) {
            continue;
        }
        let unit = heading_unit(segment, p, engine);
        let s = property_signals(p, header, unit.as_deref(), &values, &table.caption, engine);
        if accept(s, engine.cfg.threshold(p)) && best.is_none_or(|(_, b)| s.score() > b) {
            best = Some((p, s.score()));
        }
    }
    best.map(|(p, score)| (p, Reason::Symbol { score }))
}

fn first_line_numbers(table: &Table, axis: Axis) -> usize {
    table.line_values(axis, 0).len()
}

/// Decide which axis loses its property labels when both carry some.
/// The axis whose first line is a data line keeps its labels elsewhere:
/// a numeric first row means properties run along rows.
pub fn suppression_axis(table: &Table, engine: &Engine) -> Option<Axis> {
    if !(table.has_property_labels(Axis::Row) && table.has_property_labels(Axis::Col)) {
        return None;
    }
    let need = engine.cfg.annotation.min_first_line_numbers;
    let row_data = first_line_numbers(table, Axis::Row) >= need;
    let col_data = first_line_numbers(table, Axis::Col) >= need;
    match (row_data, col_data) {
        (true, false) => Some(Axis::Col),
        (false, true) => Some(Axis::Row),
        _ => {
            let count = |a| table.labels(a).iter().filter(|l: &&LabelCode| l.is_property()).count();
            if count(Axis::Col) > count(Axis::Row) {
                Some(Axis::Row)
            } else {
                Some(Axis::Col)
            }
        }
    }
}

/// Axis carrying labels >= 2, else the axis with more composition
/// headings; columns by default.
fn gid_axis(table: &Table, engine: &Engine) -> Axis {
    let has = |a| table.labels(a).iter().any(|l: &LabelCode| l.code() >= 2);
    match (has(Axis::Row), has(Axis::Col)) {
        (true, false) => Axis::Row,
        (false, false) => {
            let rows = composition_candidates(table, Axis::Row, engine).len();
            let cols = composition_candidates(table, Axis::Col, engine).len();
            if rows > cols {
                Axis::Row
            } else {
                Axis::Col
            }
        }
        _ => Axis::Col,
    }
}

/// First unlabeled line on the property axis whose header names a material
/// id and whose cells are mostly distinct.
pub fn detect_gid(table: &Table, engine: &Engine) -> Option<(Axis, usize)> {
    if table.row_labels.iter().chain(&table.col_labels).any(|l| *l == LabelCode::MATERIAL_ID) {
        return None;
    }
    let re = engine.compiled.gid_keywords.as_ref()?;
    let axis = gid_axis(table, engine);
    (0..table.num_lines(axis)).find(|&i| {
        table.labels(axis)[i].is_other()
            && re.is_match(&normalize_text(table.cell_at(axis, i, 0)))
            && uniqueness_ratio(table, axis, i) >= engine.cfg.annotation.gid_min_uniqueness
    })
    .map(|i| (axis, i))
}

/// Fill unlabeled headers with property labels, suppress the weaker axis and
/// mark a material-id line. Non-zero incoming labels are never changed.
pub fn annotate_table(table: &mut Table, engine: &Engine) -> AnnotationReport {
    let mut report = AnnotationReport::default();
    let mut decisions = Vec::new();
    for axis in [Axis::Row, Axis::Col] {
        for i in 0..table.num_lines(axis) {
            if !table.labels(axis)[i].is_other() {
                continue;
            }
            if let Some((p, reason)) = decide_line(table, axis, i, engine) {
                decisions.push(Assignment {
                    axis,
                    index: i,
                    label: p.label(),
                    reason,
                });
            }
        }
    }
    let incoming_row = table.row_labels.clone();
    let incoming_col = table.col_labels.clone();
    let incoming = |a: Axis| match a {
        Axis::Row => &incoming_row,
        Axis::Col => &incoming_col,
    };
    for d in &decisions {
        table.labels_mut(d.axis)[d.index] = d.label;
    }
    if let Some(mut loser) = suppression_axis(table, engine) {
        let protected = |a: Axis| incoming(a).iter().any(|l| l.is_property());
        if protected(loser) && !protected(loser.other()) {
            loser = loser.other();
        }
        let labels = table.labels_mut(loser);
        for (l, orig) in labels.iter_mut().zip(incoming(loser)) {
            if l.is_property() && orig.is_other() {
                *l = LabelCode::OTHER;
                report.suppressed_count += 1;
            }
        }
        report.suppressed = Some(loser);
        decisions.retain(|d| d.axis != loser);
    }
    report.assigned = decisions;
    if let Some((axis, i)) = detect_gid(table, engine) {
        table.labels_mut(axis)[i] = LabelCode::MATERIAL_ID;
        report.assigned.push(Assignment {
            axis,
            index: i,
            label: LabelCode::MATERIAL_ID,
            reason: Reason::MaterialId,
        });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    static ENGINE: std::sync::LazyLock<Engine> = std::sync::LazyLock::new(Engine::default);

    fn eng() -> &'static Engine {
        &ENGINE
    }

    #[test]
    fn phrase_match_labels_density() {
        let e = eng();
        let mut t = Table::from_rows(
            "P1",
            0,
            "",
            &[&["Glass", "Density (g/cm3)"], &["G1", "2.51"], &["G2", "2.60"]],
        );
        annotate_table(&mut t, e);
        assert_eq!(t.col_labels[1], Property::Density.label());
        assert_eq!(t.col_labels[0], LabelCode::MATERIAL_ID);
    }

    #[test]
    fn symbol_n_is_resolved_by_context() {
        let e = eng();
        let rows: &[&[&str]] = &[&["Glass", "n"], &["A1", "1.49"], &["A2", "1.52"], &["A3", "1.55"]];
        let mut t = Table::from_rows("P", 0, "Refractive index measured at 632.8 nm", rows);
        annotate_table(&mut t, e);
        assert_eq!(t.col_labels[1], Property::RefractiveIndex.label());

        let rows: &[&[&str]] = &[&["Glass", "n"], &["A1", "0.22"], &["A2", "0.24"]];
        let mut t = Table::from_rows("P", 0, "Poisson data of the glasses", rows);
        annotate_table(&mut t, e);
        assert_eq!(t.col_labels[1], Property::PoissonRatio.label());
    }

    #[test]
    fn threshold_arithmetic() {
        let s = Signals {
            unit: true,
            range: true,
            caption: true,
            ..Default::default()
        };
        assert_eq!(s.score(), 3);
        assert!(accept(s, 2));
        let only_symbol = Signals {
            symbol: true,
            ..Default::default()
        };
        assert!(!accept(only_symbol, 2));
    }

    #[test]
    fn truth_table() {
        for bits in 0u8..32 {
            let s = Signals::from_bits(bits);
            for t in 1..=5 {
                assert_eq!(accept(s, t), bits.count_ones() >= t);
            }
        }
    }

    #[test]
    fn incoming_labels_survive() {
        let e = eng();
        let mut t = Table::from_rows("P", 0, "", &[&["x", "Density"], &["a", "2.5"]]);
        t.col_labels[1] = Property::Hardness.label();
        annotate_table(&mut t, e);
        assert_eq!(t.col_labels[1], Property::Hardness.label());
    }

    #[test]
    fn suppression_prefers_data_axis() {
        let e = eng();
        let rows: &[&[&str]] = &[
            &["Density", "2.5", "2.6", "2.7"],
            &["Tg (°C)", "500", "510", "520"],
            &["E (GPa)", "70", "71", "72"],
        ];
        let mut t = Table::from_rows("P", 0, "", rows);
        // column 1 starts with a numeric first row; columns cannot be headers
        t.col_labels[1] = LabelCode::OTHER;
        let report = annotate_table(&mut t, e);
        assert!(t.row_labels.iter().all(|l| l.is_property()));
        assert!(!t.has_property_labels(Axis::Col));
        assert!(report.suppressed.is_none() || report.suppressed == Some(Axis::Col));
    }

    proptest! {
        #[test]
        fn property_labels_on_one_axis(
            cells in prop::collection::vec(
                prop::collection::vec(
                    prop::sample::select(vec!["Density", "n", "E", "1.5", "2.5", "70", "G1", "Tg", "500", ""]),
                    4),
                4),
        ) {
            let e = eng();
            let rows: Vec<Vec<String>> = cells.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect();
            let mut t = Table::new("P", 0, "glass data", rows).unwrap();
            annotate_table(&mut t, e);
            prop_assert!(!(t.has_property_labels(Axis::Row) && t.has_property_labels(Axis::Col)));
        }
    }
}

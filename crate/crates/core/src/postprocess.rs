//! Correction of predicted property labels and extraction of filtered
//! (entity, property, value, unit) tuples.

use serde::{Deserialize, Serialize};

use crate::annotate::{direct_match, symbol_key};
use crate::composition::fraction_unit;
use crate::config::{contains_any, Engine};
use crate::entity::{make_entity_id, EntityId, EntityKind};
use crate::error::Result;
use crate::label::{LabelCode, Property};
use crate::numeric::{eval_expr, find_num, looks_numeric, median, normalize_text};
use crate::table::{Axis, Table};
use crate::units::{header_segment_end, line_median, reciprocal_repair, set_units};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Single,
    MeanOfRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedTuple {
    pub entity: EntityId,
    pub property: Property,
    pub value: f64,
    #[serde(default)]
    pub unit: String,
    pub value_kind: ValueKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub table: String,
    pub rule: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub from: u8,
    pub to: u8,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub detail: String,
}

/// Optional lookup into article full text, consulted for overloaded symbols.
pub type FullTextHook<'a> = &'a dyn Fn(&str, Property) -> bool;

/// Canonical-phrase match as a label; 0 when nothing matches.
pub fn direct_matching(header: &str, engine: &Engine) -> LabelCode {
    direct_match(header, engine).map_or(LabelCode::OTHER, Property::label)
}

fn heading_of<'a>(line: &[&'a str]) -> String {
    line[..header_segment_end(line)].join(" ")
}

/// Semantic veto for a predicted label given the header line and caption.
pub fn check_heading(
    pii: &str,
    line: &[&str],
    caption: &str,
    label: LabelCode,
    engine: &Engine,
    hook: Option<FullTextHook>,
) -> bool {
    let Some(p) = label.property() else {
        return true;
    };
    let heading = heading_of(line);
    let norm = normalize_text(&heading);
    if !fraction_unit(&norm).is_empty() || contains_any(&norm, &engine.cfg.postprocess.composition_units) {
        return false;
    }
    let rules = engine.cfg.rules(p);
    if contains_any(&norm, &rules.disqualify) || contains_any(caption, &rules.disqualify) {
        return false;
    }
    let key = symbol_key(line[0]);
    let caption_hit = contains_any(caption, &rules.caption_keywords);
    if rules.ambiguous.iter().any(|a| symbol_key(a) == key) {
        let in_range = line_median(line).is_some_and(|m| {
            let [lo, hi] = rules.range;
            lo <= m && m <= hi
        });
        if !(caption_hit || in_range) {
            return false;
        }
    }
    if rules.overloads.iter().any(|o| symbol_key(o) == key) {
        return caption_hit || hook.is_some_and(|h| h(pii, p));
    }
    true
}

/// Range rule for (property, unit), falling back to the property-only rule.
pub fn range_for(property: Property, unit: &str, engine: &Engine) -> Option<(f64, f64)> {
    let rules = &engine.cfg.postprocess.ranges;
    rules
        .iter()
        .find(|r| r.property == property && r.unit.as_deref() == Some(unit))
        .or_else(|| rules.iter().find(|r| r.property == property && r.unit.is_none()))
        .map(|r| (r.min, r.max))
}

pub fn is_invalid_unit(property: Property, unit: &str, engine: &Engine) -> bool {
    engine
        .cfg
        .postprocess
        .invalid_units
        .iter()
        .any(|u| u.property == property && u.unit == unit)
}

/// Why a tuple would be dropped, if at all.
pub fn tuple_rejection(t: &ExtractedTuple, engine: &Engine) -> Option<&'static str> {
    if !t.value.is_finite() {
        return Some("non_finite");
    }
    if let Some((lo, hi)) = range_for(t.property, &t.unit, engine) {
        if t.value < lo || t.value > hi {
            return Some("range");
        }
    }
    if is_invalid_unit(t.property, &t.unit, engine) {
        return Some("invalid_unit");
    }
    None
}

/// Drop implausible values and disallowed (property, unit) pairs, keeping
/// order.
pub fn filter_tuples(tuples: Vec<ExtractedTuple>, engine: &Engine) -> Vec<ExtractedTuple> {
    tuples.into_iter().filter(|t| tuple_rejection(t, engine).is_none()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostprocessOutput {
    /// Axis whose lines carry property labels.
    pub orientation: Axis,
    pub row_labels: Vec<LabelCode>,
    pub col_labels: Vec<LabelCode>,
    pub tuples: Vec<ExtractedTuple>,
    pub audit: Vec<AuditEvent>,
}

/// Property-axis choice from the share of lines carrying labels 2..=21.
pub fn property_orientation(row_labels: &[LabelCode], col_labels: &[LabelCode]) -> Axis {
    let frac = |ls: &[LabelCode]| {
        if ls.is_empty() {
            0.0
        } else {
            ls.iter().filter(|l| l.code() >= 2).count() as f64 / ls.len() as f64
        }
    };
    if frac(row_labels) <= frac(col_labels) {
        Axis::Col
    } else {
        Axis::Row
    }
}

fn cell_value(cell: &str) -> Option<(f64, ValueKind)> {
    if !looks_numeric(cell) {
        return None;
    }
    if let Some(v) = eval_expr(cell) {
        return Some((v, ValueKind::Single));
    }
    let n = find_num(cell)?;
    Some((n.value, if n.was_range { ValueKind::MeanOfRange } else { ValueKind::Single }))
}

fn exponent_fix(property: Property, heading: &str, engine: &Engine) -> Option<i32> {
    let norm = normalize_text(heading);
    engine
        .compiled
        .value_fix
        .iter()
        .filter(|(p, _)| *p == property)
        .flat_map(|(_, res)| res.iter())
        .find_map(|re| re.captures(&norm).and_then(|c| c[1].parse::<i32>().ok()))
}

struct Ctx<'a> {
    table: &'a Table,
    audit: Vec<AuditEvent>,
}

impl Ctx<'_> {
    fn event(&mut self, rule: &str, axis: Axis, index: usize, from: LabelCode, to: LabelCode, detail: String) {
        self.audit.push(AuditEvent {
            table: self.table.key(),
            rule: rule.to_string(),
            axis: Some(axis),
            index: Some(index),
            from: from.code(),
            to: to.code(),
            detail,
        });
    }
}

/// Correct the predicted labels of `table` and extract its property tuples.
pub fn post_process_table(table: &Table, engine: &Engine, hook: Option<FullTextHook>) -> Result<PostprocessOutput> {
    table.validate()?;
    let orient = property_orientation(&table.row_labels, &table.col_labels);
    let cross = orient.other();
    let mut ctx = Ctx {
        table,
        audit: Vec::new(),
    };
    let mut labels = table.labels(orient).to_vec();
    let mut cross_labels = table.labels(cross).to_vec();
    for (i, l) in cross_labels.iter_mut().enumerate() {
        if l.is_property() {
            ctx.event("orientation", cross, i, *l, LabelCode::OTHER, String::new());
            *l = LabelCode::OTHER;
        }
    }

    let caption = table.caption.as_str();
    let mut scale: Vec<f64> = vec![1.0; labels.len()];
    for i in 0..labels.len() {
        let original = labels[i];
        if original.is_composition_role() {
            continue;
        }
        let line = table.line(orient, i);
        let heading = heading_of(&line);
        let has_values = !table.line_values(orient, i).is_empty();
        let mut label = original;

        if label.is_property() && !check_heading(&table.pii, &line, caption, label, engine, hook) {
            ctx.event("check_heading", orient, i, label, LabelCode::OTHER, heading.clone());
            label = LabelCode::OTHER;
        }
        if original.is_other() && has_values {
            let direct = direct_matching(&heading, engine);
            if direct.is_property() && check_heading(&table.pii, &line, caption, direct, engine, hook) {
                ctx.event("direct_matching", orient, i, label, direct, heading.clone());
                label = direct;
            }
        }
        if has_values {
            let header = normalize_text(line[0]);
            for (p, res) in &engine.compiled.pattern_map {
                if original.property() != Some(*p) && label.property() != Some(*p) && res.iter().any(|r| r.is_match(&header)) {
                    ctx.event("pattern_map", orient, i, label, p.label(), header.clone());
                    label = p.label();
                    break;
                }
            }
            for (rule, header_re) in engine.cfg.postprocess.context_map.iter().zip(&engine.compiled.context_headers) {
                let p = rule.property;
                if original.property() == Some(p) || label.property() == Some(p) {
                    continue;
                }
                let header_ok = header_re.as_ref().is_none_or(|r| r.is_match(&header));
                let unit_ok = rule.unit_in.is_empty()
                    || set_units(&line, p, caption, engine).is_some_and(|u| rule.unit_in.contains(&u));
                let caption_ok = (rule.caption_any.is_empty() || contains_any(caption, &rule.caption_any))
                    && !contains_any(caption, &rule.caption_none);
                if header_ok && unit_ok && caption_ok {
                    ctx.event("context_map", orient, i, label, p.label(), header.clone());
                    label = p.label();
                    break;
                }
            }
        }
        if let Some(p) = label.property() {
            let vals: Vec<f64> = (1..line.len()).filter_map(|k| cell_value(line[k]).map(|v| v.0)).collect();
            let med = median(&vals);
            if let Some(x) = exponent_fix(p, &heading, engine) {
                if med.is_some_and(|m| m > engine.cfg.postprocess.value_fix_min_median) {
                    scale[i] = 10f64.powi(-x);
                    ctx.event("value_fix", orient, i, label, label, format!("1e-{x}"));
                }
            }
            if let (Some(range), Some(m)) = (engine.cfg.rules(p).median_range, med) {
                let m = m * scale[i];
                if m < range[0] || m > range[1] {
                    ctx.event("median_range", orient, i, label, LabelCode::OTHER, format!("median {m}"));
                    label = LabelCode::OTHER;
                }
            }
        }
        labels[i] = label;
    }

    let gid_line = labels.iter().position(|l| *l == LabelCode::MATERIAL_ID);
    let mut tuples = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        let Some(p) = l.property() else { continue };
        let line = table.line(orient, i);
        let mut unit = set_units(&line, p, caption, engine).unwrap_or_default();
        let mut invert = false;
        if let Some((u, _)) = reciprocal_repair(p, &unit, 1.0) {
            ctx.event("reciprocal", orient, i, *l, *l, format!("{unit} -> {u}"));
            unit = u;
            invert = true;
        }
        for k in 1..line.len() {
            let Some((v, kind)) = cell_value(line[k]) else { continue };
            let mut value = v * scale[i];
            if invert {
                if value == 0.0 {
                    continue;
                }
                value = 1.0 / value;
            }
            let mid = gid_line.map_or("", |g| table.cell_at(orient, g, k));
            let (row, col) = Table::position(orient, i, k);
            let entity = make_entity_id(&table.pii, table.table_index, row, col, table.shape(), mid, EntityKind::Property)?;
            tuples.push(ExtractedTuple {
                entity,
                property: p,
                value,
                unit: unit.clone(),
                value_kind: kind,
            });
        }
    }

    let mut kept = Vec::with_capacity(tuples.len());
    for t in tuples {
        match tuple_rejection(&t, engine) {
            None => kept.push(t),
            Some(why) => ctx.audit.push(AuditEvent {
                table: table.key(),
                rule: format!("filter_{why}"),
                axis: None,
                index: None,
                from: t.property.code(),
                to: 0,
                detail: format!("{} {} {}", t.entity, t.value, t.unit),
            }),
        }
    }

    let (row_labels, col_labels) = match orient {
        Axis::Row => (labels, cross_labels),
        Axis::Col => (cross_labels, labels),
    };
    Ok(PostprocessOutput {
        orientation: orient,
        row_labels,
        col_labels,
        tuples: kept,
        audit: ctx.audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::LazyLock;

    static ENGINE: LazyLock<Engine> = LazyLock::new(Engine::default);

    fn labeled(rows: &[&[&str]], caption: &str, cols: &[u8]) -> Table {
        let mut t = Table::from_rows("S1", 0, caption, rows);
        t.col_labels = cols.iter().map(|c| LabelCode::new(*c).unwrap()).collect();
        t
    }

    fn tuple(p: Property, value: f64, unit: &str) -> ExtractedTuple {
        ExtractedTuple {
            entity: make_entity_id("P", 0, 1, 1, (3, 3), "G1", EntityKind::Property).unwrap(),
            property: p,
            value,
            unit: unit.into(),
            value_kind: ValueKind::Single,
        }
    }

    #[test]
    fn exponent_repair() {
        let e = &*ENGINE;
        let t = labeled(&[&["Glass", "CTE (×10−6 /K)"], &["G1", "8.2"], &["G2", "8.4"]], "", &[3, 11]);
        let out = post_process_table(&t, e, None).unwrap();
        assert_eq!(out.tuples.len(), 2);
        assert!((out.tuples[0].value - 8.2e-6).abs() < 1e-18);
        assert_eq!(out.tuples[0].unit, "1/K");
        assert_eq!(out.tuples[0].entity.to_string(), "S1_0_1_1_G1");
        assert_eq!(out.audit.iter().filter(|a| a.rule == "value_fix").count(), 1);
    }

    #[test]
    fn median_veto() {
        let e = &*ENGINE;
        let t = labeled(&[&["Glass", "Density"], &["G1", "1.2e6"], &["G2", "1.2e6"]], "", &[3, 13]);
        let out = post_process_table(&t, e, None).unwrap();
        assert_eq!(out.col_labels[1], LabelCode::OTHER);
        assert!(out.tuples.is_empty());
    }

    #[test]
    fn no_op_path() {
        let e = &*ENGINE;
        let t = labeled(&[&["Glass", "Density (g/cm3)"], &["G1", "2.51"], &["G2", "2.60"]], "", &[3, 13]);
        let out = post_process_table(&t, e, None).unwrap();
        assert_eq!(out.col_labels, t.col_labels);
        assert_eq!(out.tuples.len(), 2);
        assert_eq!(out.tuples[1].unit, "g/cm3");
    }

    #[test]
    fn heading_checks() {
        let e = &*ENGINE;
        let melt = Property::MeltingTemperature.label();
        assert!(!check_heading("P", &["Tm", "0.2"], "transition metal content", melt, e, None));
        assert!(!check_heading("P", &["SiO2 (mol%)", "60"], "", Property::Density.label(), e, None));
        assert!(check_heading("P", &["anything"], "", LabelCode::OTHER, e, None));
        assert!(!check_heading("P", &["Tm", "900"], "Thermal data", melt, e, None));
        assert!(check_heading("P", &["Tm", "900"], "Thermal data", melt, e, Some(&|_, _| true)));
        assert!(check_heading("P", &["Tm", "900"], "Melting behaviour", melt, e, None));
    }

    #[test]
    fn direct() {
        let e = &*ENGINE;
        assert_eq!(direct_matching("Abbe value", e), Property::AbbeValue.label());
        assert_eq!(direct_matching("Refractive Index n", e), Property::RefractiveIndex.label());
        assert_eq!(direct_matching("Sample", e), LabelCode::OTHER);
    }

    #[test]
    fn filters() {
        let e = &*ENGINE;
        let input = vec![
            tuple(Property::Density, -1.0, "g/cm3"),
            tuple(Property::PoissonRatio, 0.3, ""),
            tuple(Property::AbbeValue, 60.0, "GPa"),
            tuple(Property::PoissonRatio, 0.7, ""),
            tuple(Property::Density, 2.5, "g/cm3"),
        ];
        let out = filter_tuples(input.clone(), e);
        assert_eq!(out, vec![input[1].clone(), input[4].clone()]);
        assert_eq!(filter_tuples(out.clone(), e), out);
    }

    #[test]
    fn resistivity_is_inverted() {
        let e = &*ENGINE;
        let t = labeled(&[&["Glass", "σ (Ω cm)"], &["G1", "1e5"], &["G2", "2e5"]], "Electrical conductivity", &[3, 21]);
        let out = post_process_table(&t, e, None).unwrap();
        assert_eq!(out.tuples[0].unit, "S/cm");
        assert!((out.tuples[0].value - 1e-5).abs() < 1e-18);
    }
}

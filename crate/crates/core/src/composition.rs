//! Composition-table relabeling: constituent detection, completeness check
//! and constituent/value edge lists.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::config::{contains_any, Engine};
use crate::error::{Error, Result};
use crate::label::LabelCode;
use crate::numeric::{median, normalize_text};
use crate::table::{Axis, Table};

static FRACTION_UNIT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(mol|mole|wt|mass|weight|at|atomic)\s*\.?\s*%").unwrap()
});
static ELEMENT_TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([A-Z][a-z]?)(\d+(?:\.\d+)?|[xyz])?").unwrap());
static FORMULA: LazyLock<Regex> = LazyLock::new(|| {
    let unit = r"(?:[A-Z][a-z]?(?:\d+(?:\.\d+)?|[xyz])?|\((?:[A-Z][a-z]?(?:\d+(?:\.\d+)?)?)+\)(?:\d+(?:\.\d+)?|[xyz])?)";
    let coef = r"(?:\d+(?:\.\d+)?|[xyz]|\(\d*\s*-\s*[xyz]\))?";
    Regex::new(&format!(r"^{coef}{unit}+(?:-{coef}{unit}+)*$")).unwrap()
});

const ELEMENTS: &[&str] = &[
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu",
];

/// A formula built from valid element symbols, optionally hyphen-joined.
pub fn is_chemical_expression(text: &str) -> bool {
    let t = text.trim();
    if t.is_empty() || !FORMULA.is_match(t) {
        return false;
    }
    let mut elements = 0;
    for cap in ELEMENT_TOKEN.captures_iter(t) {
        if !ELEMENTS.contains(&&cap[1]) {
            return false;
        }
        elements += 1;
    }
    elements > 0
}

fn canonical_fraction_unit(raw: &str) -> &'static str {
    match raw.to_lowercase().as_str() {
        "mol" | "mole" => "mol%",
        "wt" | "mass" | "weight" => "wt%",
        _ => "at%",
    }
}

/// Fraction unit token found in `text` ("mol%", "wt%", "at%") or "".
pub fn fraction_unit(text: &str) -> String {
    FRACTION_UNIT
        .captures(&normalize_text(text))
        .map(|c| canonical_fraction_unit(&c[1]).to_string())
        .unwrap_or_default()
}

fn lexicon_match(text: &str, engine: &Engine) -> Option<String> {
    let lower = text.to_lowercase();
    engine.cfg.composition.compounds.iter().find_map(|c| {
        (c.formula == text || c.aliases.iter().any(|a| a.to_lowercase() == lower)).then(|| c.formula.clone())
    })
}

/// Split a header into (fraction unit, constituent). Either part may be
/// empty; exclusion tokens empty both.
pub fn detect_constituents(header: &str, engine: &Engine) -> (String, String) {
    let text = normalize_text(header);
    if contains_any(&text, &engine.cfg.composition.exclusion_tokens) {
        return (String::new(), String::new());
    }
    let unit = fraction_unit(&text);
    let stripped = FRACTION_UNIT.replace_all(&text, " ");
    let stripped: String = stripped
        .chars()
        .map(|c| if "[]{},;:".contains(c) { ' ' } else { c })
        .collect();
    let stripped = stripped.replace("()", " ");
    let candidates = std::iter::once(stripped.trim().to_string())
        .chain(stripped.split_whitespace().map(str::to_string));
    for cand in candidates {
        let cand = cand.trim_matches(|c: char| c == '(' || c == ')' || c.is_whitespace()).to_string();
        if cand.is_empty() {
            continue;
        }
        if let Some(f) = lexicon_match(&cand, engine) {
            return (unit, f);
        }
        if is_chemical_expression(&cand) {
            return (unit, cand);
        }
    }
    (unit, String::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionEdge {
    /// Heading cell naming the constituent.
    pub constituent: (usize, usize),
    /// Cell holding the fraction.
    pub value: (usize, usize),
    pub orientation: Axis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositionReport {
    /// Axis along which composition lines (label 2) run.
    pub orientation: Axis,
    pub edges: Vec<CompositionEdge>,
    pub comp_table: bool,
    pub sum_less_100: Option<bool>,
    pub archived_row_labels: Vec<LabelCode>,
    pub archived_col_labels: Vec<LabelCode>,
    /// Median of non-zero material sums, when any.
    pub sum_median: Option<f64>,
}

/// True when the median row sum sits inside one of the completeness windows.
pub fn is_complete(sum_median: f64, windows: &[[f64; 2]]) -> bool {
    windows.iter().any(|[lo, hi]| *lo < sum_median && sum_median < *hi)
}

/// Unlabeled lines on `axis` whose heading names a constituent with a
/// fraction unit (heading or caption) and whose values clear the median floor.
pub fn composition_candidates(table: &Table, axis: Axis, engine: &Engine) -> Vec<usize> {
    let caption_unit = fraction_unit(&table.caption);
    (0..table.num_lines(axis))
        .filter(|&j| table.labels(axis)[j].is_other())
        .filter(|&j| {
            let (unit, constituent) = detect_constituents(table.cell_at(axis, j, 0), engine);
            if constituent.is_empty() || (unit.is_empty() && caption_unit.is_empty()) {
                return false;
            }
            let vals: Vec<f64> = table.line_values(axis, j).into_iter().map(|(_, n)| n.value).collect();
            median(&vals).is_some_and(|m| m > engine.cfg.composition.min_median)
        })
        .collect()
}

/// Axis of the composition lines. Existing labels decide; without any
/// composition label the axis with more candidate headings wins, ties to
/// columns.
fn composition_orientation(table: &Table, engine: &Engine) -> Axis {
    let has2 = |a: Axis| table.labels(a).iter().any(|l| l.code() == 2);
    if has2(Axis::Row) != has2(Axis::Col) {
        return if has2(Axis::Row) { Axis::Row } else { Axis::Col };
    }
    if !has2(Axis::Row) {
        let rows = composition_candidates(table, Axis::Row, engine).len();
        let cols = composition_candidates(table, Axis::Col, engine).len();
        if rows != cols {
            return if rows > cols { Axis::Row } else { Axis::Col };
        }
    }
    let has = |a: Axis| table.labels(a).iter().any(|l| matches!(l.code(), 2 | 3));
    if has(Axis::Row) && !has(Axis::Col) {
        Axis::Row
    } else {
        Axis::Col
    }
}

fn line_value(table: &Table, axis: Axis, i: usize, k: usize) -> Option<f64> {
    let cell = table.cell_at(axis, i, k);
    if crate::numeric::looks_numeric(cell) {
        crate::numeric::num_value(cell)
    } else {
        None
    }
}

/// Relabel one table in place. Composition lines get 2, material lines with
/// composition values get 1; non-zero labels are kept.
pub fn relabel_composition_table(table: &mut Table, engine: &Engine) -> Result<CompositionReport> {
    table.validate().map_err(|e| Error::Relabel {
        table: table.key(),
        message: e.to_string(),
    })?;
    let archived_row_labels = table.row_labels.clone();
    let archived_col_labels = table.col_labels.clone();
    let orient = composition_orientation(table, engine);
    let cross = orient.other();
    let caption_unit = fraction_unit(&table.caption);
    let min_median = engine.cfg.composition.min_median;

    for j in 0..table.num_lines(orient) {
        if !table.labels(orient)[j].is_other() {
            continue;
        }
        let (unit, constituent) = detect_constituents(table.cell_at(orient, j, 0), engine);
        let unit = if unit.is_empty() { caption_unit.clone() } else { unit };
        if unit.is_empty() || constituent.is_empty() {
            continue;
        }
        let vals: Vec<f64> = table.line_values(orient, j).into_iter().map(|(_, n)| n.value).collect();
        if median(&vals).is_some_and(|m| m > min_median) {
            table.labels_mut(orient)[j] = LabelCode::COMPOSITION;
        }
    }
    let comp_lines: Vec<usize> = (0..table.num_lines(orient))
        .filter(|&j| table.labels(orient)[j] == LabelCode::COMPOSITION)
        .collect();
    let comp_table = !comp_lines.is_empty();

    let mut sums = Vec::new();
    if comp_table {
        for i in 1..table.num_lines(cross) {
            let vals: Vec<f64> = comp_lines.iter().filter_map(|&j| line_value(table, cross, i, j)).collect();
            if table.labels(cross)[i].is_other() && median(&vals).is_some_and(|m| m >= 0.0) {
                table.labels_mut(cross)[i] = LabelCode::CONSTITUENT;
            }
            if table.labels(cross)[i] == LabelCode::CONSTITUENT {
                let s: f64 = vals.iter().sum();
                if s != 0.0 {
                    sums.push(s);
                }
            }
        }
    }
    let sum_median = median(&sums);
    let sum_less_100 = comp_table.then(|| {
        !sum_median.is_some_and(|m| is_complete(m, &engine.cfg.composition.sum_windows))
    });
    table.comp_table = comp_table;
    table.sum_less_100 = sum_less_100;

    let edges = edge_list(table, orient);
    Ok(CompositionReport {
        orientation: orient,
        edges,
        comp_table,
        sum_less_100,
        archived_row_labels,
        archived_col_labels,
        sum_median,
    })
}

/// Pair each composition heading with the fraction cell of every
/// constituent-labeled material line; empty cells are skipped.
pub fn edge_list(table: &Table, orient: Axis) -> Vec<CompositionEdge> {
    let cross = orient.other();
    let mut edges = Vec::new();
    for i in 0..table.num_lines(cross) {
        if table.labels(cross)[i] != LabelCode::CONSTITUENT {
            continue;
        }
        for j in 0..table.num_lines(orient) {
            if table.labels(orient)[j] != LabelCode::COMPOSITION {
                continue;
            }
            if table.cell_at(orient, j, i).trim().is_empty() {
                continue;
            }
            edges.push(CompositionEdge {
                constituent: Table::position(orient, j, 0),
                value: Table::position(orient, j, i),
                orientation: orient,
            });
        }
    }
    edges
}

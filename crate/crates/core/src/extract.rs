//! Per-table extraction: composition entities plus filtered property tuples.

use serde::{Deserialize, Serialize};

use crate::annotate::annotate_table;
use crate::composition::{detect_constituents, fraction_unit, relabel_composition_table};
use crate::config::Engine;
use crate::entity::{make_entity_id, EntityId, EntityKind};
use crate::error::Result;
use crate::label::LabelCode;
use crate::numeric::{looks_numeric, num_value};
use crate::postprocess::{post_process_table, AuditEvent, ExtractedTuple, FullTextHook};
use crate::table::{Axis, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constituent {
    pub name: String,
    pub value: f64,
    #[serde(default)]
    pub unit: String,
}

/// One material's composition as read from a composition table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionEntity {
    #[serde(with = "crate::entity::composition_id")]
    pub entity: EntityId,
    /// Raw material id text, empty when the table has none.
    #[serde(default)]
    pub gid: String,
    pub constituents: Vec<Constituent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableExtraction {
    #[serde(skip)]
    pub key: String,
    pub pii: String,
    pub table_index: usize,
    /// Axis whose lines carry properties or compositions.
    pub orientation: Axis,
    pub row_labels: Vec<LabelCode>,
    pub col_labels: Vec<LabelCode>,
    pub compositions: Vec<CompositionEntity>,
    pub tuples: Vec<ExtractedTuple>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sum_less_100: Option<bool>,
    /// Rule firings; written separately when auditing.
    #[serde(skip)]
    pub audit: Vec<AuditEvent>,
}

/// Index of a material line for an entity position on a table oriented
/// along `orient`.
pub fn material_index(orient: Axis, row: usize, col: usize) -> usize {
    match orient {
        Axis::Col => row,
        Axis::Row => col,
    }
}

fn compositions(table: &Table, orient: Axis, engine: &Engine) -> Result<Vec<CompositionEntity>> {
    let cross = orient.other();
    let comp_lines: Vec<usize> = (0..table.num_lines(orient))
        .filter(|&j| table.labels(orient)[j] == LabelCode::COMPOSITION)
        .collect();
    if comp_lines.is_empty() {
        return Ok(Vec::new());
    }
    let gid_line = table.labels(orient).iter().position(|l| *l == LabelCode::MATERIAL_ID);
    let caption_unit = fraction_unit(&table.caption);
    let mut out = Vec::new();
    for i in 0..table.num_lines(cross) {
        if table.labels(cross)[i] != LabelCode::CONSTITUENT {
            continue;
        }
        let mut constituents = Vec::new();
        for &j in &comp_lines {
            let cell = table.cell_at(orient, j, i);
            if !looks_numeric(cell) {
                continue;
            }
            let Some(value) = num_value(cell) else { continue };
            let (unit, name) = detect_constituents(table.cell_at(orient, j, 0), engine);
            let name = if name.is_empty() {
                table.cell_at(orient, j, 0).trim().to_string()
            } else {
                name
            };
            constituents.push(Constituent {
                name,
                value,
                unit: if unit.is_empty() { caption_unit.clone() } else { unit },
            });
        }
        if constituents.is_empty() {
            continue;
        }
        let anchor = gid_line.unwrap_or(0);
        let gid = gid_line.map_or("", |g| table.cell_at(orient, g, i)).trim().to_string();
        let (row, col) = Table::position(orient, anchor, i);
        let entity = make_entity_id(&table.pii, table.table_index, row, col, table.shape(), &gid, EntityKind::Composition)?;
        out.push(CompositionEntity { entity, gid, constituents });
    }
    Ok(out)
}

/// Extract from a table whose labels are already set (gold, supervised or
/// predicted). Composition relabeling runs first on a copy.
pub fn extract_labeled(table: &Table, engine: &Engine, hook: Option<FullTextHook>) -> Result<TableExtraction> {
    let mut t = table.clone();
    let comp = relabel_composition_table(&mut t, engine)?;
    let post = post_process_table(&t, engine, hook)?;
    let comp_orient = comp.orientation;
    t.row_labels = post.row_labels.clone();
    t.col_labels = post.col_labels.clone();
    let compositions = compositions(&t, comp_orient, engine)?;
    let orientation = if comp.comp_table && !t.is_property_table() {
        comp_orient
    } else {
        post.orientation
    };
    Ok(TableExtraction {
        key: t.key(),
        pii: t.pii.clone(),
        table_index: t.table_index,
        orientation,
        row_labels: post.row_labels,
        col_labels: post.col_labels,
        compositions,
        tuples: post.tuples,
        sum_less_100: t.sum_less_100,
        audit: post.audit,
    })
}

/// Rules-only path: annotate unlabeled headers, then extract.
pub fn extract_with_rules(table: &Table, engine: &Engine, hook: Option<FullTextHook>) -> Result<TableExtraction> {
    let mut t = table.clone();
    annotate_table(&mut t, engine);
    extract_labeled(&t, engine, hook)
}

//! Composition–property linking, knowledge-base persistence and screening.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::entity::EntityId;
use crate::error::{Error, Result};
use crate::extract::{material_index, CompositionEntity, Constituent, TableExtraction};
use crate::label::Property;
use crate::postprocess::ExtractedTuple;
use crate::table::Axis;

pub const KB_SCHEMA: &str = "tablekb.kb";
pub const KB_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkKind {
    Intra,
    Inter,
    UnlinkedProperty,
    UnlinkedComposition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    #[serde(with = "crate::entity::composition_id")]
    pub entity: EntityId,
    #[serde(default)]
    pub gid: String,
    pub constituents: Vec<Constituent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub pii: String,
    pub tables: Vec<usize>,
    pub link_kind: LinkKind,
    /// Orientation of the table the record is anchored in.
    pub orientation: Axis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbRecord {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub material: Option<Material>,
    /// Material id for records without a composition.
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub gid: String,
    pub properties: Vec<ExtractedTuple>,
    pub provenance: Provenance,
}

/// Entities of one table as the linker sees them.
#[derive(Debug, Clone, PartialEq)]
pub struct TableEntities {
    pub pii: String,
    pub table_index: usize,
    pub orientation: Axis,
    pub compositions: Vec<CompositionEntity>,
    pub tuples: Vec<ExtractedTuple>,
}

impl From<&TableExtraction> for TableEntities {
    fn from(x: &TableExtraction) -> Self {
        TableEntities {
            pii: x.pii.clone(),
            table_index: x.table_index,
            orientation: x.orientation,
            compositions: x.compositions.clone(),
            tuples: x.tuples.clone(),
        }
    }
}

/// Normalized material id used as the cross-table join key.
pub fn normalize_gid(gid: &str) -> String {
    gid.trim().to_lowercase()
}

fn tuple_key(t: &ExtractedTuple) -> (EntityId, Property, u64, String) {
    (t.entity.clone(), t.property, t.value.to_bits(), t.unit.clone())
}

/// Pairs (composition index, tuple index) sharing a material line.
pub fn link_intra_table(table: &TableEntities) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (ci, c) in table.compositions.iter().enumerate() {
        let m = material_index(table.orientation, c.entity.row, c.entity.col);
        for (ti, t) in table.tuples.iter().enumerate() {
            if material_index(table.orientation, t.entity.row, t.entity.col) == m {
                out.push((ci, ti));
            }
        }
    }
    out
}

/// Pairs ((table, composition), (table, tuple)) across distinct tables of one
/// article with equal normalized material ids.
pub fn link_inter_table(tables: &[TableEntities]) -> Vec<((usize, usize), (usize, usize))> {
    let mut out = Vec::new();
    for (a, ta) in tables.iter().enumerate() {
        for (ci, c) in ta.compositions.iter().enumerate() {
            let g = normalize_gid(&c.entity.material_id);
            if g.is_empty() {
                continue;
            }
            for (b, tb) in tables.iter().enumerate() {
                if a == b || ta.pii != tb.pii || ta.table_index == tb.table_index {
                    continue;
                }
                for (ti, t) in tb.tuples.iter().enumerate() {
                    if normalize_gid(&t.entity.material_id) == g {
                        out.push(((a, ci), (b, ti)));
                    }
                }
            }
        }
    }
    out
}

/// Build the knowledge base. Same-table links take precedence over
/// id-based links for the same (composition, tuple) pair; records come out
/// in a canonical order so linking is idempotent.
pub fn link(tables: &[TableEntities]) -> Vec<KbRecord> {
    let mut tables: Vec<TableEntities> = tables.to_vec();
    tables.sort_by(|a, b| (&a.pii, a.table_index).cmp(&(&b.pii, b.table_index)));
    for t in &mut tables {
        t.compositions.sort_by(|a, b| a.entity.cmp(&b.entity));
        t.compositions.dedup_by(|a, b| a.entity == b.entity);
        t.tuples.sort_by(|a, b| tuple_key(a).cmp(&tuple_key(b)));
        t.tuples.dedup_by(|a, b| tuple_key(a) == tuple_key(b));
    }

    let mut intra: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    let mut pair_seen = BTreeSet::new();
    for (ti, t) in tables.iter().enumerate() {
        for (ci, pi) in link_intra_table(t) {
            intra.entry((ti, ci)).or_default().push((ti, pi));
            pair_seen.insert(((ti, ci), (ti, pi)));
        }
    }
    let mut by_pii: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, t) in tables.iter().enumerate() {
        by_pii.entry(t.pii.as_str()).or_default().push(i);
    }
    let mut inter: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for idx in by_pii.values() {
        let group: Vec<TableEntities> = idx.iter().map(|&i| tables[i].clone()).collect();
        for ((a, ci), (b, pi)) in link_inter_table(&group) {
            let key = ((idx[a], ci), (idx[b], pi));
            if pair_seen.insert(key) {
                inter.entry(key.0).or_default().push(key.1);
            }
        }
    }
    let linked_tuples: BTreeSet<(usize, usize)> = pair_seen.iter().map(|(_, p)| *p).collect();

    let mut records = Vec::new();
    for (ti, t) in tables.iter().enumerate() {
        for (ci, c) in t.compositions.iter().enumerate() {
            let material = Material {
                entity: c.entity.clone(),
                gid: c.gid.clone(),
                constituents: c.constituents.clone(),
            };
            let mut any = false;
            for (kind, map) in [(LinkKind::Intra, &intra), (LinkKind::Inter, &inter)] {
                if let Some(ps) = map.get(&(ti, ci)) {
                    any = true;
                    let mut table_ids: BTreeSet<usize> = ps.iter().map(|(x, _)| tables[*x].table_index).collect();
                    table_ids.insert(t.table_index);
                    records.push(KbRecord {
                        material: Some(material.clone()),
                        gid: String::new(),
                        properties: ps.iter().map(|(x, p)| tables[*x].tuples[*p].clone()).collect(),
                        provenance: Provenance {
                            pii: t.pii.clone(),
                            tables: table_ids.into_iter().collect(),
                            link_kind: kind,
                            orientation: t.orientation,
                        },
                    });
                }
            }
            if !any {
                records.push(KbRecord {
                    material: Some(material),
                    gid: String::new(),
                    properties: Vec::new(),
                    provenance: Provenance {
                        pii: t.pii.clone(),
                        tables: vec![t.table_index],
                        link_kind: LinkKind::UnlinkedComposition,
                        orientation: t.orientation,
                    },
                });
            }
        }
        let mut groups: BTreeMap<usize, Vec<ExtractedTuple>> = BTreeMap::new();
        for (pi, tu) in t.tuples.iter().enumerate() {
            if !linked_tuples.contains(&(ti, pi)) {
                groups
                    .entry(material_index(t.orientation, tu.entity.row, tu.entity.col))
                    .or_default()
                    .push(tu.clone());
            }
        }
        for (_, tuples) in groups {
            records.push(KbRecord {
                material: None,
                gid: tuples[0].entity.material_id.clone(),
                properties: tuples,
                provenance: Provenance {
                    pii: t.pii.clone(),
                    tables: vec![t.table_index],
                    link_kind: LinkKind::UnlinkedProperty,
                    orientation: t.orientation,
                },
            });
        }
    }
    records
}

/// Recover per-table entities from a knowledge base, for re-linking.
pub fn entities_from_kb(records: &[KbRecord]) -> Vec<TableEntities> {
    let mut tables: BTreeMap<(String, usize), TableEntities> = BTreeMap::new();
    let mut orientations = BTreeMap::new();
    for r in records {
        let home = match &r.material {
            Some(m) => Some(m.entity.table_index),
            None => r.provenance.tables.first().copied(),
        };
        if let Some(tid) = home {
            orientations.insert((r.provenance.pii.clone(), tid), r.provenance.orientation);
        }
    }
    let orientations = &orientations;
    fn entry<'m>(
        tables: &'m mut BTreeMap<(String, usize), TableEntities>,
        orientations: &BTreeMap<(String, usize), Axis>,
        pii: &str,
        tid: usize,
    ) -> &'m mut TableEntities {
        let key = (pii.to_string(), tid);
        let orientation = orientations.get(&key).copied().unwrap_or(Axis::Col);
        tables.entry(key).or_insert_with(|| TableEntities {
            pii: pii.to_string(),
            table_index: tid,
            orientation,
            compositions: Vec::new(),
            tuples: Vec::new(),
        })
    }
    for r in records {
        if let Some(m) = &r.material {
            entry(&mut tables, orientations, &m.entity.pii, m.entity.table_index)
                .compositions
                .push(CompositionEntity {
                    entity: m.entity.clone(),
                    gid: m.gid.clone(),
                    constituents: m.constituents.clone(),
                });
        }
        for t in &r.properties {
            entry(&mut tables, orientations, &t.entity.pii, t.entity.table_index).tuples.push(t.clone());
        }
    }
    tables.into_values().collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct KbHeader {
    schema: String,
    version: u32,
}

/// KB document bytes and its index (normalized gid -> record byte offsets).
pub fn serialize_kb(records: &[KbRecord]) -> Result<(Vec<u8>, Vec<u8>)> {
    let mut out = Vec::new();
    serde_json::to_writer(
        &mut out,
        &KbHeader {
            schema: KB_SCHEMA.into(),
            version: KB_VERSION,
        },
    )?;
    out.push(b'\n');
    let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for r in records {
        let offset = out.len();
        let gid = r.material.as_ref().map_or(r.gid.as_str(), |m| m.entity.material_id.as_str());
        let g = normalize_gid(gid);
        if !g.is_empty() {
            index.entry(g).or_default().push(offset);
        }
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    let mut idx = serde_json::to_vec(&index)?;
    idx.push(b'\n');
    Ok((out, idx))
}

pub fn parse_kb(bytes: &[u8]) -> Result<Vec<KbRecord>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::KbFormat(e.to_string()))?;
    let mut lines = text.lines();
    let header: KbHeader = lines
        .next()
        .ok_or_else(|| Error::KbFormat("missing header line".into()))
        .and_then(|l| serde_json::from_str(l).map_err(|e| Error::KbFormat(format!("bad header: {e}"))))?;
    if header.schema != KB_SCHEMA || header.version != KB_VERSION {
        return Err(Error::KbFormat(format!("unsupported schema {} v{}", header.schema, header.version)));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| Error::KbFormat(format!("record {}: {e}", n + 1))))
        .collect()
}

pub fn index_path(kb: &Path) -> PathBuf {
    let mut s = kb.as_os_str().to_owned();
    s.push(".idx");
    PathBuf::from(s)
}

pub fn write_kb(path: &Path, records: &[KbRecord]) -> Result<()> {
    let (kb, idx) = serialize_kb(records)?;
    std::fs::File::create(path)?.write_all(&kb)?;
    std::fs::File::create(index_path(path))?.write_all(&idx)?;
    Ok(())
}

pub fn read_kb(path: &Path) -> Result<Vec<KbRecord>> {
    parse_kb(&std::fs::read(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    Ge,
    Gt,
    Le,
    Lt,
    Eq,
}

impl Comparator {
    pub fn holds(self, x: f64, y: f64) -> bool {
        match self {
            Comparator::Ge => x >= y,
            Comparator::Gt => x > y,
            Comparator::Le => x <= y,
            Comparator::Lt => x < y,
            Comparator::Eq => x == y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub property: Property,
    pub comparator: Comparator,
    pub threshold: f64,
    pub unit: String,
}

pub fn parse_property(name: &str) -> Result<Property> {
    let n = name.trim().to_lowercase().replace([' ', '-'], "_").replace('\'', "");
    Property::ALL
        .into_iter()
        .find(|p| p.key() == n)
        .ok_or_else(|| Error::Query(format!("unknown property `{}`", name.trim())))
}

impl std::str::FromStr for Predicate {
    type Err = Error;

    /// `property>=value@unit`; the `@unit` part is omitted for unitless
    /// properties.
    fn from_str(s: &str) -> Result<Predicate> {
        let ops = [(">=", Comparator::Ge), ("<=", Comparator::Le), ("==", Comparator::Eq), (">", Comparator::Gt), ("<", Comparator::Lt), ("=", Comparator::Eq)];
        let (pos, op, cmp) = ops
            .iter()
            .filter_map(|(op, c)| s.find(op).map(|p| (p, *op, *c)))
            .min_by_key(|(p, op, _)| (*p, std::cmp::Reverse(op.len())))
            .ok_or_else(|| Error::Query(format!("no comparator in `{s}`")))?;
        let property = parse_property(&s[..pos])?;
        let rest = &s[pos + op.len()..];
        let (num, unit) = rest.split_once('@').unwrap_or((rest, ""));
        let threshold: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::Query(format!("bad threshold `{}`", num.trim())))?;
        Ok(Predicate {
            property,
            comparator: cmp,
            threshold,
            unit: unit.trim().to_string(),
        })
    }
}

pub fn record_matches(r: &KbRecord, preds: &[Predicate]) -> bool {
    preds.iter().all(|q| {
        r.properties
            .iter()
            .any(|t| t.property == q.property && t.unit == q.unit && q.comparator.holds(t.value, q.threshold))
    })
}

/// Conjunctive filter over records.
pub fn screen<'a>(records: &'a [KbRecord], preds: &[Predicate]) -> Vec<&'a KbRecord> {
    records.iter().filter(|r| record_matches(r, preds)).collect()
}

//! Source-traceable entity identifiers.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Property,
    Composition,
}

/// `PII_TID_R_C_ID` for properties, `PII_TID_R_C_0_ID` for compositions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId {
    pub pii: String,
    pub table_index: usize,
    pub row: usize,
    pub col: usize,
    pub material_id: String,
    pub kind: EntityKind,
}

/// Material ids may not contain the id separator; underscores become hyphens.
pub fn sanitize_material_id(raw: &str) -> String {
    raw.trim().replace('_', "-")
}

/// Build an entity id, checking `row`/`col` against the table shape.
pub fn make_entity_id(
    pii: &str,
    table_index: usize,
    row: usize,
    col: usize,
    shape: (usize, usize),
    material_id: &str,
    kind: EntityKind,
) -> Result<EntityId> {
    let (rows, cols) = shape;
    if row >= rows || col >= cols {
        return Err(Error::OutOfBounds {
            row,
            col,
            rows,
            cols,
        });
    }
    Ok(EntityId {
        pii: pii.to_string(),
        table_index,
        row,
        col,
        material_id: sanitize_material_id(material_id),
        kind,
    })
}

impl EntityId {
    /// Parse the serialized form. The kind must be known by the caller since
    /// a property id whose material id is `0`-prefixed cannot otherwise be
    /// told apart.
    pub fn parse(s: &str, kind: EntityKind) -> Result<EntityId> {
        let bad = || Error::InvalidEntityId(s.to_string());
        let mut parts = s.rsplitn(
            match kind {
                EntityKind::Property => 5,
                EntityKind::Composition => 6,
            },
            '_',
        );
        let material_id = parts.next().ok_or_else(bad)?.to_string();
        if kind == EntityKind::Composition && parts.next() != Some("0") {
            return Err(bad());
        }
        let col = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let row = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let table_index = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let pii = parts.next().ok_or_else(bad)?.to_string();
        Ok(EntityId {
            pii,
            table_index,
            row,
            col,
            material_id,
            kind,
        })
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EntityKind::Property => write!(
                f,
                "{}_{}_{}_{}_{}",
                self.pii, self.table_index, self.row, self.col, self.material_id
            ),
            EntityKind::Composition => write!(
                f,
                "{}_{}_{}_{}_0_{}",
                self.pii, self.table_index, self.row, self.col, self.material_id
            ),
        }
    }
}

/// Serialized as the id string; deserialization assumes a property id.
/// Composition ids are carried by [`crate::kb::CompositionEntity`], which
/// parses with the right kind.
impl Serialize for EntityId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        EntityId::parse(&s, EntityKind::Property).map_err(serde::de::Error::custom)
    }
}

pub(crate) mod composition_id {
    use super::*;

    pub fn serialize<S: Serializer>(id: &EntityId, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(id)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<EntityId, D::Error> {
        let s = String::deserialize(d)?;
        EntityId::parse(&s, EntityKind::Composition).map_err(serde::de::Error::custom)
    }
}

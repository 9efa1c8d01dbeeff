//! Table extraction engine: table model, weak labeling, rule pipelines,
//! unit canonicalization, knowledge-base linking and evaluation.

pub mod annotate;
pub mod augment;
pub mod composition;
pub mod config;
pub mod entity;
pub mod error;
pub mod extract;
pub mod graph;
pub mod kb;
pub mod label;
pub mod metrics;
pub mod numeric;
pub mod postprocess;
pub mod supervise;
pub mod table;
pub mod units;

pub use config::{Config, Engine};
pub use entity::{make_entity_id, EntityId, EntityKind};
pub use error::{Error, Result};
pub use extract::{CompositionEntity, TableExtraction};
pub use label::{LabelCode, Property, NUM_CLASSES};
pub use numeric::{find_num, NumericParse};
pub use postprocess::ExtractedTuple;
pub use table::{parse_table_document, Axis, Table};

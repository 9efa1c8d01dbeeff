//! In-memory table model and the line-delimited table-document format.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::LabelCode;
use crate::numeric::{find_num, looks_numeric, NumericParse};

/// A rectangular grid of cell strings with its caption and header labels.
///
/// `cells[0]` is the first row. `row_labels[i]` labels row `i` as a whole and
/// `col_labels[j]` labels column `j`; in a column-oriented table the heading
/// of column `j` is `cells[0][j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub pii: String,
    pub table_index: usize,
    pub caption: String,
    pub cells: Vec<Vec<String>>,
    pub row_labels: Vec<LabelCode>,
    pub col_labels: Vec<LabelCode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum_less_100: Option<bool>,
    #[serde(default)]
    pub comp_table: bool,
}

/// Which axis carries the headers of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Row,
    Col,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::Row => Axis::Col,
            Axis::Col => Axis::Row,
        }
    }
}

impl Table {
    /// Build a table with all-zero labels, validating rectangularity.
    pub fn new(pii: &str, table_index: usize, caption: &str, cells: Vec<Vec<String>>) -> Result<Table> {
        let t = Table {
            pii: pii.to_string(),
            table_index,
            caption: caption.to_string(),
            row_labels: vec![LabelCode::OTHER; cells.len()],
            col_labels: vec![LabelCode::OTHER; cells.first().map_or(0, Vec::len)],
            cells,
            sum_less_100: None,
            comp_table: false,
        };
        t.validate()?;
        Ok(t)
    }

    /// Convenience constructor from string slices; panics on ragged input.
    pub fn from_rows(pii: &str, table_index: usize, caption: &str, rows: &[&[&str]]) -> Table {
        let cells = rows
            .iter()
            .map(|r| r.iter().map(|c| c.to_string()).collect())
            .collect();
        Table::new(pii, table_index, caption, cells).expect("rectangular table")
    }

    pub fn num_rows(&self) -> usize {
        self.cells.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cells.first().map_or(0, Vec::len)
    }

    pub fn num_cells(&self) -> usize {
        self.num_rows() * self.num_cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_rows(), self.num_cols())
    }

    /// `pii/table_index`, used in diagnostics.
    pub fn key(&self) -> String {
        format!("{}/{}", self.pii, self.table_index)
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.num_cols();
        if self.cells.is_empty() || expected == 0 {
            return Err(Error::InvalidTable {
                table: self.key(),
                message: "table must have at least one row and one column".into(),
            });
        }
        for (row, r) in self.cells.iter().enumerate() {
            if r.len() != expected {
                return Err(Error::Ragged {
                    table: self.key(),
                    row,
                    found: r.len(),
                    expected,
                });
            }
        }
        if self.row_labels.len() != self.num_rows() || self.col_labels.len() != expected {
            return Err(Error::InvalidTable {
                table: self.key(),
                message: format!(
                    "label vectors have lengths {}/{} for a {}x{} grid",
                    self.row_labels.len(),
                    self.col_labels.len(),
                    self.num_rows(),
                    expected
                ),
            });
        }
        Ok(())
    }

    pub fn labels(&self, axis: Axis) -> &[LabelCode] {
        match axis {
            Axis::Row => &self.row_labels,
            Axis::Col => &self.col_labels,
        }
    }

    pub fn labels_mut(&mut self, axis: Axis) -> &mut Vec<LabelCode> {
        match axis {
            Axis::Row => &mut self.row_labels,
            Axis::Col => &mut self.col_labels,
        }
    }

    /// Cells of row `i` (axis Row) or column `i` (axis Col), header cell first.
    pub fn line(&self, axis: Axis, i: usize) -> Vec<&str> {
        match axis {
            Axis::Row => self.cells[i].iter().map(String::as_str).collect(),
            Axis::Col => self.cells.iter().map(|r| r[i].as_str()).collect(),
        }
    }

    pub fn line_len(&self, axis: Axis) -> usize {
        match axis {
            Axis::Row => self.num_cols(),
            Axis::Col => self.num_rows(),
        }
    }

    pub fn num_lines(&self, axis: Axis) -> usize {
        match axis {
            Axis::Row => self.num_rows(),
            Axis::Col => self.num_cols(),
        }
    }

    /// Cell at position `k` of line `i` along `axis`.
    pub fn cell_at(&self, axis: Axis, i: usize, k: usize) -> &str {
        match axis {
            Axis::Row => &self.cells[i][k],
            Axis::Col => &self.cells[k][i],
        }
    }

    /// (row, col) of position `k` on line `i`.
    pub fn position(axis: Axis, i: usize, k: usize) -> (usize, usize) {
        match axis {
            Axis::Row => (i, k),
            Axis::Col => (k, i),
        }
    }

    /// Numeric values of a line, skipping the header cell at position 0.
    /// Only cells that look like numbers count.
    pub fn line_values(&self, axis: Axis, i: usize) -> Vec<(usize, NumericParse)> {
        (1..self.line_len(axis))
            .filter_map(|k| {
                let cell = self.cell_at(axis, i, k);
                if looks_numeric(cell) {
                    find_num(cell).map(|n| (k, n))
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn has_property_labels(&self, axis: Axis) -> bool {
        self.labels(axis).iter().any(|l| l.is_property())
    }

    pub fn is_property_table(&self) -> bool {
        self.has_property_labels(Axis::Row) || self.has_property_labels(Axis::Col)
    }

    /// Axis carrying property labels; columns win when both or neither do.
    pub fn property_axis(&self) -> Axis {
        if !self.has_property_labels(Axis::Col) && self.has_property_labels(Axis::Row) {
            Axis::Row
        } else {
            Axis::Col
        }
    }

    /// Append a line along `axis` (a new column for `Axis::Col`).
    pub fn push_line(&mut self, axis: Axis, values: Vec<String>, label: LabelCode) -> Result<()> {
        if values.len() != self.line_len(axis) {
            return Err(Error::InvalidTable {
                table: self.key(),
                message: format!(
                    "inserted line has {} cells, expected {}",
                    values.len(),
                    self.line_len(axis)
                ),
            });
        }
        match axis {
            Axis::Row => self.cells.push(values),
            Axis::Col => {
                for (row, v) in self.cells.iter_mut().zip(values) {
                    row.push(v);
                }
            }
        }
        self.labels_mut(axis).push(label);
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct TableRecord {
    pii: String,
    table_index: usize,
    #[serde(default)]
    caption: String,
    cells: Vec<Vec<String>>,
    #[serde(default)]
    row_labels: Option<Vec<i64>>,
    #[serde(default)]
    col_labels: Option<Vec<i64>>,
    #[serde(default)]
    sum_less_100: Option<bool>,
    #[serde(default)]
    comp_table: bool,
}

fn to_labels(raw: Option<Vec<i64>>, len: usize) -> Result<Vec<LabelCode>> {
    match raw {
        None => Ok(vec![LabelCode::OTHER; len]),
        Some(v) => v
            .into_iter()
            .map(|c| {
                u8::try_from(c)
                    .map_err(|_| Error::InvalidLabel(c))
                    .and_then(LabelCode::new)
            })
            .collect(),
    }
}

/// Parse a line-delimited table document. Blank lines are ignored.
pub fn parse_table_document(bytes: &[u8]) -> Result<Vec<Table>> {
    let mut tables = Vec::new();
    let mut offset = 0usize;
    for (line_no, raw_line) in bytes.split(|b| *b == b'\n').enumerate() {
        let start = offset;
        offset += raw_line.len() + 1;
        let line = raw_line.strip_suffix(b"\r").unwrap_or(raw_line);
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let text = std::str::from_utf8(line).map_err(|e| Error::Parse {
            offset: start + e.valid_up_to(),
            line: line_no + 1,
            message: "invalid UTF-8".into(),
        })?;
        let rec: TableRecord = serde_json::from_str(text).map_err(|e| Error::Parse {
            offset: start + byte_of_column(text, e.column()),
            line: line_no + 1,
            message: e.to_string(),
        })?;
        let rows = rec.cells.len();
        let cols = rec.cells.first().map_or(0, Vec::len);
        let table = Table {
            row_labels: to_labels(rec.row_labels, rows)?,
            col_labels: to_labels(rec.col_labels, cols)?,
            pii: rec.pii,
            table_index: rec.table_index,
            caption: rec.caption,
            cells: rec.cells,
            sum_less_100: rec.sum_less_100,
            comp_table: rec.comp_table,
        };
        table.validate()?;
        tables.push(table);
    }
    Ok(tables)
}

// serde_json reports 1-based character columns
fn byte_of_column(text: &str, column: usize) -> usize {
    text.char_indices()
        .nth(column.saturating_sub(1))
        .map_or(text.len(), |(b, _)| b)
}

/// Write tables one JSON record per line.
pub fn write_table_document<W: Write>(mut out: W, tables: &[Table]) -> Result<()> {
    for t in tables {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn serialize_tables(tables: &[Table]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_table_document(&mut buf, tables).expect("writing to a Vec cannot fail");
    buf
}

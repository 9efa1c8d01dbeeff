//! Typed table graph: cells, row/column header nodes and a caption node.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::table::{Axis, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Cell { row: usize, col: usize },
    RowHeader(usize),
    ColHeader(usize),
    Caption,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    CellCell,
    CellHeader,
    CaptionHeader,
}

/// Positional zones, in one-hot index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zone {
    FirstRow = 0,
    LastRow = 1,
    FirstCol = 2,
    LastCol = 3,
    Interior = 4,
    Header = 5,
    Caption = 6,
    Other = 7,
}

pub const DEFAULT_POSITIONAL_DIM: usize = 8;

/// Maps text to a fixed-length feature vector.
pub trait EmbeddingProvider: Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Character 3-gram feature hashing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedding {
    pub dim: usize,
}

impl EmbeddingProvider for HashEmbedding {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        hash_embed(text, self.dim)
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Signed character-3-gram hashing into `d` buckets, L2-normalized.
/// Empty text maps to the zero vector.
pub fn hash_embed(text: &str, d: usize) -> Vec<f64> {
    assert!(d >= 1, "embedding dimension must be positive");
    let mut v = vec![0.0; d];
    if text.is_empty() {
        return v;
    }
    let chars: Vec<char> = std::iter::once('\u{2}')
        .chain(text.chars())
        .chain(std::iter::once('\u{3}'))
        .collect();
    let mut buf = String::new();
    for w in chars.windows(3) {
        buf.clear();
        buf.extend(w);
        let h = fnv1a(buf.as_bytes());
        let bucket = (h % d as u64) as usize;
        let sign = if splitmix64(h) >> 63 == 0 { 1.0 } else { -1.0 };
        v[bucket] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        // every gram cancelled out
        v[(fnv1a(text.as_bytes()) % d as u64) as usize] = 1.0;
        return v;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphConfig {
    pub positional_dim: usize,
    pub seed: u64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            positional_dim: DEFAULT_POSITIONAL_DIM,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableGraph {
    pub num_rows: usize,
    pub num_cols: usize,
    pub nodes: Vec<NodeKind>,
    pub edges: Vec<(usize, usize, EdgeKind)>,
    /// Row-major `nodes.len() x feature_dim`.
    pub features: Vec<f64>,
    pub feature_dim: usize,
    /// Unique/non-empty value ratio per header (rows then columns).
    pub uniqueness: Vec<f64>,
    pub key: String,
}

impl TableGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_headers(&self) -> usize {
        self.num_rows + self.num_cols
    }

    pub fn cell_node(&self, row: usize, col: usize) -> usize {
        row * self.num_cols + col
    }

    pub fn row_header_node(&self, i: usize) -> usize {
        self.num_rows * self.num_cols + i
    }

    pub fn col_header_node(&self, j: usize) -> usize {
        self.num_rows * self.num_cols + self.num_rows + j
    }

    pub fn caption_node(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Header node indices, row headers first.
    pub fn header_nodes(&self) -> Vec<usize> {
        let base = self.num_rows * self.num_cols;
        (base..base + self.num_headers()).collect()
    }

    pub fn feature_row(&self, node: usize) -> &[f64] {
        &self.features[node * self.feature_dim..(node + 1) * self.feature_dim]
    }

    /// Incoming neighbor lists: `incoming()[v]` holds every `u` with an edge u→v.
    pub fn incoming(&self) -> Vec<Vec<usize>> {
        let mut n = vec![Vec::new(); self.nodes.len()];
        for &(u, v, _) in &self.edges {
            n[v].push(u);
        }
        n
    }

    pub fn count_edges(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.2 == kind).count()
    }
}

fn zone_of(row: usize, col: usize, rows: usize, cols: usize) -> Zone {
    if row == 0 {
        Zone::FirstRow
    } else if col == 0 {
        Zone::FirstCol
    } else if row + 1 == rows {
        Zone::LastRow
    } else if col + 1 == cols {
        Zone::LastCol
    } else {
        Zone::Interior
    }
}

fn push_features(out: &mut Vec<f64>, emb: Vec<f64>, zone: Zone, positional_dim: usize) {
    out.extend(emb);
    if positional_dim > 0 {
        let hot = (zone as usize).min(positional_dim - 1);
        out.extend((0..positional_dim).map(|k| if k == hot { 1.0 } else { 0.0 }));
    }
}

/// Pseudo-random header vector keyed on (seed, pii, table, axis, index).
fn header_init(seed: u64, table: &Table, axis: Axis, idx: usize, d: usize) -> Vec<f64> {
    let key = format!(
        "{}\u{1f}{}\u{1f}{}\u{1f}{}",
        table.pii,
        table.table_index,
        match axis {
            Axis::Row => 'r',
            Axis::Col => 'c',
        },
        idx
    );
    let base = fnv1a(key.as_bytes()) ^ splitmix64(seed);
    let scale = 1.0 / (d as f64).sqrt();
    (0..d as u64)
        .map(|k| {
            let u = splitmix64(base.wrapping_add(k.wrapping_mul(0x9e37_79b9_7f4a_7c15))) >> 11;
            let unit = u as f64 / (1u64 << 53) as f64;
            (2.0 * unit - 1.0) * scale
        })
        .collect()
}

/// Unique over non-empty cells of the line, header cell excluded. 0 for an empty line.
pub fn uniqueness_ratio(table: &Table, axis: Axis, i: usize) -> f64 {
    let vals: Vec<&str> = (1..table.line_len(axis))
        .map(|k| table.cell_at(axis, i, k).trim())
        .filter(|s| !s.is_empty())
        .collect();
    if vals.is_empty() {
        return 0.0;
    }
    let uniq: HashSet<&str> = vals.iter().copied().collect();
    uniq.len() as f64 / vals.len() as f64
}

pub fn build_graph(table: &Table, provider: &dyn EmbeddingProvider, cfg: &GraphConfig) -> TableGraph {
    let (rows, cols) = table.shape();
    let d = provider.dim();
    let pd = cfg.positional_dim;
    let n_cells = rows * cols;
    let n = n_cells + rows + cols + 1;

    let mut nodes = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n * (d + pd));
    for r in 0..rows {
        for c in 0..cols {
            nodes.push(NodeKind::Cell { row: r, col: c });
            push_features(
                &mut features,
                provider.embed(&table.cells[r][c]),
                zone_of(r, c, rows, cols),
                pd,
            );
        }
    }
    for i in 0..rows {
        nodes.push(NodeKind::RowHeader(i));
        push_features(&mut features, header_init(cfg.seed, table, Axis::Row, i, d), Zone::Header, pd);
    }
    for j in 0..cols {
        nodes.push(NodeKind::ColHeader(j));
        push_features(&mut features, header_init(cfg.seed, table, Axis::Col, j, d), Zone::Header, pd);
    }
    nodes.push(NodeKind::Caption);
    push_features(&mut features, provider.embed(&table.caption), Zone::Caption, pd);

    let mut edges = Vec::with_capacity(n_cells * (rows + cols) + rows + cols);
    for r in 0..rows {
        for c in 0..cols {
            let u = r * cols + c;
            for c2 in (0..cols).filter(|&c2| c2 != c) {
                edges.push((u, r * cols + c2, EdgeKind::CellCell));
            }
            for r2 in (0..rows).filter(|&r2| r2 != r) {
                edges.push((u, r2 * cols + c, EdgeKind::CellCell));
            }
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let u = r * cols + c;
            edges.push((u, n_cells + r, EdgeKind::CellHeader));
            edges.push((u, n_cells + rows + c, EdgeKind::CellHeader));
        }
    }
    for h in n_cells..n_cells + rows + cols {
        edges.push((n - 1, h, EdgeKind::CaptionHeader));
    }

    let uniqueness = (0..rows)
        .map(|i| uniqueness_ratio(table, Axis::Row, i))
        .chain((0..cols).map(|j| uniqueness_ratio(table, Axis::Col, j)))
        .collect();

    TableGraph {
        num_rows: rows,
        num_cols: cols,
        nodes,
        edges,
        features,
        feature_dim: d + pd,
        uniqueness,
        key: table.key(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(r: usize, c: usize) -> Table {
        let cells = (0..r)
            .map(|i| (0..c).map(|j| format!("v{i}.{j}")).collect())
            .collect();
        Table::new("P1", 0, "cap", cells).unwrap()
    }

    // every ordered pair of distinct cells that share a row or a column
    fn brute_cell_pairs(r: usize, c: usize) -> HashSet<(usize, usize)> {
        let mut s = HashSet::new();
        for a in 0..r * c {
            for b in 0..r * c {
                let (ra, ca, rb, cb) = (a / c, a % c, b / c, b % c);
                if a != b && (ra == rb || ca == cb) {
                    s.insert((a, b));
                }
            }
        }
        s
    }

    #[test]
    fn two_by_two_has_eight_cell_edges() {
        let g = build_graph(&grid(2, 2), &HashEmbedding { dim: 16 }, &GraphConfig::default());
        assert_eq!(g.count_edges(EdgeKind::CellCell), 8);
    }

    #[test]
    fn one_by_one_edges() {
        let g = build_graph(&grid(1, 1), &HashEmbedding { dim: 16 }, &GraphConfig::default());
        assert_eq!(g.count_edges(EdgeKind::CellCell), 0);
        assert_eq!(g.count_edges(EdgeKind::CellHeader), 2);
        assert_eq!(g.count_edges(EdgeKind::CaptionHeader), 2);
        assert_eq!(g.num_nodes(), 4);
    }

    #[test]
    fn hash_embed_basics() {
        assert!(hash_embed("", 64).iter().all(|x| *x == 0.0));
        assert_eq!(hash_embed("SiO2", 64), hash_embed("SiO2", 64));
        let n: f64 = hash_embed("SiO2", 64).iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hash_embed_separates_a_vocabulary() {
        let vocab = [
            "SiO2", "SiO3", "B2O3", "Na2O", "Al2O3", "Tg", "Tx", "Tm", "density", "Density",
            "E (GPa)", "H (GPa)", "n", "nd", "vd", "Sample", "Glass", "mol%", "wt%", "K",
        ];
        for (i, a) in vocab.iter().enumerate() {
            for b in &vocab[i + 1..] {
                assert_ne!(hash_embed(a, 64), hash_embed(b, 64), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn header_features_are_seeded() {
        let t = grid(2, 3);
        let p = HashEmbedding { dim: 8 };
        let a = build_graph(&t, &p, &GraphConfig { positional_dim: 8, seed: 1 });
        let b = build_graph(&t, &p, &GraphConfig { positional_dim: 8, seed: 1 });
        let c = build_graph(&t, &p, &GraphConfig { positional_dim: 8, seed: 2 });
        assert_eq!(a, b);
        let h = a.row_header_node(0);
        assert_ne!(a.feature_row(h), c.feature_row(h));
        assert_eq!(a.feature_row(h)[8 + Zone::Header as usize], 1.0);
    }

    #[test]
    fn uniqueness_of_lines() {
        let t = Table::from_rows("P", 0, "", &[&["id", "x"], &["a", "1"], &["a", ""], &["b", "1"]]);
        assert!((uniqueness_ratio(&t, Axis::Col, 0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((uniqueness_ratio(&t, Axis::Col, 1) - 0.5).abs() < 1e-12);
        let e = Table::from_rows("P", 0, "", &[&["h"], &[""]]);
        assert_eq!(uniqueness_ratio(&e, Axis::Col, 0), 0.0);
    }

    proptest! {
        #[test]
        fn edges_match_enumeration(r in 1usize..6, c in 1usize..6) {
            let g = build_graph(&grid(r, c), &HashEmbedding { dim: 4 }, &GraphConfig::default());
            let cc: HashSet<(usize, usize)> = g.edges.iter()
                .filter(|e| e.2 == EdgeKind::CellCell).map(|e| (e.0, e.1)).collect();
            prop_assert_eq!(cc.len(), g.count_edges(EdgeKind::CellCell));
            prop_assert_eq!(cc, brute_cell_pairs(r, c));
            prop_assert_eq!(g.count_edges(EdgeKind::CellHeader), 2 * r * c);
            prop_assert_eq!(g.count_edges(EdgeKind::CaptionHeader), r + c);
            let all: HashSet<(usize, usize)> = g.edges.iter().map(|e| (e.0, e.1)).collect();
            prop_assert_eq!(all.len(), g.edges.len());
            prop_assert!(g.edges.iter().all(|e| e.0 != e.1));
            prop_assert_eq!(g.features.len(), g.num_nodes() * g.feature_dim);
            let captions = g.nodes.iter().filter(|n| **n == NodeKind::Caption).count();
            prop_assert_eq!(captions, 1);
        }
    }
}

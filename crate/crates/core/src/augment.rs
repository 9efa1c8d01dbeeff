//! Long-tail augmentation: power-law targets, friend-constrained
//! destinations and Gaussian padding of copied property lines.

use std::collections::BTreeMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{AugmentationSettings, Engine};
use crate::error::{Error, Result};
use crate::graph::splitmix64;
use crate::label::Property;
use crate::numeric::{find_num, looks_numeric};
use crate::table::{Axis, Table};

/// Value the reference procedure returns when a line has nothing to sample.
pub const NO_NUMERIC_SENTINEL: i32 = -50;

/// `ceil(a * n^alpha)`, with 0 for n = 0.
pub fn target_count(n: usize, a: f64, alpha: f64) -> usize {
    if n == 0 {
        return 0;
    }
    (a * (n as f64).powf(alpha)).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub n_original: usize,
    pub n_new: usize,
    pub friends: Vec<Property>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub a: f64,
    pub alpha: f64,
    pub entries: BTreeMap<Property, PlanEntry>,
}

/// Number of lines (rows plus columns) carrying each property label.
pub fn label_frequencies(tables: &[Table]) -> BTreeMap<Property, usize> {
    let mut freq: BTreeMap<Property, usize> = Property::ALL.iter().map(|p| (*p, 0)).collect();
    for t in tables {
        for l in t.row_labels.iter().chain(&t.col_labels) {
            if let Some(p) = l.property() {
                *freq.get_mut(&p).unwrap() += 1;
            }
        }
    }
    freq
}

pub fn generate_plan(tables: &[Table], engine: &Engine) -> AugmentationPlan {
    let s = &engine.cfg.augmentation;
    let entries = label_frequencies(tables)
        .into_iter()
        .map(|(p, n)| {
            (
                p,
                PlanEntry {
                    n_original: n,
                    n_new: target_count(n, s.a, s.alpha),
                    friends: engine.cfg.rules(p).friends.clone(),
                },
            )
        })
        .collect();
    AugmentationPlan {
        a: s.a,
        alpha: s.alpha,
        entries,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AugmentFailure {
    /// The source line holds no numeric values to fit a distribution to.
    NoNumeric,
}

/// Round to six significant digits unless that would leave `[lo, hi]`.
fn format_value(v: f64, lo: f64, hi: f64) -> String {
    let short: f64 = format!("{v:.5e}").parse().unwrap_or(v);
    if lo <= short && short <= hi {
        format!("{short}")
    } else {
        format!("{v}")
    }
}

/// Normal(μ, σ) samples bounded to μ ± 3σ: resample a few times, then clamp.
pub fn synthesize(values: &[f64], count: usize, settings: &AugmentationSettings, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64, f64) {
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
    let sigma = if var.sqrt() == 0.0 { settings.zero_sigma } else { var.sqrt() };
    let (lo, hi) = (mu - 3.0 * sigma, mu + 3.0 * sigma);
    let normal = Normal::new(mu, sigma).expect("sigma is positive and finite");
    let out = (0..count)
        .map(|_| {
            let mut x = normal.sample(rng);
            for _ in 0..settings.max_resample {
                if (lo..=hi).contains(&x) {
                    break;
                }
                x = normal.sample(rng);
            }
            x.clamp(lo, hi)
        })
        .collect();
    (out, mu, sigma)
}

/// Fit a source line (header excluded) to length `target`.
pub fn row_or_col_augmentor(
    source: &[String],
    target: usize,
    settings: &AugmentationSettings,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<Vec<String>, AugmentFailure> {
    if source.len() >= target {
        return Ok(source[..target].to_vec());
    }
    let values: Vec<f64> = source
        .iter()
        .filter(|c| looks_numeric(c))
        .filter_map(|c| find_num(c).map(|n| n.value))
        .collect();
    if values.is_empty() {
        log::warn!("no numeric values to sample from (sentinel {NO_NUMERIC_SENTINEL})");
        return Err(AugmentFailure::NoNumeric);
    }
    let (samples, mu, sigma) = synthesize(&values, target - source.len(), settings, rng);
    let (lo, hi) = (mu - 3.0 * sigma, mu + 3.0 * sigma);
    let mut out = source.to_vec();
    out.extend(samples.into_iter().map(|v| format_value(v, lo, hi)));
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub inserted: BTreeMap<Property, usize>,
    /// Properties with a deficit but no eligible destination table.
    pub no_destination: Vec<Property>,
    /// Properties abandoned after every source failed in a row.
    pub exhausted: Vec<Property>,
    pub failures: usize,
}

fn property_rng(seed: u64, p: Property) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(p.code() as u64)))
}

fn check_shape(t: &Table) -> Result<()> {
    t.validate().map_err(|e| Error::Augmentation {
        table: t.key(),
        message: e.to_string(),
    })?;
    if t.num_cells() != t.num_rows() * t.num_cols() {
        return Err(Error::Augmentation {
            table: t.key(),
            message: "cell count disagrees with shape".into(),
        });
    }
    Ok(())
}

/// Insert synthesized property lines until each property reaches its
/// planned frequency or runs out of destinations or sources.
pub fn augment(
    tables: &[Table],
    plan: &AugmentationPlan,
    seed: u64,
    engine: &Engine,
) -> Result<(Vec<Table>, AugmentReport)> {
    let settings = &engine.cfg.augmentation;
    let mut out = tables.to_vec();
    let mut report = AugmentReport::default();

    for (&p, entry) in &plan.entries {
        let deficit = entry.n_new.saturating_sub(entry.n_original);
        if deficit == 0 {
            continue;
        }
        let label = p.label();
        let mut sources: Vec<(String, Vec<String>)> = Vec::new();
        for t in tables {
            for axis in [Axis::Row, Axis::Col] {
                for i in 0..t.num_lines(axis) {
                    if t.labels(axis)[i] == label {
                        let line = t.line(axis, i);
                        sources.push((line[0].to_string(), line[1..].iter().map(|s| s.to_string()).collect()));
                    }
                }
            }
        }
        let pool: Vec<usize> = out
            .iter()
            .enumerate()
            .filter(|(_, t)| {
                let labels: Vec<_> = t.row_labels.iter().chain(&t.col_labels).filter_map(|l| l.property()).collect();
                !labels.is_empty() && !labels.contains(&p) && entry.friends.iter().any(|f| labels.contains(f))
            })
            .map(|(i, _)| i)
            .collect();
        if pool.is_empty() || sources.is_empty() {
            log::warn!("{}: no eligible destination table, skipped", p.key());
            report.no_destination.push(p);
            continue;
        }
        let mut rng = property_rng(seed, p);
        let mut inserted = 0;
        let mut s = 0usize;
        let mut consecutive = 0;
        while inserted < deficit {
            let (header, values) = &sources[s % sources.len()];
            s += 1;
            let dest = pool[rng.random_range(0..pool.len())];
            let t = &mut out[dest];
            let axis = t.property_axis();
            let target = t.line_len(axis) - 1;
            match row_or_col_augmentor(values, target, settings, &mut rng) {
                Ok(vals) => {
                    let mut line = Vec::with_capacity(target + 1);
                    line.push(header.clone());
                    line.extend(vals);
                    t.push_line(axis, line, label)?;
                    check_shape(t)?;
                    inserted += 1;
                    consecutive = 0;
                }
                Err(_) => {
                    report.failures += 1;
                    consecutive += 1;
                    if consecutive >= sources.len() {
                        report.exhausted.push(p);
                        break;
                    }
                }
            }
        }
        report.inserted.insert(p, inserted);
    }
    Ok((out, report))
}

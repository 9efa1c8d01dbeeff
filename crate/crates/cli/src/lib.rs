//! Pipeline stages as subcommands over line-delimited files.
//!
//! Every command that writes an artifact also writes
//! `<first output>.manifest.json` with the seed, the config digest and the
//! digests of all inputs and outputs. Per-table work runs on a bounded
//! pool and results are always emitted in input order.

pub mod io;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tablekb_core::annotate::annotate_table;
use tablekb_core::augment::{augment, generate_plan};
use tablekb_core::config::DEFAULT_CONFIG_TOML;
use tablekb_core::extract::{extract_labeled, extract_with_rules};
use tablekb_core::kb::{link, parse_kb, screen, KbRecord, Predicate, TableEntities};
use tablekb_core::label::LabelCode;
use tablekb_core::metrics::evaluate;
use tablekb_core::supervise::{supervise_table, ReferenceDatabase};
use tablekb_core::table::serialize_tables;
use tablekb_core::{parse_table_document, Config, Engine, ExtractedTuple, Table, TableExtraction};
use tablekb_gat::{train, Example, FeatureSpec, GatError, GatModel, ModelDims, TrainConfig};

use crate::io::{from_jsonl, read, to_jsonl, RunRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("internal invariant failed: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Invariant(_) => EXIT_INVARIANT,
        }
    }
}

impl From<tablekb_core::Error> for CliError {
    fn from(e: tablekb_core::Error) -> Self {
        use tablekb_core::Error as E;
        match e {
            E::Query(_) => CliError::Usage(e.to_string()),
            E::Augmentation { .. } | E::Relabel { .. } | E::OutOfBounds { .. } | E::InvalidEntityId(_) => {
                CliError::Invariant(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<GatError> for CliError {
    fn from(e: GatError) -> Self {
        match e {
            GatError::Config(_) => CliError::Usage(e.to_string()),
            GatError::NonFinite { .. } => CliError::Invariant(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tablekb", version, about = "Materials table extraction pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Dictionary/threshold config (TOML); the bundled default otherwise.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write rule firings and rejected tuples here (line-delimited).
    #[arg(long, global = true)]
    pub audit: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and normalize a table document.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Weak-label tables against a reference database.
    Supervise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Per-table alignment details.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Keep tables where no line aligned.
        #[arg(long)]
        keep_all: bool,
    },
    /// Rule-based header annotation.
    Annotate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Clear incoming labels first.
        #[arg(long)]
        reset: bool,
    },
    /// Long-tail augmentation of labeled tables.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Train the header classifier.
    Train(TrainArgs),
    /// Classify headers, post-process and emit tuples per table.
    Extract {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Model checkpoint; header labels come from it when given.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = LabelSource::Rules)]
        labels: LabelSource,
        #[arg(long, default_value_t = 0.7)]
        alpha_thr: f64,
    },
    /// Link compositions and properties into a knowledge base.
    Link {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Strict-match evaluation against gold tuples.
    Eval {
        /// KB, extraction or tuple file.
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Conjunctive property screening over a KB.
    Screen {
        #[arg(long)]
        kb: PathBuf,
        /// `property>=value@unit`; repeat for a conjunction.
        #[arg(long = "where")]
        predicates: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelSource {
    /// Clear labels and annotate with the rule engine.
    Rules,
    /// Use the labels carried by the input.
    Given,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value = "desk")]
    pub preset: String,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 50.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.2)]
    pub dropout: f64,
    #[arg(long, default_value_t = 1)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 64)]
    pub embedding_dim: usize,
    /// Per-epoch loss trace (line-delimited).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

pub struct Context {
    pub engine: Engine,
    pub config_sha256: String,
    pub global: Global,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(global: Global) -> Result<Self, CliError> {
        let (text, digest) = match &global.config {
            Some(p) => {
                let bytes = read(p)?;
                let digest = io::sha256_hex(&bytes);
                let text = String::from_utf8(bytes).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
                (text, digest)
            }
            None => (DEFAULT_CONFIG_TOML.to_string(), io::sha256_hex(DEFAULT_CONFIG_TOML.as_bytes())),
        };
        let engine = Engine::new(Config::from_toml(&text)?)?;
        if global.workers == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(global.workers)
            .build()
            .map_err(|e| CliError::Invariant(e.to_string()))?;
        Ok(Context {
            engine,
            config_sha256: digest,
            global,
            pool,
        })
    }

    fn record(&self, command: &'static str) -> RunRecord {
        RunRecord::new(command, self.global.seed, self.config_sha256.clone())
    }

    /// Map in parallel, keeping input order.
    pub fn map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> Result<R, CliError> + Sync + Send) -> Result<Vec<R>, CliError> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }

    fn tables(&self, path: &Path, rec: &mut RunRecord) -> Result<Vec<Table>, CliError> {
        let bytes = read(path)?;
        rec.input(path, &bytes);
        parse_table_document(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    fn write_audit<T: Serialize>(&self, rec: &mut RunRecord, events: &[T]) -> Result<(), CliError> {
        if let Some(p) = &self.global.audit {
            rec.output(p, &to_jsonl(events)?)?;
        }
        Ok(())
    }
}

fn reset_labels(t: &mut Table) {
    t.row_labels.iter_mut().for_each(|l| *l = LabelCode::OTHER);
    t.col_labels.iter_mut().for_each(|l| *l = LabelCode::OTHER);
}

/// Property tuples from a KB, an extraction file or a tuple file.
pub fn load_tuples(path: &Path) -> Result<Vec<ExtractedTuple>, CliError> {
    let bytes = read(path)?;
    let first = bytes
        .split(|b| *b == b'\n')
        .find(|l| !l.iter().all(u8::is_ascii_whitespace))
        .unwrap_or_default();
    let head: serde_json::Value = if first.is_empty() {
        serde_json::Value::Null
    } else {
        serde_json::from_slice(first).map_err(|e| CliError::Data(format!("{}:1: {e}", path.display())))?
    };
    if head.get("schema").is_some() {
        let kb = parse_kb(&bytes)?;
        Ok(kb.into_iter().flat_map(|r| r.properties).collect())
    } else if head.get("tuples").is_some() {
        let xs: Vec<TableExtraction> = from_jsonl(path, &bytes)?;
        Ok(xs.into_iter().flat_map(|x| x.tuples).collect())
    } else {
        from_jsonl(path, &bytes)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AlignmentLine {
    pii: String,
    table_index: usize,
    #[serde(flatten)]
    result: tablekb_core::supervise::AlignmentResult,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Context::new(cli.global.clone())?;
    match cli.command {
        Command::Ingest { input, output } => {
            let mut rec = ctx.record("ingest");
            let tables = ctx.tables(&input, &mut rec)?;
            log::info!("{} tables", tables.len());
            rec.output(&output, &serialize_tables(&tables))?;
            rec.finish()?;
        }
        Command::Supervise {
            input,
            db,
            output,
            report,
            keep_all,
        } => {
            let mut rec = ctx.record("supervise");
            let tables = ctx.tables(&input, &mut rec)?;
            let db_bytes = read(&db)?;
            rec.input(&db, &db_bytes);
            let db = ReferenceDatabase::parse(&db_bytes)?;
            let results = ctx.map(&tables, |t| {
                let mut t = t.clone();
                let r = supervise_table(&mut t, &db, &ctx.engine);
                Ok((t, r))
            })?;
            let kept: Vec<Table> = results
                .iter()
                .filter(|(_, r)| keep_all || r.retained)
                .map(|(t, _)| t.clone())
                .collect();
            log::info!("{} of {} tables aligned", kept.len(), tables.len());
            rec.output(&output, &serialize_tables(&kept))?;
            if let Some(p) = report {
                let lines: Vec<AlignmentLine> = results
                    .into_iter()
                    .map(|(t, r)| AlignmentLine {
                        pii: t.pii,
                        table_index: t.table_index,
                        result: r,
                    })
                    .collect();
                rec.output(&p, &to_jsonl(&lines)?)?;
            }
            rec.finish()?;
        }
        Command::Annotate { input, output, reset } => {
            let mut rec = ctx.record("annotate");
            let tables = ctx.tables(&input, &mut rec)?;
            let out = ctx.map(&tables, |t| {
                let mut t = t.clone();
                if reset {
                    reset_labels(&mut t);
                }
                annotate_table(&mut t, &ctx.engine);
                Ok(t)
            })?;
            rec.output(&output, &serialize_tables(&out))?;
            rec.finish()?;
        }
        Command::Augment { input, output, plan } => {
            let mut rec = ctx.record("augment");
            let tables = ctx.tables(&input, &mut rec)?;
            let p = generate_plan(&tables, &ctx.engine);
            let (out, report) = augment(&tables, &p, ctx.global.seed, &ctx.engine)?;
            for f in 0..report.failures {
                log::debug!("augmentation failure {f}: no numeric source values (sentinel -50)");
            }
            log::info!(
                "inserted {} lines, {} failures",
                report.inserted.values().sum::<usize>(),
                report.failures
            );
            rec.output(&output, &serialize_tables(&out))?;
            if let Some(path) = plan {
                let mut bytes = serde_json::to_vec_pretty(&serde_json::json!({ "plan": p, "report": report }))
                    .map_err(|e| CliError::Invariant(e.to_string()))?;
                bytes.push(b'\n');
                rec.output(&path, &bytes)?;
            }
            rec.finish()?;
        }
        Command::Train(args) => train_cmd(&ctx, &args)?,
        Command::Extract {
            input,
            output,
            model,
            labels,
            alpha_thr,
        } => {
            let mut rec = ctx.record("extract");
            let tables = ctx.tables(&input, &mut rec)?;
            let model = match &model {
                Some(p) => {
                    let bytes = read(p)?;
                    rec.input(p, &bytes);
                    Some(GatModel::from_json(&bytes)?)
                }
                None => None,
            };
            if !(0.0..=1.0).contains(&alpha_thr) {
                return Err(CliError::Usage("--alpha-thr must lie in [0, 1]".into()));
            }
            let xs = ctx.map(&tables, |t| extract_one(t, &ctx.engine, model.as_ref(), labels, alpha_thr))?;
            let tuples: usize = xs.iter().map(|x| x.tuples.len()).sum();
            log::info!("{} tables, {} tuples", xs.len(), tuples);
            rec.output(&output, &to_jsonl(&xs)?)?;
            let audit: Vec<_> = xs.iter().flat_map(|x| x.audit.iter().cloned()).collect();
            ctx.write_audit(&mut rec, &audit)?;
            rec.finish()?;
        }
        Command::Link { input, output } => {
            let mut rec = ctx.record("link");
            let bytes = read(&input)?;
            rec.input(&input, &bytes);
            let xs: Vec<TableExtraction> = from_jsonl(&input, &bytes)?;
            let kb = link(&xs.iter().map(TableEntities::from).collect::<Vec<_>>());
            let (kb_bytes, idx) = tablekb_core::kb::serialize_kb(&kb)?;
            rec.output(&output, &kb_bytes)?;
            rec.output(&tablekb_core::kb::index_path(&output), &idx)?;
            log::info!("{} records", kb.len());
            rec.finish()?;
        }
        Command::Eval { predicted, gold, output } => {
            let mut rec = ctx.record("eval");
            for p in [&predicted, &gold] {
                rec.input(p, &read(p)?);
            }
            let report = evaluate(&load_tuples(&predicted)?, &load_tuples(&gold)?);
            let mut bytes = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Invariant(e.to_string()))?;
            bytes.push(b'\n');
            eprintln!(
                "precision {:.4} recall {:.4} f1 {:.4} ({} correct / {} predicted / {} gold)",
                report.overall.precision,
                report.overall.recall,
                report.overall.f1,
                report.overall.correct,
                report.overall.predicted,
                report.overall.gold
            );
            match output {
                Some(p) => {
                    rec.output(&p, &bytes)?;
                    rec.finish()?;
                }
                None => print!("{}", String::from_utf8_lossy(&bytes)),
            }
        }
        Command::Screen { kb, predicates, output } => {
            let mut rec = ctx.record("screen");
            let bytes = read(&kb)?;
            rec.input(&kb, &bytes);
            let records = parse_kb(&bytes)?;
            let preds = predicates
                .iter()
                .map(|s| s.parse::<Predicate>().map_err(CliError::from))
                .collect::<Result<Vec<_>, _>>()?;
            let text = screen_table(&screen(&records, &preds), &preds);
            match output {
                Some(p) => {
                    rec.output(&p, text.as_bytes())?;
                    rec.finish()?;
                }
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

/// One extraction, labels from the rules, the input or a model.
pub fn extract_one(
    t: &Table,
    engine: &Engine,
    model: Option<&GatModel>,
    labels: LabelSource,
    alpha_thr: f64,
) -> Result<TableExtraction, CliError> {
    if let Some(m) = model {
        let g = tablekb_core::graph::build_graph(t, &m.feature.provider(), &m.feature.graph_config());
        let (rows, cols) = m.predict_labels(&g, alpha_thr)?;
        let mut t = t.clone();
        t.row_labels = rows;
        t.col_labels = cols;
        return Ok(extract_labeled(&t, engine, None)?);
    }
    Ok(match labels {
        LabelSource::Given => extract_labeled(t, engine, None)?,
        LabelSource::Rules => {
            let mut t = t.clone();
            reset_labels(&mut t);
            extract_with_rules(&t, engine, None)?
        }
    })
}

/// Tab-separated rows: one per matching record and screened property tuple.
pub fn screen_table(records: &[&KbRecord], preds: &[Predicate]) -> String {
    let mut out = String::from("pii\ttables\tlink_kind\tmaterial\tentity\tproperty\tvalue\tunit\n");
    for r in records {
        let material = r.material.as_ref().map_or(r.gid.as_str(), |m| m.gid.as_str());
        let tables: Vec<String> = r.provenance.tables.iter().map(|t| t.to_string()).collect();
        let kind = serde_json::to_value(r.provenance.link_kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        for t in &r.properties {
            if preds.iter().any(|q| q.property == t.property && q.unit == t.unit) || preds.is_empty() {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    r.provenance.pii,
                    tables.join(","),
                    kind,
                    material,
                    t.entity,
                    t.property.key(),
                    t.value,
                    t.unit
                ));
            }
        }
    }
    out
}

/// Train on labeled tables and write a checkpoint.
pub fn train_cmd(ctx: &Context, args: &TrainArgs) -> Result<(), CliError> {
    let mut rec = ctx.record("train");
    let tables = ctx.tables(&args.input, &mut rec)?;
    let feature = FeatureSpec {
        embedding_dim: args.embedding_dim,
        ..FeatureSpec::default()
    };
    let dims = ModelDims::preset(&args.preset, feature.input_dim())?;
    let cfg = TrainConfig {
        lambda: args.lambda,
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        dropout: args.dropout,
        hidden1: dims.hidden1,
        hidden2: dims.hidden2,
        heads: dims.heads,
        seed: ctx.global.seed,
        batch_size: args.batch_size,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let data = ctx.map(&tables, |t| Ok(Example::from_table(t, &feature)))?;
    let mut model = GatModel::new(dims, feature, ctx.global.seed)?;
    let trace = train(&mut model, &data, &cfg)?;
    if let Some(last) = trace.last() {
        log::info!("final loss {:.6} (ce {:.6}, constraint {:.6})", last.loss, last.ce, last.constraint);
    }
    rec.output(&args.output, &model.to_json()?)?;
    if let Some(p) = &args.trace {
        rec.output(p, &to_jsonl(&trace)?)?;
    }
    rec.finish()?;
    Ok(())
}

//! The `kbqa` command line. [`run`] is the whole program minus process
//! exit, so tests can drive it directly.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use kbqa_core::engine::{AnswerOptions, EngineConfig};
use kbqa_core::extract::{extract_batch, SourceDocument};
use kbqa_core::ranker::{incremental_train, train_with_report, TrainParams, DEFAULT_DRIFT_BOUND};
use kbqa_core::synth::{train_default, SynthParams};
use kbqa_core::{Engine, GbdtModel, KbSnapshot, KnowledgeBase, Persona, QaId, QueryContext};

use crate::config::ServiceConfig;
use crate::eval::{evaluate, training_set, EvalReport};
use crate::io::{self, KbFile};
use crate::store::{CreateKb, SourceFile, Store};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "kbqa", version, about = "FAQ documents to a conversational knowledge base")]
pub struct Cli {
    /// Directory holding stored knowledge bases.
    #[arg(long, global = true, env = "KBQA_DATA_DIR", default_value = "kbqa-data")]
    pub data_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract documents and print the KB interchange file, without storing it.
    Extract {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, default_value = "extracted")]
        name: String,
        #[arg(long, default_value = "none")]
        persona: Persona,
        /// Print the intent trees instead of the KB.
        #[arg(long)]
        trees: bool,
    },
    /// Create a stored KB from documents, or import one interchange `.json` file.
    Ingest {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value = "none")]
        persona: Persona,
    },
    /// Answer one question.
    Query {
        /// Stored kbId or path to an interchange file.
        kb: String,
        question: String,
        /// QAPair id of the previous bot turn.
        #[arg(long)]
        context_qa: Option<QaId>,
        #[arg(long, default_value_t = 3)]
        top: usize,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Train a ranker from labeled queries against one KB.
    Train {
        labels: PathBuf,
        /// Stored kbId or path to an interchange file.
        #[arg(long)]
        kb: String,
        #[arg(long)]
        out: PathBuf,
        /// Add at most this many trees to the default model instead of
        /// training from scratch.
        #[arg(long)]
        incremental: Option<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Also install the model as the stored KB's overlay.
        #[arg(long)]
        install: bool,
        #[arg(long)]
        json: bool,
    },
    /// AUC and top-answer F1 over labeled queries.
    Eval {
        /// Stored kbId or path to an interchange file.
        kb: String,
        labels: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        json: bool,
        /// Per-query diagnostics.
        #[arg(long)]
        verbose: bool,
    },
    /// Run the HTTP service.
    Serve {
        /// JSON service configuration; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        listen: Option<String>,
    },
    /// Train the default ranker on synthetic FAQs.
    GenModel {
        #[arg(long, default_value = "default-model.json")]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_DATA
        }
    }
}

fn engine_for(model: Option<&Path>) -> anyhow::Result<Engine> {
    let model = match model {
        Some(p) => io::parse_model(&io::read_file(p)?)?,
        None => io::default_model(),
    };
    Ok(io::engine_with(model, EngineConfig::default()))
}

/// A file path wins over a stored kbId of the same spelling.
fn load_kb(spec: &str, data_dir: &Path, engine: &Engine) -> anyhow::Result<KnowledgeBase> {
    let p = Path::new(spec);
    if p.is_file() {
        return Ok(io::load_kb(p, &engine.analyzer)?);
    }
    let kb_path = data_dir.join(spec).join("kb.json");
    if kb_path.is_file() {
        return Ok(io::load_kb(&kb_path, &engine.analyzer)?);
    }
    bail!("{spec} is neither a KB file nor a stored kbId in {}", data_dir.display())
}

fn snapshot(spec: &str, data_dir: &Path, engine: &Engine) -> anyhow::Result<KbSnapshot> {
    Ok(engine.snapshot(load_kb(spec, data_dir, engine)?)?)
}

fn read_sources(paths: &[PathBuf]) -> anyhow::Result<Vec<SourceDocument>> {
    paths
        .iter()
        .map(|p| {
            let content = io::read_file(p)?;
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            Ok(SourceDocument::new(name, content)?)
        })
        .collect()
}

fn json_line(out: &mut dyn Write, v: &impl serde::Serialize) -> anyhow::Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<()> {
    let data_dir = cli.data_dir;
    match cli.command {
        Command::Extract {
            paths,
            name,
            persona,
            trees,
        } => {
            let docs = read_sources(&paths)?;
            let x = extract_batch(&docs, 1)?;
            for w in &x.warnings {
                writeln!(err, "warning: {}: {}", w.source, w.message)?;
            }
            if trees {
                json_line(out, &x.trees)?;
            } else {
                let kb = KbFile {
                    kb_id: String::new(),
                    name,
                    persona,
                    synonyms: Vec::new(),
                    qa_pairs: x.qa_pairs,
                };
                write!(out, "{}", io::serialize_kb(&kb))?;
            }
        }
        Command::Ingest { paths, name, persona } => {
            let store = Store::open(&data_dir, io::default_engine())?;
            let is_kb_file = |p: &PathBuf| p.extension().is_some_and(|e| e == "json");
            let created = if paths.len() == 1 && is_kb_file(&paths[0]) {
                let mut file = io::parse_kb(&io::read_file(&paths[0])?)?;
                if let Some(n) = name {
                    file.name = n;
                }
                store.import(file)?
            } else {
                if paths.iter().any(is_kb_file) {
                    bail!("an interchange .json file must be ingested on its own");
                }
                let sources = read_sources(&paths)?
                    .into_iter()
                    .map(|d| SourceFile {
                        name: d.name,
                        format: Some(d.format),
                        content: d.content,
                    })
                    .collect();
                store.create(CreateKb {
                    name: name.ok_or_else(|| anyhow!("--name is required when ingesting documents"))?,
                    sources,
                    qa_pairs: Vec::new(),
                    persona,
                    synonyms: Vec::new(),
                })?
            };
            for w in &created.warnings {
                writeln!(err, "warning: {}: {}", w.source, w.message)?;
            }
            writeln!(out, "{}", created.kb_id)?;
        }
        Command::Query {
            kb,
            question,
            context_qa,
            top,
            threshold,
            model,
            json,
        } => {
            let engine = engine_for(model.as_deref())?;
            let snap = snapshot(&kb, &data_dir, &engine)?;
            let ctx = QueryContext {
                previous_qa_id: context_qa,
                ..Default::default()
            };
            let opts = AnswerOptions {
                top: Some(top),
                score_threshold: threshold,
            };
            let a = engine.answer(&snap, &question, &ctx, &opts)?;
            if json {
                json_line(out, &a)?;
            } else {
                writeln!(out, "{:<5} {:<6} {:<7} answer", "rank", "qaId", "score")?;
                for (i, r) in a.answers.iter().enumerate() {
                    let id = match (r.qa_id, a.kind) {
                        (Some(id), _) => id.to_string(),
                        (None, kbqa_core::AnswerKind::Chitchat) => "chat".into(),
                        (None, _) => "-".into(),
                    };
                    let text: String = r.answer_text.chars().take(70).collect();
                    writeln!(out, "{:<5} {:<6} {:<7.4} {}", i + 1, id, r.score, text.replace('\n', " "))?;
                }
            }
        }
        Command::Train {
            labels,
            kb,
            out: out_path,
            incremental,
            seed,
            install,
            json,
        } => {
            let engine = io::default_engine();
            let snap = snapshot(&kb, &data_dir, &engine)?;
            let rows = io::parse_labels(&io::read_file(&labels)?)?;
            let data = training_set(&engine, &snap, &rows)?;
            let params = TrainParams {
                seed,
                ..TrainParams::default()
            };
            let start = Instant::now();
            let (model, report) = match incremental {
                Some(n) => {
                    let m = incremental_train(&engine.model, &data, n, &params, DEFAULT_DRIFT_BOUND, &[])?;
                    (m, None)
                }
                None => {
                    let (m, r) = train_with_report(&data, &params)?;
                    (m, Some(r))
                }
            };
            std::fs::write(&out_path, io::serialize_model(&model))
                .with_context(|| format!("writing {}", out_path.display()))?;
            if install {
                let store = Store::open(&data_dir, io::default_engine())?;
                store.set_overlay(&kb, Some(model.clone()))?;
            }
            report_training(out, &model, report.as_ref(), data.rows.len(), start, json)?;
        }
        Command::Eval {
            kb,
            labels,
            model,
            threshold,
            json,
            verbose,
        } => {
            let engine = engine_for(model.as_deref())?;
            let snap = snapshot(&kb, &data_dir, &engine)?;
            let rows = io::parse_labels(&io::read_file(&labels)?)?;
            let threshold = threshold.unwrap_or(engine.config.no_answer_threshold);
            let report = evaluate(&engine, &snap, &rows, threshold)?;
            if json {
                json_line(out, &report)?;
            } else {
                print_eval(out, &report, verbose)?;
            }
        }
        Command::Serve { config, listen } => {
            let mut cfg = match config {
                Some(p) => ServiceConfig::load(&p)?,
                None => ServiceConfig {
                    data_directory: data_dir,
                    ..ServiceConfig::default()
                },
            };
            if let Some(l) = listen {
                cfg.listen_address = l;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::service::serve(cfg))?;
        }
        Command::GenModel { out: out_path, json } => {
            let base = io::engine_with(GbdtModel::constant(0.0, 0.1), EngineConfig::default());
            let start = Instant::now();
            let (model, report) = train_default(&base, &SynthParams::default(), &TrainParams::default())?;
            std::fs::write(&out_path, io::serialize_model(&model))
                .with_context(|| format!("writing {}", out_path.display()))?;
            let rows = model.metadata.get("rows").and_then(|r| r.parse().ok()).unwrap_or(0);
            report_training(out, &model, Some(&report), rows, start, json)?;
        }
    }
    Ok(())
}

fn report_training(
    out: &mut dyn Write,
    model: &GbdtModel,
    report: Option<&kbqa_core::ranker::TrainReport>,
    rows: usize,
    start: Instant,
    json: bool,
) -> anyhow::Result<()> {
    if json {
        return json_line(
            out,
            &serde_json::json!({
                "rows": rows,
                "trees": model.trees.len(),
                "report": report,
                "featureGains": model.feature_gains(),
            }),
        );
    }
    writeln!(out, "rows        {rows}")?;
    writeln!(out, "trees       {}", model.trees.len())?;
    if let Some(r) = report {
        writeln!(out, "built       {} (stopped early: {})", r.trees_built, r.stopped_early)?;
        writeln!(out, "train loss  {:.5}", r.train_loss)?;
        writeln!(out, "valid loss  {:.5}", r.validation_loss)?;
        if let Some(a) = r.validation_auc {
            writeln!(out, "valid AUC   {:.2}", 100.0 * a)?;
        }
        writeln!(out, "pruned      {} leaves", r.leaves_pruned)?;
    }
    writeln!(out, "elapsed     {:.2?}", start.elapsed())?;
    for (name, gain) in model.feature_gains().iter().filter(|(_, g)| *g > 0.0) {
        writeln!(out, "  {name:<15} {gain:.3}")?;
    }
    Ok(())
}

fn print_eval(out: &mut dyn Write, r: &EvalReport, verbose: bool) -> anyhow::Result<()> {
    writeln!(
        out,
        "queries {}  rows {}  positives {}  threshold {}",
        r.queries, r.rows, r.positives, r.threshold
    )?;
    match r.auc {
        Some(a) => writeln!(out, "AUC  {:.2}", a * 100.0)?,
        None => writeln!(out, "AUC  undefined (labels hold one class)")?,
    }
    let f = &r.f1;
    writeln!(
        out,
        "F1   {:.2}  (precision {:.2}, recall {:.2}; tp {} fp {} fn {})",
        f.f1 * 100.0,
        f.precision * 100.0,
        f.recall * 100.0,
        f.true_positives,
        f.false_positives,
        f.false_negatives
    )?;
    if verbose {
        for d in &r.diagnostics {
            let top = d.top_qa_id.map_or("-".to_string(), |i| i.to_string());
            let score = d.top_score.map_or("-".to_string(), |s| format!("{s:.4}"));
            writeln!(
                out,
                "{:<3} top {:<4} score {:<7} relevant {:?}  {}",
                d.outcome, top, score, d.relevant_qa_ids, d.query
            )?;
        }
    }
    Ok(())
}

//! `sciex`: the workbench from a terminal.
//!
//! Every subcommand runs against a local workspace directory through the
//! same [`Workbench`] the HTTP service uses. `--json` prints the response
//! objects the service would return; the default output is meant for
//! reading.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sciex_core::classifier::{Category, Dataset, LabelRecord, TrainConfig};
use sciex_core::corpus::{LibraryId, ModelId, PaperId, ParagraphId, RetrievalId};
use sciex_core::retrieval::{Polarity, RetrievalDraft, DEFAULT_K};
use sciex_core::workbench::{
    AnswerSource, ExportRequest, Hit, Page, PredictInput, PredictRequest, QueryRequest,
    SearchMode, SearchResponse, TrainRequest, Upload, DEFAULT_TEST_FRACTION, DEFAULT_THRESHOLD,
};
use sciex_core::{Config, Weights, Workbench};

#[derive(Parser)]
#[command(name = "sciex", version, about = "Information extraction workbench for scientific papers")]
struct Cli {
    /// Workspace directory (overrides config and SCIEX_WORKSPACE).
    #[arg(long, global = true)]
    workspace: Option<PathBuf>,

    /// TOML configuration file.
    #[arg(long, global = true, env = "SCIEX_CONFIG")]
    config: Option<PathBuf>,

    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create or list libraries.
    #[command(subcommand)]
    Library(LibraryCmd),
    /// Add TEI (.xml) or plain-text files to a library.
    Ingest {
        library: String,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// List the papers of a library.
    Papers {
        library: String,
        #[command(flatten)]
        page: PageArgs,
    },
    /// Print a paper's paragraphs with their ids.
    Show { paper: String },
    /// Text or semantic search inside a paper or library.
    Search {
        scope: String,
        #[arg(short, long)]
        query: String,
        #[arg(long, default_value = "text")]
        mode: String,
        #[arg(short, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long)]
        case_sensitive: bool,
    },
    /// Replace a paragraph's text; labels follow the new id.
    Correct {
        paragraph: String,
        #[arg(long)]
        text: String,
    },
    /// Manage custom retrievals.
    #[command(subcommand)]
    Retrieval(RetrievalCmd),
    /// Set the category labels of a paragraph.
    Label {
        paragraph: String,
        /// Category name or index; repeatable.
        #[arg(short, long = "category")]
        categories: Vec<String>,
        /// Mark the paragraph as reviewed and irrelevant.
        #[arg(long)]
        irrelevant: bool,
    },
    /// Export labeled data.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Train the label classifier and make it active.
    Train(TrainArgs),
    /// Print the classification report of a model.
    Report {
        #[arg(long)]
        model: Option<String>,
    },
    /// Category probabilities for a paragraph or free text.
    Predict {
        paragraph: Option<String>,
        #[arg(long, conflicts_with = "paragraph")]
        text: Option<String>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        model: Option<String>,
    },
    /// Answer a question from retrieved passages.
    Query {
        #[arg(short, long)]
        query: String,
        /// `semantic`, `retrieval:<id>` or `class:<category>`.
        #[arg(long, default_value = "semantic")]
        source: String,
        /// Paper or library id; may be omitted when the workspace holds a
        /// single library.
        #[arg(long)]
        scope: Option<String>,
        #[arg(short, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Args)]
struct PageArgs {
    #[arg(long, default_value_t = sciex_core::workbench::DEFAULT_LIMIT)]
    limit: usize,
    #[arg(long, default_value_t = 0)]
    offset: usize,
}

impl From<PageArgs> for Page {
    fn from(p: PageArgs) -> Self {
        Page {
            limit: p.limit,
            offset: p.offset,
        }
    }
}

#[derive(Subcommand)]
enum LibraryCmd {
    Create { name: String },
    List {
        #[command(flatten)]
        page: PageArgs,
    },
}

#[derive(Subcommand)]
enum RetrievalCmd {
    Create {
        #[arg(long)]
        name: String,
        #[arg(long)]
        description: Option<String>,
        #[arg(long)]
        category: Option<String>,
        /// Positive query; repeatable.
        #[arg(short, long = "query")]
        queries: Vec<String>,
        /// Negative query; repeatable.
        #[arg(long = "negative-query")]
        negative_queries: Vec<String>,
    },
    Show { id: String },
    List {
        #[command(flatten)]
        page: PageArgs,
    },
    /// Mark a paragraph relevant or irrelevant to a retrieval, or clear it.
    #[command(group(clap::ArgGroup::new("polarity").required(true)))]
    Label {
        id: String,
        /// Paragraph to add to the positive set.
        #[arg(long, value_name = "PARAGRAPH_ID", group = "polarity")]
        pos: Option<String>,
        /// Paragraph to add to the negative set.
        #[arg(long, value_name = "PARAGRAPH_ID", group = "polarity")]
        neg: Option<String>,
        /// Paragraph to remove from both sets.
        #[arg(long, value_name = "PARAGRAPH_ID", group = "polarity")]
        clear: Option<String>,
    },
    AddQuery {
        id: String,
        query: String,
        #[arg(long)]
        negative: bool,
    },
    Weights {
        id: String,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        d: f64,
    },
    Rank {
        id: String,
        #[arg(long)]
        scope: String,
        #[arg(short, default_value_t = DEFAULT_K)]
        k: usize,
    },
    /// Add the four built-in retrievals (skips names already present).
    ImportDefaults,
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Write JSON Lines to stdout or `--out`.
    Export {
        library: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        include_irrelevant: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
        test_fraction: f64,
        #[arg(long)]
        with_embeddings: bool,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, required_unless_present = "dataset", conflicts_with = "dataset")]
    library: Option<String>,
    /// Exported JSON Lines file.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    include_irrelevant: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
    test_fraction: f64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
}

#[derive(Serialize)]
struct ExportSummary {
    path: PathBuf,
    records: usize,
    train: usize,
    test: usize,
    provenance: sciex_core::embedding::Provenance,
}

struct Out {
    json: bool,
}

impl Out {
    /// JSON mode prints `value`; text mode runs `text`.
    fn emit<T: Serialize>(&self, value: &T, text: impl FnOnce(&T)) -> anyhow::Result<()> {
        if self.json {
            println!("{}", serde_json::to_string_pretty(value)?);
        } else {
            text(value);
        }
        Ok(())
    }
}

fn print_hits(hits: &[Hit]) {
    if hits.is_empty() {
        println!("(no hits)");
    }
    for h in hits {
        println!("{:>3} {:>6} {} {}", h.rank, h.display_score, h.paragraph_id, h.excerpt);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e
                .downcast_ref::<sciex_core::Error>()
                .map(|c| c.code())
                .unwrap_or("error");
            eprintln!("error[{code}]: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = Config::load(cli.config.as_deref())?;
    if let Some(ws) = cli.workspace {
        config.workspace = ws;
    }
    let out = Out { json: cli.json };

    if let Command::Serve { host, port } = cli.command {
        if let Some(h) = host {
            config.server.host = h;
        }
        if let Some(p) = port {
            config.server.port = p;
        }
        let rt = tokio::runtime::Runtime::new()?;
        return rt.block_on(sciex_service::serve(config));
    }

    let wb = Workbench::open(&config)?;
    match cli.command {
        Command::Serve { .. } => unreachable!("handled above"),
        Command::Library(LibraryCmd::Create { name }) => {
            let lib = wb.create_library(&name)?;
            out.emit(&lib, |l| println!("{}", l.id))?;
        }
        Command::Library(LibraryCmd::List { page }) => {
            let libs = wb.list_libraries(page.into());
            out.emit(&libs, |libs| {
                for l in libs {
                    println!("{}  {:>4} papers  {}", l.id, l.paper_count, l.name);
                }
            })?;
        }
        Command::Ingest { library, files } => {
            let lib = LibraryId::from(library);
            let mut results = Vec::new();
            for path in files {
                let content = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let name = path.to_string_lossy().into_owned();
                let r = wb
                    .ingest(&lib, Upload::from_file(&name, content))
                    .with_context(|| format!("ingesting {name}"))?;
                results.push(r);
            }
            out.emit(&results, |rs| {
                for r in rs {
                    let verb = if r.created { "added" } else { "exists" };
                    let flag = if r.paper.needs_review { "  [needs review]" } else { "" };
                    println!(
                        "{verb} {} ({} paragraphs) {}{flag}",
                        r.paper.id,
                        r.paper.paragraph_count(),
                        r.paper.metadata.title
                    );
                }
            })?;
        }
        Command::Papers { library, page } => {
            let papers = wb.list_papers(&LibraryId::from(library), page.into())?;
            out.emit(&papers, |ps| {
                for p in ps {
                    println!("{}  {:>4} paragraphs  {}", p.id, p.paragraph_count, p.title);
                }
            })?;
        }
        Command::Show { paper } => {
            let p = wb.get_paper(&PaperId::from(paper))?;
            out.emit(&p, |p| {
                println!("# {}", p.metadata.title);
                for s in &p.sections {
                    println!("\n## {}", s.heading);
                    for para in &s.paragraphs {
                        println!("[{}] {}", para.id, para.text);
                    }
                }
            })?;
        }
        Command::Search {
            scope,
            query,
            mode,
            k,
            case_sensitive,
        } => {
            let mode: SearchMode = mode.parse()?;
            let scope = wb.resolve_scope(&scope)?;
            let resp = wb.search(&scope, mode, &query, k, case_sensitive)?;
            out.emit(&resp, |r| match r {
                SearchResponse::Semantic(hits) => print_hits(hits),
                SearchResponse::Text(hits) => {
                    if hits.is_empty() {
                        println!("(no hits)");
                    }
                    for h in hits {
                        let t = &h.paragraph.text;
                        let first = &h.spans[0];
                        println!(
                            "{}  {} match(es)  ...{}...",
                            h.paragraph.id,
                            h.spans.len(),
                            &t[first.start..first.end]
                        );
                    }
                }
            })?;
        }
        Command::Correct { paragraph, text } => {
            let fix = wb.correct_paragraph(&ParagraphId::from(paragraph), &text)?;
            out.emit(&fix, |f| println!("{} -> {}", f.old_id, f.paragraph.id))?;
        }
        Command::Retrieval(cmd) => retrieval(&wb, &out, cmd)?,
        Command::Label {
            paragraph,
            categories,
            irrelevant,
        } => {
            let cats = categories
                .iter()
                .map(|c| c.parse::<Category>())
                .collect::<Result<Vec<_>, _>>()?;
            let record = wb.set_label(LabelRecord::new(ParagraphId::from(paragraph), cats, irrelevant)?)?;
            out.emit(&record, |r| {
                let names: Vec<&str> = r.labels.iter().map(|c| c.name()).collect();
                let extra = if r.irrelevant { " (irrelevant)" } else { "" };
                println!("{}: {}{extra}", r.paragraph_id, names.join(", "));
            })?;
        }
        Command::Dataset(DatasetCmd::Export {
            library,
            out: path,
            include_irrelevant,
            seed,
            test_fraction,
            with_embeddings,
        }) => {
            let resp = wb.export_dataset(&ExportRequest {
                library: LibraryId::from(library),
                include_irrelevant,
                seed,
                test_fraction,
                with_embeddings,
            })?;
            let mut jsonl = String::new();
            for line in &resp.records {
                jsonl.push_str(&serde_json::to_string(line)?);
                jsonl.push('\n');
            }
            match path {
                Some(p) => {
                    std::fs::write(&p, jsonl).with_context(|| format!("writing {}", p.display()))?;
                    let summary = ExportSummary {
                        path: p,
                        records: resp.records.len(),
                        train: resp.train,
                        test: resp.test,
                        provenance: resp.provenance,
                    };
                    out.emit(&summary, |s| {
                        println!("wrote {} records ({} train, {} test) to {}", s.records, s.train, s.test, s.path.display())
                    })?;
                }
                None => std::io::stdout().write_all(jsonl.as_bytes())?,
            }
        }
        Command::Train(args) => {
            let defaults = TrainConfig::<f64>::default();
            let config = TrainConfig {
                learning_rate: args.learning_rate.unwrap_or(defaults.learning_rate),
                epochs: args.epochs.unwrap_or(defaults.epochs),
                l2: args.l2.unwrap_or(defaults.l2),
                seed: args.seed,
            };
            let dataset = match &args.dataset {
                Some(p) => {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    Some(Dataset::<f64>::parse_jsonl(&text)?)
                }
                None => None,
            };
            let resp = wb.train(TrainRequest {
                library: args.library.map(LibraryId::from),
                dataset,
                include_irrelevant: args.include_irrelevant,
                seed: args.seed,
                test_fraction: args.test_fraction,
                config,
                threshold: args.threshold,
            })?;
            out.emit(&resp, |r| {
                println!(
                    "model {}  train {}  test {}  final loss {:.4}",
                    r.model_id, r.train_records, r.test_records, r.final_loss
                );
                for c in &r.degenerate_heads {
                    println!("warning: head `{c}` had a single class in training and predicts a constant");
                }
                match &r.report {
                    Some(rep) => println!("\n{rep}"),
                    None => println!("no test split; report unavailable"),
                }
            })?;
        }
        Command::Report { model } => {
            let model = model.map(ModelId::from);
            let rep = wb.report(model.as_ref())?;
            out.emit(&rep, |r| println!("{r}"))?;
        }
        Command::Predict {
            paragraph,
            text,
            threshold,
            model,
        } => {
            let input = match (paragraph, text) {
                (Some(p), _) => PredictInput::Paragraph {
                    paragraph_id: ParagraphId::from(p),
                },
                (None, Some(t)) => PredictInput::Text { text: t },
                (None, None) => bail!("give a paragraph id or --text"),
            };
            let resp = wb.predict(&PredictRequest {
                input,
                threshold,
                model: model.map(ModelId::from),
            })?;
            out.emit(&resp, |r| {
                for c in Category::ALL {
                    let mark = if r.labels.contains(&c) { "*" } else { " " };
                    println!("{mark} {:<8} {:.3}", c.name(), r.probabilities[c.index()]);
                }
            })?;
        }
        Command::Query {
            query,
            source,
            scope,
            k,
            threshold,
        } => {
            let source: AnswerSource = source.parse()?;
            let scope = match scope {
                Some(s) => s,
                None => {
                    let libs = wb.list_libraries(Page::default());
                    match libs.as_slice() {
                        [only] => only.id.to_string(),
                        _ => bail!("--scope is required when the workspace has {} libraries", libs.len()),
                    }
                }
            };
            let ans = wb.answer(&QueryRequest {
                query,
                source,
                scope,
                k,
                threshold,
            })?;
            out.emit(&ans, |a| {
                println!("{}", a.text);
                println!("\n{} passages from {}/{}", a.used_passages.len(), a.provider_id, a.model_id);
                for p in &a.used_passages {
                    let id = p.paragraph_id.as_ref().map(|i| i.as_str()).unwrap_or("-");
                    println!("  [{}] {id}", p.index + 1);
                }
            })?;
        }
    }
    Ok(())
}

fn retrieval(wb: &Workbench, out: &Out, cmd: RetrievalCmd) -> anyhow::Result<()> {
    let print_spec = |s: &sciex_core::Retrieval| {
        println!("{}  {}", s.id, s.name);
        if let Some(c) = s.category {
            println!("  category: {c}");
        }
        let w = &s.weights;
        println!("  weights: a={} b={} c={} d={}", w.a, w.b, w.c, w.d);
        println!("  positive queries: {}", s.positive_queries.len());
        println!("  negative queries: {}", s.negative_queries.len());
        println!("  positive paragraphs: {}", s.positive_paragraph_ids.len());
        println!("  negative paragraphs: {}", s.negative_paragraph_ids.len());
    };
    match cmd {
        RetrievalCmd::Create {
            name,
            description,
            category,
            queries,
            negative_queries,
        } => {
            let spec = wb.create_retrieval(RetrievalDraft {
                name,
                description,
                category: category.map(|c| c.parse()).transpose()?,
                positive_queries: queries,
                negative_queries,
                weights: None,
                min_score: None,
            })?;
            out.emit(&spec, print_spec)?;
        }
        RetrievalCmd::Show { id } => {
            let spec = wb.get_retrieval(&RetrievalId::from(id))?;
            out.emit(&spec, print_spec)?;
        }
        RetrievalCmd::List { page } => {
            let specs = wb.list_retrievals(page.into());
            out.emit(&specs, |specs| {
                for s in specs {
                    let cat = s.category.map(|c| c.name()).unwrap_or("-");
                    println!("{}  {:<8} {}", s.id, cat, s.name);
                }
            })?;
        }
        RetrievalCmd::Label { id, pos, neg, clear } => {
            let (paragraph, polarity) = match (pos, neg, clear) {
                (Some(p), _, _) => (p, Polarity::Positive),
                (_, Some(p), _) => (p, Polarity::Negative),
                (_, _, Some(p)) => (p, Polarity::Clear),
                _ => bail!("give --pos, --neg or --clear"),
            };
            let spec = wb.label_paragraph(&RetrievalId::from(id), &ParagraphId::from(paragraph), polarity)?;
            out.emit(&spec, print_spec)?;
        }
        RetrievalCmd::AddQuery { id, query, negative } => {
            let spec = wb.add_query(&RetrievalId::from(id), &query, !negative)?;
            out.emit(&spec, print_spec)?;
        }
        RetrievalCmd::Weights { id, a, b, c, d } => {
            let spec = wb.set_weights(&RetrievalId::from(id), Weights { a, b, c, d })?;
            out.emit(&spec, print_spec)?;
        }
        RetrievalCmd::Rank { id, scope, k } => {
            let scope = wb.resolve_scope(&scope)?;
            let hits = wb.rank(&RetrievalId::from(id), &scope, k)?;
            out.emit(&hits, |h| print_hits(h))?;
        }
        RetrievalCmd::ImportDefaults => {
            let specs = wb.import_defaults()?;
            out.emit(&specs, |specs| {
                for s in specs {
                    let cat = s.category.map(|c| c.name()).unwrap_or("-");
                    println!("{}  {:<8} {}", s.id, cat, s.name);
                }
            })?;
        }
    }
    Ok(())
}

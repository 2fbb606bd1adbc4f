//! Command-line driver. Exit codes: 0 success, 1 failure (including
//! validation failures), 2 usage error.

use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use kdisc_core::annotation::{check_against_document, parse_standoff, validate, AnnotationSet, Violation};
use kdisc_core::autoann::{evaluate_micro_f1, EvalResult};
use kdisc_core::corpus::{doc_id_for_payload, para_id, Corpus, HeuristicTagger};
use kdisc_core::graph::{query_triples, subgraph_for_paragraphs, TripleFilter};
use kdisc_core::ner::NerHyper;
use kdisc_core::ontology::{import_listing, ExternalListing};
use kdisc_core::qa::{EchoBackend, ExtractiveMock, GenParams, GenerationBackend, PromptTemplates, Question};
use kdisc_core::retrieval::{index_paragraphs, Embedder, HashingEmbedder};

use crate::backend::{HttpBackend, HttpBackendConfig, TOKEN_ENV, URL_ENV};
use crate::formats::{self, write_jsonl};
use crate::gazetteer::{parse_rules, Gazetteer};
use crate::ingest::Format;
use crate::pipeline;
use crate::transcript;

#[derive(Parser, Debug)]
#[command(name = "kdisc", version, about = "Knowledge discovery over scientific literature")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Ingest TEI XML, plain text or zip archives into a corpus file.
    Ingest(IngestArgs),
    /// Schema utilities.
    #[command(subcommand)]
    Schema(SchemaCommand),
    /// Annotate a corpus with gazetteer rules.
    AnnotateRegex(AnnotateRegexArgs),
    /// Train the entity and relation models.
    Train(TrainArgs),
    /// Apply trained models to a corpus.
    AutoAnnotate(AutoAnnotateArgs),
    /// Micro-averaged precision, recall and F1 of predictions against gold.
    Evaluate(EvaluateArgs),
    /// Export sentence-level training records.
    ExportTraining(CorpusAnnotationsArgs),
    /// Build or query the knowledge graph.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Build or query the paragraph vector index.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Answer a question from the corpus.
    Ask(AskArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Auto,
    Tei,
    Text,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    pub format: FormatArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum SchemaCommand {
    /// Check a schema file, and optionally annotations against it.
    Validate {
        schema: PathBuf,
        #[arg(long, requires = "annotations")]
        corpus: Option<PathBuf>,
        #[arg(long, requires = "corpus")]
        annotations: Option<PathBuf>,
    },
    /// Build a schema from an external entity listing.
    Import {
        listing: PathBuf,
        /// Entity names to keep; all when omitted.
        #[arg(long, value_delimiter = ',')]
        select: Vec<String>,
    },
}

#[derive(Args, Debug)]
pub struct AnnotateRegexArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub rules: PathBuf,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HyperArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub max_span_len: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

impl HyperArgs {
    pub fn resolve(&self) -> NerHyper {
        let d = NerHyper::default();
        NerHyper {
            epochs: self.epochs.unwrap_or(d.epochs),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            l2: self.l2.unwrap_or(d.l2),
            max_span_len: self.max_span_len.unwrap_or(d.max_span_len),
            threshold: self.threshold.unwrap_or(d.threshold),
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Receives ner.json and rc.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Args, Debug)]
pub struct AutoAnnotateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub ner: PathBuf,
    #[arg(long)]
    pub rc: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Predicted annotations: standoff with --text, JSON lines otherwise.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    /// Paragraph text the standoff offsets refer to.
    #[arg(long)]
    pub text: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct CorpusAnnotationsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum GraphCommand {
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Relation triples as JSON lines.
    Triples {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        head_type: Option<String>,
        #[arg(long)]
        relation: Option<String>,
        #[arg(long)]
        tail_type: Option<String>,
    },
    Subgraph {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long = "para", required = true)]
        paras: Vec<String>,
    },
}

#[derive(Subcommand, Debug)]
pub enum IndexCommand {
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = kdisc_core::retrieval::DEFAULT_DIMENSION)]
        dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prints `<para_id>\t<score>` per hit, best first.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        q: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BackendArg {
    Mock,
    Echo,
    Http,
}

#[derive(Args, Debug)]
pub struct AskArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Prebuilt graph dump; built from corpus and annotations otherwise.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Prebuilt index dump; built from the corpus otherwise.
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub q: String,
    /// Use the offline extractive backend.
    #[arg(long, conflicts_with = "backend")]
    pub mock: bool,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    #[arg(long, default_value = "")]
    pub model_id: String,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Print the full answer, prompts included, as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Fail {
    pub code: i32,
    pub message: String,
}

impl Fail {
    fn new(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

trait Ctx<T> {
    fn ctx(self, what: impl Display) -> Result<T, Fail>;
}

impl<T, E: Display> Ctx<T> for Result<T, E> {
    fn ctx(self, what: impl Display) -> Result<T, Fail> {
        self.map_err(|e| Fail::new(format!("{what}: {e}")))
    }
}

type CliResult = Result<(), Fail>;

fn read_text(path: &Path) -> Result<String, Fail> {
    std::fs::read_to_string(path).ctx(path.display())
}

fn load_corpus(path: &Path) -> Result<Corpus, Fail> {
    formats::read_corpus(&read_text(path)?).ctx(path.display())
}

fn load_annotations(path: &Path) -> Result<Vec<AnnotationSet>, Fail> {
    formats::read_annotations(&read_text(path)?).ctx(path.display())
}

fn load_schema(path: &Path) -> Result<kdisc_core::ontology::OntologySchema, Fail> {
    formats::read_schema(&read_text(path)?).ctx(path.display())
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => std::fs::write(p, text).ctx(p.display()),
        None => out.write_all(text.as_bytes()).ctx("stdout"),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(rendered.as_bytes())
            } else {
                err.write_all(rendered.as_bytes())
            };
            return if code == 0 { 0 } else { 2 };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    match cmd {
        Command::Ingest(a) => ingest(a, out, err),
        Command::Schema(c) => schema(c, out, err),
        Command::AnnotateRegex(a) => annotate_regex(a, out),
        Command::Train(a) => train(a, out, err),
        Command::AutoAnnotate(a) => auto_annotate(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::ExportTraining(a) => export_training(a, out, err),
        Command::Graph(c) => graph(c, out),
        Command::Index(c) => index(c, out),
        Command::Ask(a) => ask(a, out),
        Command::Serve(a) => serve(a),
    }
}

fn ingest(a: IngestArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let mut inputs = Vec::new();
    for p in &a.inputs {
        let bytes = std::fs::read(p).ctx(p.display())?;
        let format = match a.format {
            FormatArg::Tei => Some(Format::TeiXml),
            FormatArg::Text => Some(Format::PlainText),
            FormatArg::Auto => Format::from_path(p),
        };
        inputs.push((p.display().to_string(), format, bytes));
    }
    let (docs, failures) = pipeline::ingest_payloads(inputs, &HeuristicTagger);
    for f in &failures {
        let _ = writeln!(err, "error: {f}");
    }
    let mut corpus = Corpus::default();
    for d in docs {
        corpus.upsert(d);
    }
    emit(out, a.out.as_deref(), &formats::write_corpus(&corpus))?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Fail::new(format!("{} input(s) failed to ingest", failures.len())))
    }
}

fn report_violations(err: &mut dyn Write, doc_id: &str, violations: &[Violation]) {
    for v in violations {
        let _ = writeln!(err, "{doc_id}\t{}", serde_json::to_string(v).unwrap_or_default());
    }
}

fn schema(c: SchemaCommand, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    match c {
        SchemaCommand::Validate {
            schema,
            corpus,
            annotations,
        } => {
            let s = load_schema(&schema)?;
            let (Some(corpus), Some(annotations)) = (corpus, annotations) else {
                return emit(out, None, &formats::write_schema(&s));
            };
            let corpus = load_corpus(&corpus)?;
            let mut total = 0;
            for set in load_annotations(&annotations)? {
                let mut violations = validate(&set, &s).violations;
                match corpus.document(&set.doc_id) {
                    Some(doc) => violations.extend(check_against_document(&set, doc).violations),
                    None => {
                        let _ = writeln!(err, "{}\tunknown document", set.doc_id);
                        total += 1;
                    }
                }
                report_violations(err, &set.doc_id, &violations);
                total += violations.len();
            }
            let _ = writeln!(out, "violations\t{total}");
            if total == 0 {
                Ok(())
            } else {
                Err(Fail::new(format!("{total} violation(s)")))
            }
        }
        SchemaCommand::Import { listing, select } => {
            let l: ExternalListing = serde_json::from_str(&read_text(&listing)?).ctx(listing.display())?;
            let selection = if select.is_empty() {
                l.entities.iter().map(|e| e.name.clone()).collect()
            } else {
                select
            };
            let s = import_listing(&l, &selection).ctx("import")?;
            emit(out, None, &formats::write_schema(&s))
        }
    }
}

fn annotate_regex(a: AnnotateRegexArgs, out: &mut dyn Write) -> CliResult {
    let corpus = load_corpus(&a.corpus)?;
    let rules = parse_rules(&read_text(&a.rules)?).ctx(a.rules.display())?;
    let gaz = Gazetteer::new(rules).ctx(a.rules.display())?;
    if let Some(p) = &a.schema {
        gaz.check_schema(&load_schema(p)?).ctx(a.rules.display())?;
    }
    let sets: Vec<AnnotationSet> = corpus.documents.iter().map(|d| gaz.annotate(d)).collect();
    emit(out, a.out.as_deref(), &formats::write_annotations(&sets))
}

fn train(a: TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let corpus = load_corpus(&a.corpus)?;
    let sets = load_annotations(&a.annotations)?;
    let schema = load_schema(&a.schema)?;
    let hyper = a.hyper.resolve();
    let trained = pipeline::train_models(&corpus, &sets, &schema, &hyper).ctx("training")?;
    for w in &trained.warnings {
        let _ = writeln!(err, "warning\t{}", serde_json::to_string(w).unwrap_or_default());
    }
    std::fs::create_dir_all(&a.out_dir).ctx(a.out_dir.display())?;
    let ner_path = a.out_dir.join("ner.json");
    let rc_path = a.out_dir.join("rc.json");
    std::fs::write(&ner_path, formats::write_ner_model(&trained.ner)).ctx(ner_path.display())?;
    std::fs::write(&rc_path, formats::write_rc_model(&trained.rc)).ctx(rc_path.display())?;
    let _ = writeln!(out, "records\t{}", trained.records);
    let _ = writeln!(out, "entity_types\t{}", trained.ner.type_list.join(","));
    let _ = writeln!(out, "relations\t{}", trained.rc.relation_list.join(","));
    let _ = writeln!(out, "rc_examples\t{}", trained.rc_stats.examples);
    let _ = writeln!(out, "ner_model\t{}", ner_path.display());
    let _ = writeln!(out, "rc_model\t{}", rc_path.display());
    Ok(())
}

fn auto_annotate(a: AutoAnnotateArgs, out: &mut dyn Write) -> CliResult {
    let corpus = load_corpus(&a.corpus)?;
    let ner = formats::read_ner_model(&read_text(&a.ner)?).ctx(a.ner.display())?;
    let rc = formats::read_rc_model(&read_text(&a.rc)?).ctx(a.rc.display())?;
    let schema = load_schema(&a.schema)?;
    let sets = pipeline::auto_annotate_all(&corpus.documents, &ner, &rc, &schema).ctx("auto-annotate")?;
    emit(out, a.out.as_deref(), &formats::write_annotations(&sets))
}

/// `precision`, `recall` and `f1` lines, support counts, then one line per
/// entity type.
pub fn format_eval(r: &EvalResult) -> String {
    let mut s = format!(
        "precision\t{:.6}\nrecall\t{:.6}\nf1\t{:.6}\nsupport\ttp={} predicted={} gold={}\n",
        r.precision, r.recall, r.micro_f1, r.true_positives, r.predicted, r.gold
    );
    for (ty, t) in &r.per_type {
        s.push_str(&format!(
            "type\t{ty}\tp={:.6}\tr={:.6}\tf1={:.6}\ttp={} predicted={} gold={}\n",
            t.precision, t.recall, t.f1, t.true_positives, t.predicted, t.gold
        ));
    }
    s
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> CliResult {
    let result = match &a.text {
        Some(text_path) => {
            let text = read_text(text_path)?;
            let doc_id = doc_id_for_payload(text.as_bytes());
            let pid = para_id(&doc_id, 0);
            let pred = parse_standoff(&read_text(&a.pred)?, &text, &doc_id, &pid).ctx(a.pred.display())?;
            let gold = parse_standoff(&read_text(&a.gold)?, &text, &doc_id, &pid).ctx(a.gold.display())?;
            evaluate_micro_f1(&pred, &gold).ctx("evaluate")?
        }
        None => {
            let pred = load_annotations(&a.pred)?;
            let gold = load_annotations(&a.gold)?;
            pipeline::evaluate_sets(&pred, &gold).ctx("evaluate")?
        }
    };
    let text = if a.json {
        format!("{}\n", serde_json::to_string_pretty(&result).ctx("json")?)
    } else {
        format_eval(&result)
    };
    emit(out, None, &text)
}

fn export_training(a: CorpusAnnotationsArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let corpus = load_corpus(&a.corpus)?;
    let sets = load_annotations(&a.annotations)?;
    let (records, warnings) = pipeline::training_records(&corpus, &sets);
    for w in &warnings {
        let _ = writeln!(err, "warning\t{}", serde_json::to_string(w).unwrap_or_default());
    }
    emit(out, a.out.as_deref(), &formats::write_training(&records))
}

fn graph(c: GraphCommand, out: &mut dyn Write) -> CliResult {
    match c {
        GraphCommand::Build {
            corpus,
            annotations,
            out: path,
        } => {
            let corpus = load_corpus(&corpus)?;
            let sets = match annotations {
                Some(p) => load_annotations(&p)?,
                None => Vec::new(),
            };
            let g = kdisc_core::graph::build_graph(&corpus.documents, &sets).ctx("graph")?;
            emit(out, path.as_deref(), &formats::write_graph(&g))
        }
        GraphCommand::Triples {
            graph,
            head_type,
            relation,
            tail_type,
        } => {
            let g = formats::read_graph(&read_text(&graph)?).ctx(graph.display())?;
            let filter = TripleFilter {
                head_type,
                relation,
                tail_type,
            };
            emit(out, None, &write_jsonl(&query_triples(&g, &filter)))
        }
        GraphCommand::Subgraph { graph, paras } => {
            let g = formats::read_graph(&read_text(&graph)?).ctx(graph.display())?;
            let sub = subgraph_for_paragraphs(&g, &paras).ctx("subgraph")?;
            emit(out, None, &formats::write_graph(&sub))
        }
    }
}

fn index(c: IndexCommand, out: &mut dyn Write) -> CliResult {
    match c {
        IndexCommand::Build { corpus, dim, out: path } => {
            if dim == 0 {
                return Err(Fail::new("--dim must be positive"));
            }
            let corpus = load_corpus(&corpus)?;
            let idx = index_paragraphs(&corpus, &HashingEmbedder::new(dim));
            emit(out, path.as_deref(), &formats::write_index(&idx))
        }
        IndexCommand::Query { index, k, q, json } => {
            let idx = formats::read_index(&read_text(&index)?).ctx(index.display())?;
            let embedder = HashingEmbedder::new(idx.dimension.max(1));
            let hits = idx.top_k(&embedder, &q, k).ctx("query")?;
            let text = if json {
                write_jsonl(&hits)
            } else {
                hits.iter().map(|h| format!("{}\t{:.6}\n", h.para_id, h.score)).collect()
            };
            emit(out, None, &text)
        }
    }
}

fn backend_for(a: &AskArgs) -> Result<Box<dyn GenerationBackend>, Fail> {
    let choice = if a.mock { BackendArg::Mock } else { a.backend.unwrap_or(BackendArg::Http) };
    Ok(match choice {
        BackendArg::Mock => Box::new(ExtractiveMock),
        BackendArg::Echo => Box::new(EchoBackend),
        BackendArg::Http => {
            let cfg = HttpBackendConfig::from_env()
                .ok_or_else(|| Fail::new(format!("set {URL_ENV} (and optionally {TOKEN_ENV}) or pass --mock")))?;
            Box::new(HttpBackend::new(cfg))
        }
    })
}

fn ask(a: AskArgs, out: &mut dyn Write) -> CliResult {
    let corpus = load_corpus(&a.corpus)?;
    let sets = match &a.annotations {
        Some(p) => load_annotations(p)?,
        None => Vec::new(),
    };
    let graph = match &a.graph {
        Some(p) => formats::read_graph(&read_text(p)?).ctx(p.display())?,
        None => kdisc_core::graph::build_graph(&corpus.documents, &sets).ctx("graph")?,
    };
    let (index, embedder) = match &a.index {
        Some(p) => {
            let idx = formats::read_index(&read_text(p)?).ctx(p.display())?;
            let e = HashingEmbedder::new(idx.dimension.max(1));
            (idx, e)
        }
        None => {
            let e = HashingEmbedder::default();
            (index_paragraphs(&corpus, &e), e)
        }
    };
    if embedder.embedder_id() != index.embedder_id {
        return Err(Fail::new(format!("index was built with unsupported embedder {}", index.embedder_id)));
    }
    let templates = match &a.templates {
        Some(p) => formats::read_templates(&read_text(p)?).ctx(p.display())?,
        None => PromptTemplates::default(),
    };
    let backend = backend_for(&a)?;
    let defaults = GenParams::default();
    let question = Question {
        text: a.q.clone(),
        project_id: String::new(),
        model_id: a.model_id.clone(),
        params: GenParams {
            max_tokens: a.max_tokens.unwrap_or(defaults.max_tokens),
            temperature: a.temperature.unwrap_or(defaults.temperature),
        },
    };
    let answer = pipeline::answer_question(&question, &corpus, &graph, &index, &embedder, &templates, backend.as_ref())
        .ctx("ask")?;
    let text = if a.json {
        format!("{}\n", serde_json::to_string_pretty(&answer).ctx("json")?)
    } else {
        transcript::render(&a.q, &answer)
    };
    emit(out, None, &text)
}

fn serve(a: ServeArgs) -> CliResult {
    let config = crate::service::ServiceConfig::load(&a.config).ctx(a.config.display())?;
    let rt = tokio::runtime::Runtime::new().ctx("runtime")?;
    rt.block_on(crate::service::serve(config, &a.addr)).ctx("serve")
}

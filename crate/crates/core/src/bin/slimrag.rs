use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use slimrag::canonical::to_canonical_string;
use slimrag::embedding::{CachedEmbedder, EmbeddingCache, DEFAULT_SEED};
use slimrag::extraction::Gazetteer;
use slimrag::{
    build_index, compute_ritu, ingest_corpus, load_hotpotqa, load_index, retrieve, run_eval, save_index,
    Embedder, EmbedderConfig, EntityExtractor, EntityIndex, Error, EvalScope, Execution, ExtractorConfig,
    LocalEmbedder, LocalExtractor, Pipeline, RetrievalParams, SegmentationPolicy, SentenceSplitter, Tokenizer,
};

#[derive(Parser, Debug)]
#[command(name = "slimrag", version, about = "Entity-aware retrieval without a graph")]
struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Human)]
    output: OutputFormat,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    show_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OutputFormat {
    Human,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Toggle {
    On,
    Off,
}

impl Toggle {
    fn on(self) -> bool {
        self == Toggle::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ProviderKind {
    Local,
    Remote,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build, extend or inspect an index.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Retrieve a context for a query.
    Retrieve(RetrieveArgs),
    /// Evaluate retrieval on a HotpotQA-format dataset.
    Eval(EvalArgs),
}

#[derive(Subcommand, Debug)]
enum IndexCommand {
    Build(BuildArgs),
    Add(AddArgs),
    Stats(StatsArgs),
}

#[derive(Args, Debug, Serialize)]
struct ProviderArgs {
    #[arg(long, value_enum, env = "SLIMRAG_EXTRACTOR", default_value_t = ProviderKind::Local)]
    extractor: ProviderKind,
    #[arg(long, value_enum, env = "SLIMRAG_EMBEDDER", default_value_t = ProviderKind::Local)]
    embedder: ProviderKind,
    /// Coreference resolution during extraction.
    #[arg(long, value_enum, env = "SLIMRAG_COREF", default_value_t = Toggle::On)]
    coref: Toggle,
    /// Preceding chunks offered as coreference context.
    #[arg(long, env = "SLIMRAG_COREF_WINDOW", default_value_t = 3)]
    coref_window: usize,
    /// Newline-separated entity names for the local extractor.
    #[arg(long, env = "SLIMRAG_GAZETTEER")]
    gazetteer: Option<PathBuf>,
    #[arg(long, env = "SLIMRAG_EXTRACTOR_MODEL", default_value = "gpt-4o-mini")]
    extractor_model: String,
    #[arg(long, env = "SLIMRAG_EMBEDDER_MODEL", default_value = "text-embedding-3-small")]
    embedder_model: String,
    #[arg(long, env = "SLIMRAG_EMBED_BATCH", default_value_t = 64)]
    embed_batch: usize,
    /// Local embedder dimension.
    #[arg(long, env = "SLIMRAG_EMBED_DIM", default_value_t = slimrag::embedding::DEFAULT_DIM)]
    embed_dim: usize,
    /// Append-only JSONL cache of embeddings.
    #[arg(long, env = "SLIMRAG_EMBEDDING_CACHE")]
    embedding_cache: Option<PathBuf>,
    /// Remote request rate limit shared by all workers.
    #[arg(long, env = "SLIMRAG_REQUESTS_PER_SECOND")]
    requests_per_second: Option<f64>,
    #[arg(long, value_parser = parse_policy, env = "SLIMRAG_POLICY", default_value = "sentence")]
    #[serde(serialize_with = "display")]
    policy: SegmentationPolicy,
    #[arg(long, value_parser = parse_tokenizer, env = "SLIMRAG_TOKENIZER", default_value = "ws-punct-v1")]
    tokenizer: Tokenizer,
    #[arg(long, value_enum, env = "SLIMRAG_EXECUTION", default_value_t = ExecArg::Parallel)]
    execution: ExecArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ExecArg {
    Sequential,
    Parallel,
}

#[derive(Args, Debug, Serialize)]
struct RetrievalArgs {
    /// Nearest indexed entities per query entity.
    #[arg(long, env = "SLIMRAG_K", default_value_t = 5)]
    k: usize,
    /// Chunks in the final context.
    #[arg(long, env = "SLIMRAG_H", default_value_t = 10)]
    h: usize,
    #[arg(long, env = "SLIMRAG_TOKEN_LIMIT", default_value_t = 4096)]
    token_limit: u64,
    /// Query decomposition.
    #[arg(long, value_enum, env = "SLIMRAG_DECOMP", default_value_t = Toggle::On)]
    decomp: Toggle,
    #[arg(long, value_enum, env = "SLIMRAG_ENTITY_WEIGHTS", default_value_t = Toggle::Off)]
    entity_weights: Toggle,
    /// Score every chunk by query similarity when no entity matches.
    #[arg(long, value_enum, env = "SLIMRAG_FALLBACK", default_value_t = Toggle::On)]
    fallback: Toggle,
    #[arg(long, env = "SLIMRAG_MIN_SIMILARITY")]
    min_similarity: Option<f64>,
}

impl RetrievalArgs {
    fn params(&self) -> RetrievalParams {
        RetrievalParams {
            k: self.k,
            h: self.h,
            token_limit: self.token_limit,
            use_entity_weights: self.entity_weights.on(),
            fallback_on_no_entities: self.fallback.on(),
            min_similarity: self.min_similarity,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct BuildArgs {
    /// JSONL corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    providers: ProviderArgs,
}

#[derive(Args, Debug, Serialize)]
struct AddArgs {
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Write here instead of replacing the input index.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    providers: ProviderArgs,
}

#[derive(Args, Debug, Serialize)]
struct StatsArgs {
    #[arg(long)]
    index: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct RetrieveArgs {
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    query: Option<String>,
    /// Write the retrieval trace as JSON.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    retrieval: RetrievalArgs,
    #[command(flatten)]
    providers: ProviderArgs,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-example rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, value_parser = parse_scope, env = "SLIMRAG_SCOPE", default_value = "per-example")]
    scope: EvalScope,
    /// Report index time as zero, for byte-comparable reports.
    #[arg(long)]
    zero_timing: bool,
    #[command(flatten)]
    retrieval: RetrievalArgs,
    #[command(flatten)]
    providers: ProviderArgs,
}

fn parse_policy(s: &str) -> Result<SegmentationPolicy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_tokenizer(s: &str) -> Result<Tokenizer, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_scope(s: &str) -> Result<EvalScope, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn required<'a, T: ?Sized>(value: Option<&'a T>, flag: &str) -> CliResult<&'a T> {
    value.ok_or_else(|| Failure::Usage(format!("the argument --{flag} is required")))
}

struct Providers {
    extractor: Box<dyn EntityExtractor>,
    embedder: Arc<dyn Embedder>,
    policy: SegmentationPolicy,
    tokenizer: Tokenizer,
    execution: Execution,
}

impl Providers {
    fn pipeline(&self) -> Pipeline<'_> {
        Pipeline::new(self.extractor.as_ref(), self.embedder.as_ref())
            .with_policy(self.policy)
            .with_tokenizer(self.tokenizer)
            .with_execution(self.execution)
    }
}

#[cfg(feature = "remote")]
fn http_client(args: &ProviderArgs) -> slimrag::Result<Arc<slimrag::http::HttpClient>> {
    let endpoint = slimrag::http::Endpoint::from_env()?;
    let mut client = slimrag::http::HttpClient::new(endpoint);
    if let Some(rps) = args.requests_per_second {
        client = client.with_requests_per_second(rps);
    }
    Ok(Arc::new(client))
}

fn providers(args: &ProviderArgs, decomposition: bool) -> slimrag::Result<Providers> {
    let config = ExtractorConfig {
        coreference_enabled: args.coref.on(),
        decomposition_enabled: decomposition,
        coref_window: args.coref_window,
        ..ExtractorConfig::default()
    };
    #[cfg(feature = "remote")]
    let needs_http = args.extractor == ProviderKind::Remote || args.embedder == ProviderKind::Remote;
    #[cfg(feature = "remote")]
    let client = if needs_http { Some(http_client(args)?) } else { None };

    let extractor: Box<dyn EntityExtractor> = match args.extractor {
        ProviderKind::Local => {
            let gazetteer = match &args.gazetteer {
                Some(p) => Gazetteer::load(p)?,
                None => Gazetteer::default(),
            };
            Box::new(LocalExtractor::new(config, gazetteer))
        }
        #[cfg(feature = "remote")]
        ProviderKind::Remote => Box::new(slimrag::extraction::RemoteExtractor::new(
            config,
            &args.extractor_model,
            client.clone().expect("client built for remote providers"),
        )),
        #[cfg(not(feature = "remote"))]
        ProviderKind::Remote => return Err(Error::RemoteUnavailable),
    };
    let embedder: Arc<dyn Embedder> = match args.embedder {
        ProviderKind::Local => Arc::new(LocalEmbedder::new(args.embed_dim, DEFAULT_SEED)?),
        #[cfg(feature = "remote")]
        ProviderKind::Remote => Arc::new(slimrag::embedding::RemoteEmbedder::new(
            &args.embedder_model,
            args.embed_batch,
            client.expect("client built for remote providers"),
        )),
        #[cfg(not(feature = "remote"))]
        ProviderKind::Remote => return Err(Error::RemoteUnavailable),
    };
    let embedder: Arc<dyn Embedder> = match &args.embedding_cache {
        Some(path) => Arc::new(CachedEmbedder::new(embedder, Arc::new(EmbeddingCache::open(path)?))),
        None => embedder,
    };
    Ok(Providers {
        extractor,
        embedder,
        policy: args.policy,
        tokenizer: args.tokenizer,
        execution: match args.execution {
            ExecArg::Sequential => Execution::Sequential,
            ExecArg::Parallel => Execution::Parallel,
        },
    })
}

fn embedder_config(args: &ProviderArgs) -> EmbedderConfig {
    match args.embedder {
        ProviderKind::Local => EmbedderConfig::Local {
            dim: args.embed_dim,
            seed: DEFAULT_SEED,
        },
        ProviderKind::Remote => EmbedderConfig::Remote {
            model: args.embedder_model.clone(),
            batch_size: args.embed_batch,
        },
    }
}

fn effective_config(cli: &Cli) -> Value {
    let providers = |p: &ProviderArgs| {
        let mut v = serde_json::to_value(p).expect("plain config");
        v["embedder_id"] = json!(embedder_config(p).embedder_id());
        v
    };
    let (name, mut config) = match &cli.command {
        Command::Index(IndexCommand::Build(a)) => (
            "index build",
            json!({"corpus": a.corpus, "out": a.out, "providers": providers(&a.providers)}),
        ),
        Command::Index(IndexCommand::Add(a)) => (
            "index add",
            json!({"index": a.index, "corpus": a.corpus, "out": a.out, "providers": providers(&a.providers)}),
        ),
        Command::Index(IndexCommand::Stats(a)) => ("index stats", json!({"index": a.index})),
        Command::Retrieve(a) => (
            "retrieve",
            json!({
                "index": a.index,
                "query": a.query,
                "trace": a.trace,
                "retrieval": a.retrieval,
                "providers": providers(&a.providers),
            }),
        ),
        Command::Eval(a) => (
            "eval",
            json!({
                "dataset": a.dataset,
                "report": a.report,
                "csv": a.csv,
                "scope": a.scope,
                "zero_timing": a.zero_timing,
                "retrieval": a.retrieval,
                "providers": providers(&a.providers),
            }),
        ),
    };
    config["command"] = json!(name);
    config["output"] = json!(cli.output);
    config
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        Value::String(s) => out.push((prefix.to_owned(), s.clone())),
        other => out.push((prefix.to_owned(), other.to_string())),
    }
}

fn emit_json(v: &impl Serialize) -> CliResult {
    let text = to_canonical_string(v).map_err(Error::from)?;
    println!("{text}");
    Ok(())
}

fn emit_fields(format: OutputFormat, v: &Value) -> CliResult {
    match format {
        OutputFormat::Json => emit_json(v),
        OutputFormat::Human => {
            let mut rows = Vec::new();
            flatten("", v, &mut rows);
            let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            for (k, val) in rows {
                println!("{k:width$}  {val}");
            }
            Ok(())
        }
    }
}

fn read_corpus(path: &Path, p: &Providers) -> slimrag::Result<slimrag::Corpus> {
    let file = File::open(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    ingest_corpus(BufReader::new(file), p.policy, &SentenceSplitter::default(), p.tokenizer)
}

fn stats(index: &EntityIndex) -> Value {
    let ritu = compute_ritu(&index.accounting);
    json!({
        "chunks": index.chunk_count(),
        "entities": index.entity_count(),
        "tuic": ritu.tuic,
        "tctc": ritu.tctc,
        "ritu": ritu.ritu,
        "empty_corpus": ritu.empty_corpus,
        "breakdown": ritu.breakdown,
        "schema": index.schema,
        "config_fingerprint": index.config_fingerprint,
    })
}

fn write_file(path: &Path, contents: &str) -> slimrag::Result<()> {
    let mut f = File::create(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn run(cli: &Cli) -> CliResult {
    if cli.show_config {
        return emit_fields(cli.output, &effective_config(cli));
    }
    match &cli.command {
        Command::Index(IndexCommand::Build(a)) => {
            let corpus_path = required(a.corpus.as_deref(), "corpus")?;
            let out = required(a.out.as_deref(), "out")?;
            let p = providers(&a.providers, true)?;
            let corpus = read_corpus(corpus_path, &p)?;
            let index = build_index(&corpus, &p.pipeline())?;
            save_index(&index, out)?;
            emit_fields(cli.output, &stats(&index))
        }
        Command::Index(IndexCommand::Add(a)) => {
            let index_path = required(a.index.as_deref(), "index")?;
            let corpus_path = required(a.corpus.as_deref(), "corpus")?;
            let p = providers(&a.providers, true)?;
            let mut index = load_index(index_path)?;
            let corpus = read_corpus(corpus_path, &p)?;
            index.add_chunks(&corpus.chunks, &p.pipeline())?;
            save_index(&index, a.out.as_deref().unwrap_or(index_path))?;
            emit_fields(cli.output, &stats(&index))
        }
        Command::Index(IndexCommand::Stats(a)) => {
            let index = load_index(required(a.index.as_deref(), "index")?)?;
            emit_fields(cli.output, &stats(&index))
        }
        Command::Retrieve(a) => {
            let index_path = required(a.index.as_deref(), "index")?;
            let query = required(a.query.as_deref(), "query")?;
            let p = providers(&a.providers, a.retrieval.decomp.on())?;
            let index = load_index(index_path)?;
            let ctx = retrieve(&index, query, &a.retrieval.params(), &p.pipeline())?;
            if let Some(path) = &a.trace {
                write_file(path, &(to_canonical_string(&ctx.trace).map_err(Error::from)? + "\n"))?;
            }
            match cli.output {
                OutputFormat::Json => emit_json(&json!({
                    "query": query,
                    "chunks": ctx.chunks,
                    "text": ctx.text,
                    "total_tokens": ctx.total_tokens,
                    "path": ctx.trace.path,
                    "flags": ctx.trace.flags,
                })),
                OutputFormat::Human => {
                    eprintln!(
                        "{} chunks, {} tokens, {} candidates, path {}",
                        ctx.chunks.len(),
                        ctx.total_tokens,
                        ctx.trace.candidate_count,
                        json!(ctx.trace.path)
                    );
                    if !ctx.text.is_empty() {
                        println!("{}", ctx.text);
                    }
                    Ok(())
                }
            }
        }
        Command::Eval(a) => {
            let dataset_path = required(a.dataset.as_deref(), "dataset")?;
            let report_path = required(a.report.as_deref(), "report")?;
            let p = providers(&a.providers, a.retrieval.decomp.on())?;
            let dataset = load_hotpotqa(dataset_path)?;
            let mut report = run_eval(&dataset.examples, &p.pipeline(), &a.retrieval.params(), a.scope)?;
            report.counts.skipped = dataset.skipped.len();
            if a.zero_timing {
                report.zero_timing();
            }
            write_file(report_path, &report.to_json()?)?;
            if let Some(csv) = &a.csv {
                report.write_csv(csv)?;
            }
            emit_fields(
                cli.output,
                &json!({
                    "accuracy": report.accuracy,
                    "recall": report.recall,
                    "f1": report.f1,
                    "ritu": report.ritu,
                    "tuic": report.tuic,
                    "tctc": report.tctc,
                    "index_time_seconds": report.index_time_seconds,
                    "counts": report.counts,
                }),
            )
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

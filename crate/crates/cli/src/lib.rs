//! The `lexiforge` command line.
//!
//! Exit codes: 0 success, 1 internal error, 2 bad usage or configuration,
//! 3 unreadable input, 4 unwritable output, 5 embedding service failure.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use lexiforge_core::config::{Config, EmbedderKind, ProviderKind};
use lexiforge_core::embedding::{
    CachedEmbedder, Embedder, EmbeddingCache, EmbeddingError, RemoteEmbedder, TrigramEmbedder,
};
use lexiforge_core::error_analysis::{ErrorCategory, ErrorFinding};
use lexiforge_core::generation::{
    run_generation, ChatCompletionsClient, GenerationError, RunStats, StubProvider, TextProvider,
};
use lexiforge_core::ingest::{
    parse_dictionary, parse_failures, parse_lemma_list, read_jsonl, write_dictionary, write_failures, write_jsonl,
};
use lexiforge_core::report::{
    evaluate, render_tables, tables_json, EvaluationReport, InputDigest, Provenance, TableFormat,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_OUTPUT: i32 = 4;
pub const EXIT_SERVICE: i32 = 5;

pub const CONFIG_ENV: &str = "LEXIFORGE_CONFIG";

#[derive(Debug, Parser)]
#[command(
    name = "lexiforge",
    version,
    about = "Generate dictionaries with a language model and score them against a gold standard"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Define every lemma of a list with the configured provider.
    Generate {
        /// Lemma list: one `lemma` or `lemma<TAB>POS label` per line.
        #[arg(long)]
        lemmas: PathBuf,
        /// TOML configuration (falls back to $LEXIFORGE_CONFIG).
        #[arg(long, env = CONFIG_ENV)]
        config: Option<PathBuf>,
        /// Output dictionary (JSON lines).
        #[arg(long)]
        out: PathBuf,
        /// Output failure log (JSON lines).
        #[arg(long)]
        failures: PathBuf,
        /// Directory receiving one raw reply file per batch.
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Align a generated dictionary with a gold one and compute every metric.
    Evaluate {
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Overrides `embedding.kind` from the configuration.
        #[arg(long, value_enum)]
        embedder: Option<EmbedderArg>,
        #[arg(long, env = CONFIG_ENV)]
        config: Option<PathBuf>,
        /// Failure log from `generate`; its refusals become findings.
        #[arg(long)]
        failures: Option<PathBuf>,
        /// Overrides `evaluation.threads`.
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory for report.json, alignments.jsonl and findings.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the tables of an evaluation report.
    Report {
        /// report.json, or the directory holding it.
        #[arg(long)]
        eval: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
        /// Tables are written under <out>/tables/.
        #[arg(long)]
        out: PathBuf,
    },
    /// List error findings of one category.
    Errors {
        /// report.json, or the directory holding it.
        #[arg(long)]
        eval: PathBuf,
        #[arg(long, value_parser = parse_category)]
        category: ErrorCategory,
        #[arg(long, default_value_t = 20)]
        limit: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EmbedderArg {
    Deterministic,
    Remote,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Md,
    Json,
}

fn parse_category(s: &str) -> Result<ErrorCategory, String> {
    s.parse().map_err(|_| {
        let valid: Vec<&str> = ErrorCategory::ALL.iter().map(|c| c.as_str()).collect();
        format!("valid categories: {}", valid.join(", "))
    })
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

trait Coded<T> {
    fn code(self, code: i32, what: impl FnOnce() -> String) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Coded<T> for Result<T, E> {
    fn code(self, code: i32, what: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code,
            error: e.into().context(what()),
        })
    }
}

/// Parses `args` (program name first) and runs the command, writing normal
/// output to `out` and diagnostics to standard error.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Generate {
            lemmas,
            config,
            out: dict_path,
            failures,
            audit,
        } => cmd_generate(&lemmas, config.as_deref(), &dict_path, &failures, audit.as_deref(), out),
        Command::Evaluate {
            generated,
            gold,
            embedder,
            config,
            failures,
            threads,
            out: dir,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(kind) = embedder {
                cfg.embedding.kind = match kind {
                    EmbedderArg::Deterministic => EmbedderKind::Deterministic,
                    EmbedderArg::Remote => EmbedderKind::Remote,
                };
            }
            if let Some(t) = threads {
                cfg.evaluation.threads = t;
            }
            cmd_evaluate(&generated, &gold, failures.as_deref(), &cfg, &dir, out)
        }
        Command::Report { eval, format, out: dir } => {
            let format = match format {
                FormatArg::Csv => TableFormat::Csv,
                FormatArg::Md => TableFormat::Markdown,
                FormatArg::Json => TableFormat::Json,
            };
            cmd_report(&eval, format, &dir, out)
        }
        Command::Errors { eval, category, limit } => cmd_errors(&eval, category, limit, out),
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    match path {
        Some(p) => Config::load(p).code(EXIT_CONFIG, || "loading configuration".into()),
        None => Ok(Config::default()),
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(parent)?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).code(EXIT_INPUT, || format!("reading {}", path.display()))
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    write_atomic(path, bytes).code(EXIT_OUTPUT, || format!("writing {}", path.display()))
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<(), Failure> {
    out.write_fmt(text)
        .and_then(|_| out.write_all(b"\n"))
        .code(EXIT_OUTPUT, || "writing to standard output".into())
}

fn summarize_run(stats: &RunStats) -> String {
    let failures: Vec<String> = stats.failures.iter().map(|(r, n)| format!("{r} {n}")).collect();
    format!(
        "records {}, entries {}, failures {}{}, batches {}, retries {}, tokens {} prompt / {} completion, elapsed {:.2}s",
        stats.records,
        stats.entries,
        stats.failure_count(),
        if failures.is_empty() { String::new() } else { format!(" ({})", failures.join(", ")) },
        stats.batches.len(),
        stats.total_retries,
        stats.prompt_tokens,
        stats.completion_tokens,
        stats.elapsed.as_secs_f64()
    )
}

fn cmd_generate(
    lemmas: &Path,
    config: Option<&Path>,
    dict_path: &Path,
    failures_path: &Path,
    audit: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let config = load_config(config)?;
    let mut gen_config = config
        .generation_config()
        .code(EXIT_CONFIG, || "preparing generation".into())?;
    gen_config.audit = audit.is_some();

    let list = parse_lemma_list(BufReader::new(read_input(lemmas)?.as_slice()))
        .code(EXIT_INPUT, || format!("parsing {}", lemmas.display()))?;
    if list.duplicates > 0 {
        eprintln!("note: {} duplicate lemma lines ignored", list.duplicates);
    }

    let provider: Box<dyn TextProvider> = match config.provider.kind {
        ProviderKind::Stub => {
            let path = config.provider.stub_replies.as_deref().expect("validated");
            Box::new(StubProvider::from_path(path).code(EXIT_CONFIG, || "loading stub provider".into())?)
        }
        ProviderKind::ChatCompletions => Box::new(
            ChatCompletionsClient::new(&config.chat_completions_config())
                .code(EXIT_CONFIG, || "configuring provider".into())?,
        ),
    };

    let output = run_generation(&list.records, &provider, &gen_config).map_err(|e| match e {
        GenerationError::Config(_) => Failure {
            code: EXIT_CONFIG,
            error: anyhow!(e),
        },
    })?;

    let mut dict_bytes = Vec::new();
    write_dictionary(&output.dictionary, &mut dict_bytes).code(EXIT_INTERNAL, || "serializing dictionary".into())?;
    let mut failure_bytes = Vec::new();
    write_failures(&output.failures, &mut failure_bytes).code(EXIT_INTERNAL, || "serializing failures".into())?;
    write_output(dict_path, &dict_bytes)?;
    write_output(failures_path, &failure_bytes)?;
    if let Some(dir) = audit {
        for (i, reply) in output.audit.iter().enumerate() {
            write_output(&dir.join(format!("batch_{:05}.txt", i + 1)), reply.as_bytes())?;
        }
    }
    say(out, format_args!("{}", summarize_run(&output.stats)))
}

fn digest(path: &Path, bytes: &[u8]) -> InputDigest {
    InputDigest::of_bytes(path.display().to_string(), bytes)
}

fn embedding_failure(e: &EmbeddingError) -> i32 {
    match e {
        EmbeddingError::Service(_) | EmbeddingError::Protocol(_) => EXIT_SERVICE,
        _ => EXIT_INTERNAL,
    }
}

fn cmd_evaluate(
    generated_path: &Path,
    gold_path: &Path,
    failures_path: Option<&Path>,
    config: &Config,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let generated_bytes = read_input(generated_path)?;
    let gold_bytes = read_input(gold_path)?;
    let generated = parse_dictionary("generated", BufReader::new(generated_bytes.as_slice()))
        .code(EXIT_INPUT, || format!("parsing {}", generated_path.display()))?;
    let gold = parse_dictionary("gold", BufReader::new(gold_bytes.as_slice()))
        .code(EXIT_INPUT, || format!("parsing {}", gold_path.display()))?;
    let (failures, failures_digest) = match failures_path {
        Some(p) => {
            let bytes = read_input(p)?;
            let parsed = parse_failures(BufReader::new(bytes.as_slice()))
                .code(EXIT_INPUT, || format!("parsing {}", p.display()))?;
            (parsed, Some(digest(p, &bytes)))
        }
        None => (Vec::new(), None),
    };

    let base: Box<dyn Embedder> = match config.embedding.kind {
        EmbedderKind::Deterministic => Box::new(TrigramEmbedder::new(config.embedding.dimension)),
        EmbedderKind::Remote => Box::new(
            RemoteEmbedder::new(config.remote_embedder_config()).code(EXIT_CONFIG, || "configuring embedder".into())?,
        ),
    };
    let cache = match &config.embedding.cache_path {
        Some(p) => EmbeddingCache::open(p).code(EXIT_OUTPUT, || format!("opening embedding cache {}", p.display()))?,
        None => EmbeddingCache::in_memory(),
    };
    let embedder = CachedEmbedder::new(base, &cache);

    let provenance = Provenance {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        generated: digest(generated_path, &generated_bytes),
        gold: digest(gold_path, &gold_bytes),
        failures: failures_digest,
        embedder: embedder.id(),
    };
    let evaluation = evaluate(&generated, &gold, &failures, &embedder, config, provenance).map_err(|e| Failure {
        code: e.embedding_error().map_or(EXIT_INTERNAL, embedding_failure),
        error: anyhow!(e).context("evaluating"),
    })?;

    let mut report =
        serde_json::to_string_pretty(&evaluation.report).code(EXIT_INTERNAL, || "serializing report".into())?;
    report.push('\n');
    let mut alignments = Vec::new();
    write_jsonl(&evaluation.records, &mut alignments).code(EXIT_INTERNAL, || "serializing alignments".into())?;
    let mut findings = Vec::new();
    write_jsonl(&evaluation.findings, &mut findings).code(EXIT_INTERNAL, || "serializing findings".into())?;
    write_output(&dir.join("alignments.jsonl"), &alignments)?;
    write_output(&dir.join("findings.jsonl"), &findings)?;
    write_output(&dir.join("report.json"), report.as_bytes())?;

    let r = &evaluation.report;
    say(
        out,
        format_args!(
            "joined {} keys ({} skipped), {} alignment records, {} findings; report written to {}",
            r.join_size,
            r.skipped_keys,
            evaluation.records.len(),
            evaluation.findings.len(),
            dir.join("report.json").display()
        ),
    )
}

fn report_path(eval: &Path) -> PathBuf {
    if eval.is_dir() {
        eval.join("report.json")
    } else {
        eval.to_path_buf()
    }
}

pub fn load_report(eval: &Path) -> anyhow::Result<EvaluationReport> {
    let path = report_path(eval);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_report(eval: &Path, format: TableFormat, dir: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let report = load_report(eval).code(EXIT_INPUT, || "loading evaluation report".into())?;
    let tables = render_tables(&report);
    let tables_dir = dir.join("tables");
    let mut written = Vec::new();
    match format {
        TableFormat::Json => {
            let path = tables_dir.join("tables.json");
            write_output(&path, tables_json(&tables).as_bytes())?;
            written.push(path);
        }
        TableFormat::Csv | TableFormat::Markdown => {
            for table in &tables {
                let (ext, text) = match format {
                    TableFormat::Csv => ("csv", table.to_csv()),
                    _ => ("md", table.to_markdown()),
                };
                let path = tables_dir.join(format!("{}.{ext}", table.name));
                write_output(&path, text.as_bytes())?;
                written.push(path);
            }
        }
    }
    say(
        out,
        format_args!("wrote {} file(s) under {}", written.len(), tables_dir.display()),
    )
}

fn cmd_errors(eval: &Path, category: ErrorCategory, limit: usize, out: &mut dyn Write) -> Result<(), Failure> {
    let report_file = report_path(eval);
    load_report(&report_file).code(EXIT_INPUT, || "loading evaluation report".into())?;
    let findings_path = report_file.with_file_name("findings.jsonl");
    let bytes = read_input(&findings_path)?;
    let findings: Vec<ErrorFinding> = read_jsonl(BufReader::new(bytes.as_slice()))
        .code(EXIT_INPUT, || format!("parsing {}", findings_path.display()))?;
    let selected: Vec<&ErrorFinding> = findings.iter().filter(|f| f.category == category).collect();
    let shown = selected.len().min(limit);
    say(
        out,
        format_args!("{category}: {} finding(s), showing {shown}", selected.len()),
    )?;
    for f in selected.into_iter().take(limit) {
        let pos = f.pos.map(|p| format!(" [{p}]")).unwrap_or_default();
        say(out, format_args!("{}{pos}: {}", f.lemma, f.evidence))?;
        if let Some(note) = &f.note {
            say(out, format_args!("    note: {note}"))?;
        }
        say(
            out,
            format_args!("    generated: {}", f.generated_definition.as_deref().unwrap_or("-")),
        )?;
        say(
            out,
            format_args!("    gold:      {}", f.gold_definition.as_deref().unwrap_or("-")),
        )?;
    }
    Ok(())
}

//! Whole-run evaluation and table rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::alignment::{align_dictionaries, rank_histogram, AlignmentError, AlignmentRecord};
use crate::config::Config;
use crate::embedding::{CachedEmbedder, Embedder, EmbeddingCache, EmbeddingError};
use crate::error_analysis::{classify_errors, ErrorCategory, ErrorFinding};
use crate::generation::GenerationFailure;
use crate::metrics::{
    circularity_rate, class_metrics, cosine_stats, length_stats, polysemy_confusion, ClassMetrics, ConfusionMatrix2x2,
    GoldFilter, LengthStats, ScoreField, SenseClass, StatsGroup, StatsSummary,
};
use crate::model::{vocabulary_join, Dictionary, PosCategory};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl EvaluateError {
    /// The embedding error behind this failure, if any.
    pub fn embedding_error(&self) -> Option<&EmbeddingError> {
        match self {
            EvaluateError::Embedding(e) | EvaluateError::Alignment(AlignmentError::Embedding(e)) => Some(e),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of_bytes(path: impl Into<String>, bytes: &[u8]) -> Self {
        InputDigest {
            path: path.into(),
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool_version: String,
    pub generated: InputDigest,
    pub gold: InputDigest,
    pub failures: Option<InputDigest>,
    pub embedder: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineTables {
    /// Best score; monosemous on both sides.
    pub monosemous_both: StatsGroup,
    /// Mean over gold senses; monosemous generated, polysemous gold.
    pub polysemous_gold: StatsGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthTable {
    pub gold: LengthStats,
    pub generated: LengthStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationReport {
    pub format_version: u32,
    pub generated_entries: usize,
    pub gold_entries: usize,
    pub join_size: usize,
    pub skipped_keys: usize,
    pub confusion: ConfusionMatrix2x2,
    pub metrics: BTreeMap<SenseClass, ClassMetrics>,
    pub cosine_tables: CosineTables,
    pub length_table: LengthTable,
    pub rank_histogram: BTreeMap<usize, usize>,
    pub error_summary: BTreeMap<ErrorCategory, usize>,
    pub circularity_rate: f64,
    pub config_snapshot: serde_json::Value,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvaluationReport,
    pub records: Vec<AlignmentRecord>,
    pub findings: Vec<ErrorFinding>,
}

/// Aligns, scores and classifies `generated` against `gold`. Every vector
/// is computed once and shared between alignment and error analysis.
pub fn evaluate<E: Embedder + ?Sized>(
    generated: &Dictionary,
    gold: &Dictionary,
    failures: &[GenerationFailure],
    embedder: &E,
    config: &Config,
    provenance: Provenance,
) -> Result<Evaluation, EvaluateError> {
    let cache = EmbeddingCache::in_memory();
    let embedder = CachedEmbedder::new(embedder, &cache);
    let keys = vocabulary_join(generated, gold);
    let alignment = align_dictionaries(generated, gold, &embedder, &keys, &config.alignment_options())?;
    let records = alignment.records;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.evaluation.threads)
        .build()
        .map_err(|e| EvaluateError::Pool(e.to_string()))?;
    let errors = pool.install(|| classify_errors(generated, gold, &records, failures, &embedder, &config.errors))?;

    let confusion = polysemy_confusion(generated, gold, &keys);
    let metrics = [SenseClass::Monosemy, SenseClass::Polysemy]
        .into_iter()
        .map(|c| (c, class_metrics(&confusion, c)))
        .collect();
    let report = EvaluationReport {
        format_version: REPORT_FORMAT_VERSION,
        generated_entries: generated.len(),
        gold_entries: gold.len(),
        join_size: keys.len(),
        skipped_keys: alignment.skipped.len(),
        confusion,
        metrics,
        cosine_tables: CosineTables {
            monosemous_both: cosine_stats(&records, ScoreField::BestScore, GoldFilter::GoldMonosemous),
            polysemous_gold: cosine_stats(&records, ScoreField::MeanOverGold, GoldFilter::GoldPolysemous),
        },
        length_table: LengthTable {
            gold: length_stats(gold),
            generated: length_stats(generated),
        },
        rank_histogram: rank_histogram(&records),
        error_summary: errors.summary,
        circularity_rate: circularity_rate(generated),
        config_snapshot: config.snapshot(),
        provenance,
    };
    Ok(Evaluation {
        report,
        records,
        findings: errors.findings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
    Json,
}

impl std::str::FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "md" => Ok(TableFormat::Markdown),
            "json" => Ok(TableFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv, md or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, title: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            title: title.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in std::iter::once(&self.header).chain(&self.rows) {
            let fields: Vec<String> = row.iter().map(|f| csv_field(f)).collect();
            out.push_str(&fields.join(","));
            out.push_str("\r\n");
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("### {}\n\n", self.title);
        let _ = writeln!(out, "| {} |", self.header.join(" | "));
        let _ = writeln!(out, "|{}", self.header.iter().map(|_| "---|").collect::<String>());
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.replace('|', "\\|")).collect();
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
        out
    }
}

fn csv_field(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

const POS_ROWS: [(Option<PosCategory>, &str); 5] = [
    (None, "All"),
    (Some(PosCategory::Noun), "Nouns"),
    (Some(PosCategory::Adjective), "Adjectives"),
    (Some(PosCategory::Verb), "Verbs"),
    (Some(PosCategory::Adverb), "Adverbs"),
];

fn pos_rows(groups: &[&StatsGroup]) -> Vec<(Option<PosCategory>, &'static str)> {
    let mut rows = POS_ROWS.to_vec();
    if groups.iter().any(|g| g.by_category.contains_key(&PosCategory::Other)) {
        rows.push((Some(PosCategory::Other), "Other"));
    }
    rows
}

fn fixed(value: f64, decimals: usize) -> String {
    format!("{value:.decimals$}")
}

fn stat(summary: Option<&StatsSummary>, pick: fn(&StatsSummary) -> f64, decimals: usize) -> String {
    summary.map_or_else(|| "n/a".to_string(), |s| fixed(pick(s), decimals))
}

fn cosine_table(name: &str, title: &str, group: &StatsGroup) -> Table {
    let mut table = Table::new(name, title, &["POS", "Count", "Mean", "Std Dev"]);
    for (category, label) in pos_rows(&[group]) {
        let s = group.get(category);
        table.rows.push(vec![
            label.to_string(),
            s.map_or(0, |s| s.count).to_string(),
            stat(s, |s| s.mean, 4),
            stat(s, |s| s.std_dev, 4),
        ]);
    }
    table
}

/// The `table1` to `table5` tables and the `figure1` rank histogram, in that order.
pub fn render_tables(report: &EvaluationReport) -> Vec<Table> {
    let m = &report.confusion;
    let mut t1 = Table::new(
        "table1",
        "Confusion matrix (rows: gold, columns: generated)",
        &["Actual / Predicted", "Monosemy", "Polysemy", "Total"],
    );
    t1.rows = vec![
        vec![
            "Monosemy".into(),
            m.mono_mono.to_string(),
            m.mono_poly.to_string(),
            m.actual_mono().to_string(),
        ],
        vec![
            "Polysemy".into(),
            m.poly_mono.to_string(),
            m.poly_poly.to_string(),
            m.actual_poly().to_string(),
        ],
        vec![
            "Total".into(),
            m.predicted_mono().to_string(),
            m.predicted_poly().to_string(),
            m.total().to_string(),
        ],
    ];

    let mut t2 = Table::new(
        "table2",
        "Monosemy and polysemy detection",
        &["Class", "Precision", "Recall", "F1"],
    );
    for (class, label) in [(SenseClass::Monosemy, "Monosemy"), (SenseClass::Polysemy, "Polysemy")] {
        let c = report
            .metrics
            .get(&class)
            .copied()
            .unwrap_or_else(|| class_metrics(m, class));
        t2.rows.push(vec![
            label.into(),
            fixed(c.precision, 3),
            fixed(c.recall, 3),
            fixed(c.f1, 3),
        ]);
    }

    let t3 = cosine_table(
        "table3",
        "Best-sense cosine similarity, monosemous in both dictionaries",
        &report.cosine_tables.monosemous_both,
    );

    let lengths = &report.length_table;
    let mut t4 = Table::new(
        "table4",
        "Definition length per sense",
        &[
            "POS",
            "Measure",
            "Gold words",
            "Gold characters",
            "Generated words",
            "Generated characters",
        ],
    );
    let groups = [
        &lengths.gold.words,
        &lengths.gold.characters,
        &lengths.generated.words,
        &lengths.generated.characters,
    ];
    for (category, label) in pos_rows(&groups) {
        for (measure, pick) in [
            ("Mean", (|s: &StatsSummary| s.mean) as fn(&StatsSummary) -> f64),
            ("Std Dev", |s| s.std_dev),
        ] {
            let mut row = vec![label.to_string(), measure.to_string()];
            row.extend(groups.iter().map(|g| stat(g.get(category), pick, 2)));
            t4.rows.push(row);
        }
    }

    let t5 = cosine_table(
        "table5",
        "Mean cosine over gold senses, monosemous generated and polysemous gold",
        &report.cosine_tables.polysemous_gold,
    );

    let mut fig = Table::new(
        "figure1",
        "Position of the best-matching gold sense",
        &["best_gold_index", "count"],
    );
    fig.rows = report
        .rank_histogram
        .iter()
        .map(|(i, n)| vec![i.to_string(), n.to_string()])
        .collect();

    vec![t1, t2, t3, t4, t5, fig]
}

/// All tables as one JSON document keyed by table name.
pub fn tables_json(tables: &[Table]) -> String {
    let map: BTreeMap<&str, &Table> = tables.iter().map(|t| (t.name.as_str(), t)).collect();
    let mut text = serde_json::to_string_pretty(&map).expect("tables serialize");
    text.push('\n');
    text
}

//! Parser for the line-oriented reply grammar:
//!
//! ```text
//! lemma: pos-label: definition. Ejemplo: sentence.
//! 2. second definition. Ejemplo: sentence.
//! ```
//!
//! Every lemma of the batch ends up either as an entry or as a failure.

use super::{FailureReason, GenerationFailure};
use crate::ingest::LemmaListRecord;
use crate::model::{normalize_lemma, DictionaryEntry, PosCategory, PosTag, SenseDraft};

pub const DEFAULT_REFUSAL_PATTERNS: &[&str] = &[
    "desconocido",
    "no tengo información",
    "error tipográfico",
    "palabra inexistente",
    "sin definición conocida",
];

/// Case-insensitive substring patterns marking a definition as a refusal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefusalPatterns {
    patterns: Vec<String>,
}

impl Default for RefusalPatterns {
    fn default() -> Self {
        RefusalPatterns::new(DEFAULT_REFUSAL_PATTERNS.iter().copied())
    }
}

impl RefusalPatterns {
    pub fn new<S: AsRef<str>>(patterns: impl IntoIterator<Item = S>) -> Self {
        RefusalPatterns {
            patterns: patterns
                .into_iter()
                .map(|p| p.as_ref().trim().to_lowercase())
                .filter(|p| !p.is_empty())
                .collect(),
        }
    }

    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }

    /// Empty definitions always count as refusals.
    pub fn matches(&self, definition: &str) -> bool {
        self.matching(definition).is_some()
    }

    pub fn matching(&self, definition: &str) -> Option<&str> {
        let trimmed = definition.trim();
        if trimmed.is_empty() {
            return Some("");
        }
        let lowered = trimmed.to_lowercase();
        self.patterns
            .iter()
            .find(|p| lowered.contains(p.as_str()))
            .map(String::as_str)
    }
}

pub fn detect_refusal(definition: &str) -> bool {
    RefusalPatterns::default().matches(definition)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedBatch {
    pub entries: Vec<DictionaryEntry>,
    pub failures: Vec<GenerationFailure>,
}

struct Header<'a> {
    lemma: String,
    label: Option<&'a str>,
    body: &'a str,
}

#[derive(Default)]
struct Slot {
    matched: bool,
    label: Option<String>,
    senses: Vec<SenseDraft>,
}

fn strip_decoration(line: &str) -> &str {
    let line = line.trim();
    let line = line
        .strip_prefix("- ")
        .or_else(|| line.strip_prefix("* "))
        .or_else(|| line.strip_prefix("• "))
        .unwrap_or(line);
    line.trim()
}

/// `2. text` or `2) text` → `text`.
fn numbered_body(line: &str) -> Option<&str> {
    let digits = line.find(|c: char| !c.is_ascii_digit())?;
    if digits == 0 {
        return None;
    }
    let rest = &line[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    Some(rest.trim())
}

fn looks_like_label(text: &str) -> bool {
    let text = text.trim();
    !text.is_empty()
        && text.split_whitespace().count() <= 4
        && !text.contains('.')
        && !text.eq_ignore_ascii_case("ejemplo")
}

fn parse_header(line: &str) -> Option<Header<'_>> {
    let (lemma_part, rest) = line.split_once(':')?;
    let lemma = normalize_lemma(lemma_part.trim_matches(|c: char| c == '*' || c.is_whitespace())).ok()?;
    if let Some((label, body)) = rest.split_once(':') {
        if looks_like_label(label) {
            return Some(Header {
                lemma,
                label: Some(label.trim()),
                body: body.trim(),
            });
        }
    }
    let rest = rest.trim();
    // "Verbo. Definición." style, without the second colon.
    if let Some((first, body)) = rest.split_once(". ") {
        if looks_like_label(first) && PosTag::parse(first).category() != PosCategory::Other {
            return Some(Header {
                lemma,
                label: Some(first),
                body: body.trim(),
            });
        }
    }
    Some(Header {
        lemma,
        label: None,
        body: rest,
    })
}

const EXAMPLE_MARKERS: [&str; 3] = ["Ejemplo:", "ejemplo:", "EJEMPLO:"];

fn example_split(body: &str) -> Option<(&str, &str)> {
    EXAMPLE_MARKERS
        .iter()
        .filter_map(|m| body.find(m).map(|at| (at, m.len())))
        .min()
        .map(|(at, len)| (&body[..at], &body[at + len..]))
}

fn clean_example(text: &str) -> Option<String> {
    let text = text.trim().trim_matches(|c: char| c == '*' || c == '_').trim();
    (!text.is_empty()).then(|| text.to_string())
}

fn sense_from_body(body: &str) -> SenseDraft {
    let body = numbered_body(body).unwrap_or(body);
    match example_split(body) {
        Some((definition, example)) => SenseDraft {
            definition: definition.trim().to_string(),
            example: clean_example(example),
        },
        None => SenseDraft::definition_only(body.trim()),
    }
}

fn effective_category(record: &LemmaListRecord, slot: &Slot) -> Option<PosCategory> {
    record
        .pos
        .as_ref()
        .map(PosTag::category)
        .or_else(|| slot.label.as_deref().map(|l| PosTag::parse(l).category()))
}

fn match_slot(batch: &[LemmaListRecord], slots: &[Slot], header: &Header<'_>) -> Option<usize> {
    let reply_category = header.label.map(|l| PosTag::parse(l).category());
    let candidates: Vec<usize> = (0..batch.len()).filter(|&i| batch[i].lemma == header.lemma).collect();
    let first = |pred: &dyn Fn(usize) -> bool| candidates.iter().copied().find(|&i| pred(i));
    first(&|i| {
        !slots[i].matched && reply_category.is_some() && batch[i].pos.as_ref().map(PosTag::category) == reply_category
    })
    .or_else(|| first(&|i| !slots[i].matched && batch[i].pos.is_none()))
    .or_else(|| {
        first(&|i| {
            slots[i].matched && (reply_category.is_none() || effective_category(&batch[i], &slots[i]) == reply_category)
        })
    })
    .or_else(|| first(&|i| !slots[i].matched))
    .or_else(|| candidates.first().copied())
}

/// Splits a raw reply into entries and failures for `batch`.
///
/// Lemmas missing from the reply become `parse_error` failures. Senses whose
/// definition matches a refusal pattern are dropped; a lemma left without
/// senses becomes a `refusal` failure.
pub fn parse_model_response(raw: &str, batch: &[LemmaListRecord], refusals: &RefusalPatterns) -> ParsedBatch {
    let mut slots: Vec<Slot> = batch.iter().map(|_| Slot::default()).collect();
    let mut current: Option<usize> = None;

    for line in raw.lines() {
        let line = strip_decoration(line);
        if line.is_empty() {
            continue;
        }
        if let Some(body) = numbered_body(line) {
            if let Some(i) = current {
                slots[i].senses.push(sense_from_body(body));
            }
            continue;
        }
        if let Some((before, example)) = example_split(line) {
            if before.trim().is_empty() {
                if let Some(sense) = current.and_then(|i| slots[i].senses.last_mut()) {
                    if sense.example.is_none() {
                        sense.example = clean_example(example);
                    }
                }
                continue;
            }
        }
        let Some(header) = parse_header(line) else {
            continue;
        };
        let Some(i) = match_slot(batch, &slots, &header) else {
            continue;
        };
        let slot = &mut slots[i];
        if !slot.matched {
            slot.matched = true;
            slot.label = header.label.map(str::to_string);
        }
        slot.senses.push(sense_from_body(header.body));
        current = Some(i);
    }

    let mut parsed = ParsedBatch::default();
    for (record, slot) in batch.iter().zip(slots) {
        let failure = |reason, detail: String| GenerationFailure {
            lemma: record.lemma.clone(),
            pos: record.pos.clone(),
            reason,
            detail,
        };
        if !slot.matched {
            parsed.failures.push(failure(
                FailureReason::ParseError,
                "lemma missing from model reply".into(),
            ));
            continue;
        }
        let (refused, kept): (Vec<SenseDraft>, Vec<SenseDraft>) =
            slot.senses.into_iter().partition(|s| refusals.matches(&s.definition));
        if kept.is_empty() {
            let detail = refused
                .first()
                .map(|s| s.definition.clone())
                .filter(|d| !d.is_empty())
                .unwrap_or_else(|| "empty definition".into());
            parsed.failures.push(failure(FailureReason::Refusal, detail));
            continue;
        }
        let pos = record
            .pos
            .clone()
            .unwrap_or_else(|| PosTag::parse(slot.label.as_deref().unwrap_or("")));
        match DictionaryEntry::new(&record.lemma, pos, kept) {
            Ok(entry) => parsed.entries.push(entry),
            Err(e) => parsed.failures.push(failure(FailureReason::ParseError, e.to_string())),
        }
    }
    parsed
}

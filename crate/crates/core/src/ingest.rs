//! Readers and writers for the on-disk artifacts: lemma lists, dictionaries,
//! failure logs and the generic record-per-line files used for alignments and
//! findings.
//!
//! Dictionary and failure files are JSON Lines. Writers are byte
//! deterministic and every parser reports problems with a 1-based line
//! number.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generation::GenerationFailure;
use crate::model::{normalize_lemma, Dictionary, DictionaryEntry, ModelError, PosCategory, PosTag, SenseDraft};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: invalid field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: input is not valid UTF-8")]
    Encoding { line: usize },
    #[error("line {line}: duplicate key ({lemma}, {category})")]
    DuplicateKey {
        line: usize,
        lemma: String,
        category: PosCategory,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl IngestError {
    fn parse(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        IngestError::Parse {
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Iterates the lines of a UTF-8 stream as `(line_number, text)` with the
/// line terminator removed.
fn lines<R: BufRead>(mut reader: R) -> impl Iterator<Item = Result<(usize, String), IngestError>> {
    let mut number = 0;
    let mut buf = Vec::new();
    std::iter::from_fn(move || {
        buf.clear();
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => None,
            Ok(_) => {
                number += 1;
                if buf.last() == Some(&b'\n') {
                    buf.pop();
                    if buf.last() == Some(&b'\r') {
                        buf.pop();
                    }
                }
                Some(match String::from_utf8(buf.clone()) {
                    Ok(text) => Ok((number, text)),
                    Err(_) => Err(IngestError::Encoding { line: number }),
                })
            }
            Err(e) => Some(Err(e.into())),
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaListRecord {
    pub lemma: String,
    pub pos: Option<PosTag>,
}

impl LemmaListRecord {
    pub fn new(lemma: &str, pos: Option<PosTag>) -> Result<Self, ModelError> {
        Ok(LemmaListRecord {
            lemma: normalize_lemma(lemma)?,
            pos,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LemmaList {
    pub records: Vec<LemmaListRecord>,
    /// Records dropped because an identical (lemma, category) came earlier.
    pub duplicates: usize,
    /// Blank and `#` comment lines.
    pub skipped: usize,
}

/// Parses `lemma` or `lemma<TAB>pos-label` lines, keeping file order and the
/// first occurrence of each (lemma, category).
pub fn parse_lemma_list<R: BufRead>(reader: R) -> Result<LemmaList, IngestError> {
    let mut list = LemmaList::default();
    let mut seen: HashSet<(String, Option<PosCategory>)> = HashSet::new();
    for line in lines(reader) {
        let (number, text) = line?;
        if text.trim().is_empty() || text.starts_with('#') {
            list.skipped += 1;
            continue;
        }
        let mut fields = text.split('\t');
        let lemma_field = fields.next().unwrap_or_default();
        let pos_field = fields.next();
        if fields.next().is_some() {
            return Err(IngestError::parse(number, "line", "more than one TAB separator"));
        }
        let lemma = normalize_lemma(lemma_field).map_err(|e| IngestError::parse(number, "lemma", e.to_string()))?;
        let pos = pos_field
            .map(str::trim)
            .filter(|label| !label.is_empty())
            .map(PosTag::parse);
        if !seen.insert((lemma.clone(), pos.as_ref().map(PosTag::category))) {
            list.duplicates += 1;
            continue;
        }
        list.records.push(LemmaListRecord { lemma, pos });
    }
    Ok(list)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SenseRecord {
    definition: String,
    #[serde(default)]
    example: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryRecord {
    lemma: String,
    pos: String,
    senses: Vec<SenseRecord>,
}

fn decode_line<T: DeserializeOwned>(number: usize, text: &str) -> Result<T, IngestError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = match e.path().to_string() {
            p if p == "?" || p == "." || p.is_empty() => "record".to_string(),
            p => p,
        };
        IngestError::parse(number, path, e.into_inner().to_string())
    })?;
    de.end()
        .map_err(|e| IngestError::parse(number, "record", e.to_string()))?;
    Ok(value)
}

fn entry_from_record(number: usize, record: EntryRecord) -> Result<DictionaryEntry, IngestError> {
    let drafts: Vec<SenseDraft> = record
        .senses
        .into_iter()
        .map(|s| SenseDraft {
            definition: s.definition,
            example: s.example,
        })
        .collect();
    DictionaryEntry::new(&record.lemma, PosTag::parse(&record.pos), drafts).map_err(|e| {
        let field = match &e {
            ModelError::EmptyLemma => "lemma".to_string(),
            ModelError::NoSenses { .. } => "senses".to_string(),
            ModelError::EmptyDefinition { ordinal } => format!("senses[{}].definition", ordinal - 1),
            ModelError::DuplicateKey { .. } => "lemma".to_string(),
        };
        IngestError::parse(number, field, e.to_string())
    })
}

/// Reads a dictionary file. Blank lines are ignored.
pub fn parse_dictionary<R: BufRead>(name: &str, reader: R) -> Result<Dictionary, IngestError> {
    let mut dictionary = Dictionary::new(name);
    for line in lines(reader) {
        let (number, text) = line?;
        if text.trim().is_empty() {
            continue;
        }
        let record: EntryRecord = decode_line(number, &text)?;
        let entry = entry_from_record(number, record)?;
        if let Err(ModelError::DuplicateKey { lemma, category }) = dictionary.insert(entry) {
            return Err(IngestError::DuplicateKey {
                line: number,
                lemma,
                category,
            });
        }
    }
    Ok(dictionary)
}

/// Writes one entry per line in sorted (lemma, category) order and returns
/// the number of bytes written.
pub fn write_dictionary<W: Write>(dictionary: &Dictionary, mut writer: W) -> Result<u64, IngestError> {
    let mut written = 0u64;
    for entry in dictionary.entries() {
        let record = EntryRecord {
            lemma: entry.lemma().to_string(),
            pos: entry.pos().raw_label().to_string(),
            senses: entry
                .senses()
                .iter()
                .map(|s| SenseRecord {
                    definition: s.definition().to_string(),
                    example: s.example().map(str::to_string),
                })
                .collect(),
        };
        written += write_line(&mut writer, &record)?;
    }
    writer.flush()?;
    Ok(written)
}

fn write_line<W: Write, T: Serialize>(writer: &mut W, record: &T) -> Result<u64, IngestError> {
    let mut line = serde_json::to_string(record).map_err(io::Error::from)?;
    line.push('\n');
    writer.write_all(line.as_bytes())?;
    Ok(line.len() as u64)
}

pub fn write_failures<W: Write>(failures: &[GenerationFailure], writer: W) -> Result<u64, IngestError> {
    write_jsonl(failures, writer)
}

pub fn parse_failures<R: BufRead>(reader: R) -> Result<Vec<GenerationFailure>, IngestError> {
    let mut failures = Vec::new();
    for line in lines(reader) {
        let (number, text) = line?;
        if text.trim().is_empty() {
            continue;
        }
        let mut failure: GenerationFailure = decode_line(number, &text)?;
        failure.lemma =
            normalize_lemma(&failure.lemma).map_err(|e| IngestError::parse(number, "lemma", e.to_string()))?;
        failures.push(failure);
    }
    Ok(failures)
}

/// Writes any serializable records one JSON object per line.
pub fn write_jsonl<W: Write, T: Serialize>(records: &[T], mut writer: W) -> Result<u64, IngestError> {
    let mut written = 0;
    for record in records {
        written += write_line(&mut writer, record)?;
    }
    writer.flush()?;
    Ok(written)
}

pub fn read_jsonl<R: BufRead, T: DeserializeOwned>(reader: R) -> Result<Vec<T>, IngestError> {
    let mut records = Vec::new();
    for line in lines(reader) {
        let (number, text) = line?;
        if text.trim().is_empty() {
            continue;
        }
        records.push(decode_line(number, &text)?);
    }
    Ok(records)
}

//! Sense alignment: score a generated definition against every gold sense of
//! the same (lemma, category) key.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine_similarity, Embedder, EmbeddingError, EmbeddingVector, SimilarityScore};
use crate::model::{Dictionary, DictionaryEntry, EntryKey, PosCategory, Sense};

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("cannot align {generated} against {gold}: keys differ")]
    KeyMismatch { generated: EntryKey, gold: EntryKey },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("alignment thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentRecord {
    pub lemma: String,
    pub category: PosCategory,
    pub gen_sense_count: usize,
    pub gold_sense_count: usize,
    /// 1-based position of the best-matching gold sense.
    pub best_gold_index: usize,
    pub best_score: SimilarityScore,
    pub mean_over_gold: SimilarityScore,
    pub per_gold_scores: Vec<SimilarityScore>,
    /// All generated senses against all gold senses (rows are generated
    /// senses). Only present for polysemous generated entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sense_matrix: Option<Vec<Vec<SimilarityScore>>>,
}

impl AlignmentRecord {
    pub fn key(&self) -> EntryKey {
        EntryKey::new(self.lemma.clone(), self.category)
    }

    pub fn gen_monosemous(&self) -> bool {
        self.gen_sense_count == 1
    }

    pub fn gold_monosemous(&self) -> bool {
        self.gold_sense_count == 1
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentOptions {
    /// Append the usage example to each definition before embedding.
    pub include_examples: bool,
    /// Worker threads; 0 lets the pool pick.
    pub threads: usize,
}

pub fn sense_text(sense: &Sense, include_examples: bool) -> String {
    match (include_examples, sense.example()) {
        (true, Some(example)) => format!("{} {}", sense.definition(), example),
        _ => sense.definition().to_string(),
    }
}

/// (per-gold scores, 1-based best index, best score, mean). Ties go to the
/// lowest index; the mean is summed in gold order.
pub fn score_against_gold(
    generated: &EmbeddingVector,
    gold: &[EmbeddingVector],
) -> Result<(Vec<SimilarityScore>, usize, SimilarityScore, SimilarityScore), EmbeddingError> {
    let scores = gold
        .iter()
        .map(|g| cosine_similarity(generated, g))
        .collect::<Result<Vec<_>, _>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.value() > scores[best].value() {
            best = i;
        }
    }
    let best_score = *scores
        .get(best)
        .ok_or(EmbeddingError::Dimension { left: 0, right: 0 })?;
    let mut sum = 0.0;
    for s in &scores {
        sum += s.value();
    }
    let mean = SimilarityScore::new(sum / scores.len() as f64);
    Ok((scores, best + 1, best_score, mean))
}

fn build_record(
    generated: &DictionaryEntry,
    gold: &DictionaryEntry,
    gen_vectors: &[EmbeddingVector],
    gold_vectors: &[EmbeddingVector],
) -> Result<AlignmentRecord, AlignmentError> {
    if generated.key() != gold.key() {
        return Err(AlignmentError::KeyMismatch {
            generated: generated.key(),
            gold: gold.key(),
        });
    }
    let (per_gold_scores, best_gold_index, best_score, mean_over_gold) =
        score_against_gold(&gen_vectors[0], gold_vectors)?;
    let sense_matrix = if gen_vectors.len() > 1 {
        let rows = gen_vectors
            .iter()
            .map(|g| {
                gold_vectors
                    .iter()
                    .map(|o| cosine_similarity(g, o))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Some(rows)
    } else {
        None
    };
    Ok(AlignmentRecord {
        lemma: generated.lemma().to_string(),
        category: generated.category(),
        gen_sense_count: generated.senses().len(),
        gold_sense_count: gold.senses().len(),
        best_gold_index,
        best_score,
        mean_over_gold,
        per_gold_scores,
        sense_matrix,
    })
}

/// Aligns one generated entry with its gold counterpart. Generated sense 1
/// is the one scored; further generated senses only feed `sense_matrix`.
pub fn align_entry<E: Embedder + ?Sized>(
    generated: &DictionaryEntry,
    gold: &DictionaryEntry,
    embedder: &E,
    options: &AlignmentOptions,
) -> Result<AlignmentRecord, AlignmentError> {
    if generated.key() != gold.key() {
        return Err(AlignmentError::KeyMismatch {
            generated: generated.key(),
            gold: gold.key(),
        });
    }
    let gen_texts: Vec<String> = generated
        .senses()
        .iter()
        .map(|s| sense_text(s, options.include_examples))
        .collect();
    let gold_texts: Vec<String> = gold
        .senses()
        .iter()
        .map(|s| sense_text(s, options.include_examples))
        .collect();
    let gen_refs: Vec<&str> = gen_texts.iter().map(String::as_str).collect();
    let gold_refs: Vec<&str> = gold_texts.iter().map(String::as_str).collect();
    let gen_vectors = embedder.embed_batch(&gen_refs)?;
    let gold_vectors = embedder.embed_batch(&gold_refs)?;
    build_record(generated, gold, &gen_vectors, &gold_vectors)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentOutcome {
    pub records: Vec<AlignmentRecord>,
    /// Join keys absent from one of the dictionaries.
    pub skipped: Vec<EntryKey>,
}

const EMBED_CHUNK: usize = 256;

/// Aligns every key, returning records in sorted key order. Each distinct
/// sense text is embedded once.
pub fn align_dictionaries<E: Embedder + ?Sized>(
    generated: &Dictionary,
    gold: &Dictionary,
    embedder: &E,
    keys: &[EntryKey],
    options: &AlignmentOptions,
) -> Result<AlignmentOutcome, AlignmentError> {
    let mut sorted: Vec<&EntryKey> = keys.iter().collect();
    sorted.sort();
    sorted.dedup();

    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for key in sorted {
        match (generated.get(key), gold.get(key)) {
            (Some(g), Some(o)) => pairs.push((g, o)),
            _ => {
                log::warn!("join key {key} is missing from one dictionary; skipped");
                skipped.push(key.clone());
            }
        }
    }

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut texts: Vec<String> = Vec::new();
    for (g, o) in &pairs {
        for sense in g.senses().iter().chain(o.senses()) {
            let text = sense_text(sense, options.include_examples);
            if !index.contains_key(&text) {
                index.insert(text.clone(), texts.len());
                texts.push(text);
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads)
        .build()
        .map_err(|e| AlignmentError::Pool(e.to_string()))?;

    let records = pool.install(|| -> Result<Vec<AlignmentRecord>, AlignmentError> {
        let chunks = texts
            .par_chunks(EMBED_CHUNK)
            .map(|chunk| {
                let refs: Vec<&str> = chunk.iter().map(String::as_str).collect();
                embedder.embed_batch(&refs)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let vectors: Vec<EmbeddingVector> = chunks.into_iter().flatten().collect();
        if vectors.len() != texts.len() {
            return Err(
                EmbeddingError::Protocol(format!("expected {} vectors, got {}", texts.len(), vectors.len())).into(),
            );
        }
        let lookup = |entry: &DictionaryEntry| -> Vec<EmbeddingVector> {
            entry
                .senses()
                .iter()
                .map(|s| vectors[index[&sense_text(s, options.include_examples)]].clone())
                .collect()
        };
        pairs
            .par_iter()
            .map(|(g, o)| build_record(g, o, &lookup(g), &lookup(o)))
            .collect()
    })?;

    Ok(AlignmentOutcome { records, skipped })
}

/// Figure-1 data: how often each gold position holds the best match, over
/// records with a monosemous generated side and a polysemous gold side.
pub fn rank_histogram(records: &[AlignmentRecord]) -> BTreeMap<usize, usize> {
    let mut histogram = BTreeMap::new();
    for record in records.iter().filter(|r| r.gen_monosemous() && r.gold_sense_count > 1) {
        *histogram.entry(record.best_gold_index).or_insert(0) += 1;
    }
    histogram
}

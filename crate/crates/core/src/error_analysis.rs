//! Heuristic error taxonomy for generated entries.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::alignment::AlignmentRecord;
use crate::embedding::{cosine_similarity, normalize_text, Embedder, EmbeddingError};
use crate::generation::{FailureReason, GenerationFailure, RefusalPatterns, DEFAULT_REFUSAL_PATTERNS};
use crate::metrics::word_count;
use crate::model::{Dictionary, DictionaryEntry, PosCategory};

pub const DEFAULT_PROPER_NOUN_PATTERNS: &[&str] = &["nombre propio", "en la mitología"];

pub const SHORT_GOLD_NOTE: &str = "short-gold, low confidence";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorAnalysisConfig {
    /// Records with a best score strictly below this are candidates.
    pub hallucination_threshold: f64,
    pub overcorrection_max_edit_distance: usize,
    pub overcorrection_similarity_floor: f64,
    pub fabricated_polysemy_similarity: f64,
    /// Gold definitions with at most this many words mark a candidate as
    /// low confidence.
    pub short_gold_max_words: usize,
    pub refusal_patterns: Vec<String>,
    pub proper_noun_patterns: Vec<String>,
}

impl Default for ErrorAnalysisConfig {
    fn default() -> Self {
        ErrorAnalysisConfig {
            hallucination_threshold: 0.1,
            overcorrection_max_edit_distance: 2,
            overcorrection_similarity_floor: 0.5,
            fabricated_polysemy_similarity: 0.9,
            short_gold_max_words: 2,
            refusal_patterns: DEFAULT_REFUSAL_PATTERNS.iter().map(|s| s.to_string()).collect(),
            proper_noun_patterns: DEFAULT_PROPER_NOUN_PATTERNS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ErrorAnalysisConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("hallucination_threshold", self.hallucination_threshold),
            ("overcorrection_similarity_floor", self.overcorrection_similarity_floor),
            ("fabricated_polysemy_similarity", self.fabricated_polysemy_similarity),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    HallucinationCandidate,
    Circularity,
    ProperNounAsCommon,
    FabricatedPolysemy,
    Overcorrection,
    Refusal,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 6] = [
        ErrorCategory::HallucinationCandidate,
        ErrorCategory::Circularity,
        ErrorCategory::ProperNounAsCommon,
        ErrorCategory::FabricatedPolysemy,
        ErrorCategory::Overcorrection,
        ErrorCategory::Refusal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::HallucinationCandidate => "hallucination_candidate",
            ErrorCategory::Circularity => "circularity",
            ErrorCategory::ProperNounAsCommon => "proper_noun_as_common",
            ErrorCategory::FabricatedPolysemy => "fabricated_polysemy",
            ErrorCategory::Overcorrection => "overcorrection",
            ErrorCategory::Refusal => "refusal",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown error category `{0}`")]
pub struct UnknownCategory(pub String);

impl FromStr for ErrorCategory {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorFinding {
    pub lemma: String,
    /// Absent for refusals whose lemma list carried no POS.
    pub pos: Option<PosCategory>,
    pub category: ErrorCategory,
    pub evidence: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_definition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_definition: Option<String>,
}

impl ErrorFinding {
    fn new(lemma: &str, pos: Option<PosCategory>, category: ErrorCategory, evidence: String) -> Self {
        ErrorFinding {
            lemma: lemma.to_string(),
            pos,
            category,
            evidence,
            score: None,
            neighbor: None,
            note: None,
            generated_definition: None,
            gold_definition: None,
        }
    }
}

fn finding_sort_key(f: &ErrorFinding) -> (&str, Option<PosCategory>, ErrorCategory, &str) {
    (&f.lemma, f.pos, f.category, &f.evidence)
}

/// Every record with `best_score < threshold`.
pub fn hallucination_candidates(records: &[AlignmentRecord], config: &ErrorAnalysisConfig) -> Vec<ErrorFinding> {
    records
        .iter()
        .filter(|r| r.best_score.value() < config.hallucination_threshold)
        .map(|r| {
            let mut f = ErrorFinding::new(
                &r.lemma,
                Some(r.category),
                ErrorCategory::HallucinationCandidate,
                format!(
                    "best cosine {:.4} against gold sense {} (threshold {})",
                    r.best_score.value(),
                    r.best_gold_index,
                    config.hallucination_threshold
                ),
            );
            f.score = Some(r.best_score.value());
            f
        })
        .collect()
}

fn fold(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    caseless::default_case_fold_str(&nfc).nfc().collect()
}

/// Whole-word, case-insensitive occurrence of `needle` in `haystack`.
/// Accents are significant.
fn contains_word(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let hay = fold(haystack);
    let needle = fold(needle);
    hay.match_indices(&needle).any(|(start, m)| {
        let before = hay[..start].chars().next_back();
        let after = hay[start + m.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}

/// True when the entry's lemma appears as a word in one of its definitions.
pub fn detect_circularity(entry: &DictionaryEntry) -> bool {
    entry
        .senses()
        .iter()
        .any(|s| contains_word(s.definition(), entry.lemma()))
}

/// The first pattern found (case-insensitively) in any definition.
pub fn detect_proper_noun_definition<'p>(entry: &DictionaryEntry, patterns: &'p [String]) -> Option<(&'p str, usize)> {
    for sense in entry.senses() {
        let def = fold(sense.definition());
        for p in patterns {
            if !p.trim().is_empty() && def.contains(&fold(p)) {
                return Some((p.as_str(), sense.ordinal()));
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub enum FabricatedPolysemy {
    /// The entry has a single sense.
    NotApplicable,
    Distinct,
    Fabricated {
        /// 1-based sense ordinals.
        first: usize,
        second: usize,
        /// `None` when the two definitions are identical after normalization.
        score: Option<f64>,
    },
}

/// Flags polysemous entries with two senses that are the same text or
/// embed closer than the configured similarity. The first offending pair
/// in (i, j) order is reported.
pub fn detect_fabricated_polysemy<E: Embedder + ?Sized>(
    entry: &DictionaryEntry,
    embedder: &E,
    config: &ErrorAnalysisConfig,
) -> Result<FabricatedPolysemy, EmbeddingError> {
    let senses = entry.senses();
    if senses.len() < 2 {
        return Ok(FabricatedPolysemy::NotApplicable);
    }
    let normalized: Vec<String> = senses.iter().map(|s| normalize_text(s.definition())).collect();
    for i in 0..senses.len() {
        for j in i + 1..senses.len() {
            if normalized[i] == normalized[j] {
                return Ok(FabricatedPolysemy::Fabricated {
                    first: i + 1,
                    second: j + 1,
                    score: None,
                });
            }
        }
    }
    let texts: Vec<&str> = senses.iter().map(|s| s.definition()).collect();
    let vectors = embedder.embed_batch(&texts)?;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            let score = cosine_similarity(&vectors[i], &vectors[j])?.value();
            if score >= config.fabricated_polysemy_similarity {
                return Ok(FabricatedPolysemy::Fabricated {
                    first: i + 1,
                    second: j + 1,
                    score: Some(score),
                });
            }
        }
    }
    Ok(FabricatedPolysemy::Distinct)
}

/// Levenshtein distance over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Gold lemmas bucketed by length in chars, for bounded edit-distance search.
#[derive(Debug, Clone, Default)]
pub struct GoldNeighborIndex {
    buckets: BTreeMap<usize, Vec<String>>,
}

impl GoldNeighborIndex {
    pub fn build(gold: &Dictionary) -> Self {
        let mut buckets: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for lemma in gold.by_lemma().into_keys() {
            buckets
                .entry(lemma.chars().count())
                .or_default()
                .push(lemma.to_string());
        }
        GoldNeighborIndex { buckets }
    }

    /// Other lemmas within `max_distance`, ordered by (distance, lemma).
    pub fn neighbors(&self, lemma: &str, max_distance: usize) -> Vec<(String, usize)> {
        let len = lemma.chars().count();
        let mut out: Vec<(String, usize)> = self
            .buckets
            .range(len.saturating_sub(max_distance)..=len + max_distance)
            .flat_map(|(_, lemmas)| lemmas)
            .filter(|other| other.as_str() != lemma)
            .filter_map(|other| {
                let d = edit_distance(lemma, other);
                (d <= max_distance).then(|| (other.clone(), d))
            })
            .collect();
        out.sort_by(|a, b| (a.1, &a.0).cmp(&(b.1, &b.0)));
        out
    }
}

/// Looks for a differently spelled gold lemma whose definition matches the
/// generated one. The best neighbor (highest cosine, then smaller distance,
/// then lemma order) is returned.
pub fn detect_overcorrection<E: Embedder + ?Sized>(
    entry: &DictionaryEntry,
    gold: &Dictionary,
    index: &GoldNeighborIndex,
    embedder: &E,
    config: &ErrorAnalysisConfig,
) -> Result<Option<ErrorFinding>, EmbeddingError> {
    let neighbors = index.neighbors(entry.lemma(), config.overcorrection_max_edit_distance);
    if neighbors.is_empty() {
        return Ok(None);
    }
    let by_lemma = gold.by_lemma();
    let generated_def = entry.senses()[0].definition();
    let generated = embedder.embed(generated_def)?;
    let mut best: Option<(f64, usize, &str, &str)> = None;
    for (lemma, distance) in &neighbors {
        let Some(entries) = by_lemma.get(lemma.as_str()) else {
            continue;
        };
        for gold_entry in entries {
            let texts: Vec<&str> = gold_entry.senses().iter().map(|s| s.definition()).collect();
            let vectors = embedder.embed_batch(&texts)?;
            for (text, v) in texts.iter().zip(&vectors) {
                let score = cosine_similarity(&generated, v)?.value();
                if score < config.overcorrection_similarity_floor {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((s, d, _, _)) => score > s || (score == s && *distance < d),
                };
                if better {
                    best = Some((score, *distance, gold_entry.lemma(), text));
                }
            }
        }
    }
    Ok(best.map(|(score, distance, lemma, text)| {
        let mut f = ErrorFinding::new(
            entry.lemma(),
            Some(entry.category()),
            ErrorCategory::Overcorrection,
            format!("definition matches gold lemma `{lemma}` (edit distance {distance}, cosine {score:.4})"),
        );
        f.score = Some(score);
        f.neighbor = Some(lemma.to_string());
        f.generated_definition = Some(generated_def.to_string());
        f.gold_definition = Some(text.to_string());
        f
    }))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub findings: Vec<ErrorFinding>,
    pub summary: BTreeMap<ErrorCategory, usize>,
}

fn entry_findings<E: Embedder + ?Sized>(
    entry: &DictionaryEntry,
    embedder: &E,
    config: &ErrorAnalysisConfig,
) -> Result<Vec<ErrorFinding>, EmbeddingError> {
    let mut out = Vec::new();
    let pos = Some(entry.category());
    let refusals = RefusalPatterns::new(&config.refusal_patterns);
    if let Some((sense, pattern)) = entry
        .senses()
        .iter()
        .find_map(|s| refusals.matching(s.definition()).map(|p| (s, p)))
    {
        let mut f = ErrorFinding::new(
            entry.lemma(),
            pos,
            ErrorCategory::Refusal,
            format!("sense {} matches refusal pattern `{pattern}`", sense.ordinal()),
        );
        f.generated_definition = Some(sense.definition().to_string());
        out.push(f);
    }
    if let Some(sense) = entry
        .senses()
        .iter()
        .find(|s| contains_word(s.definition(), entry.lemma()))
    {
        let mut f = ErrorFinding::new(
            entry.lemma(),
            pos,
            ErrorCategory::Circularity,
            format!("lemma `{}` occurs in sense {}", entry.lemma(), sense.ordinal()),
        );
        f.generated_definition = Some(sense.definition().to_string());
        out.push(f);
    }
    if let Some((pattern, ordinal)) = detect_proper_noun_definition(entry, &config.proper_noun_patterns) {
        let mut f = ErrorFinding::new(
            entry.lemma(),
            pos,
            ErrorCategory::ProperNounAsCommon,
            format!("sense {ordinal} matches `{pattern}`"),
        );
        f.generated_definition = Some(entry.senses()[ordinal - 1].definition().to_string());
        out.push(f);
    }
    if let FabricatedPolysemy::Fabricated { first, second, score } =
        detect_fabricated_polysemy(entry, embedder, config)?
    {
        let evidence = match score {
            None => format!("senses {first} and {second} are identical"),
            Some(s) => format!("senses {first} and {second} have cosine {s:.4}"),
        };
        let mut f = ErrorFinding::new(entry.lemma(), pos, ErrorCategory::FabricatedPolysemy, evidence);
        f.score = score;
        f.generated_definition = Some(format!(
            "{} | {}",
            entry.senses()[first - 1].definition(),
            entry.senses()[second - 1].definition()
        ));
        out.push(f);
    }
    Ok(out)
}

/// Runs every detector. Per-entry detectors cover the whole generated
/// dictionary; the similarity filter and over-correction search cover the
/// aligned records. Refusals come from the generation failure log, plus any
/// dictionary definition that still matches a refusal pattern.
pub fn classify_errors<E: Embedder + ?Sized>(
    generated: &Dictionary,
    gold: &Dictionary,
    records: &[AlignmentRecord],
    failures: &[GenerationFailure],
    embedder: &E,
    config: &ErrorAnalysisConfig,
) -> Result<ErrorReport, EmbeddingError> {
    let entries: Vec<&DictionaryEntry> = generated.entries().collect();
    let per_entry = entries
        .par_iter()
        .map(|e| entry_findings(e, embedder, config))
        .collect::<Result<Vec<_>, _>>()?;
    let mut findings: Vec<ErrorFinding> = per_entry.into_iter().flatten().collect();

    let index = GoldNeighborIndex::build(gold);
    let mut candidates = hallucination_candidates(records, config);
    let overcorrections = candidates
        .par_iter()
        .filter_map(|c| {
            let key = crate::model::EntryKey::new(c.lemma.clone(), c.pos?);
            generated.get(&key)
        })
        .map(|e| detect_overcorrection(e, gold, &index, embedder, config))
        .collect::<Result<Vec<_>, _>>()?;
    for candidate in &mut candidates {
        let Some(pos) = candidate.pos else { continue };
        let key = crate::model::EntryKey::new(candidate.lemma.clone(), pos);
        let record = records.iter().find(|r| r.lemma == candidate.lemma && r.category == pos);
        if let (Some(gen), Some(gold_entry), Some(record)) = (generated.get(&key), gold.get(&key), record) {
            candidate.generated_definition = Some(gen.senses()[0].definition().to_string());
            let gold_def = gold_entry.senses()[record.best_gold_index - 1].definition();
            candidate.gold_definition = Some(gold_def.to_string());
            if word_count(gold_def) <= config.short_gold_max_words {
                candidate.note = Some(SHORT_GOLD_NOTE.to_string());
            }
        }
    }
    findings.extend(candidates);
    findings.extend(overcorrections.into_iter().flatten());

    for failure in failures.iter().filter(|f| f.reason == FailureReason::Refusal) {
        let mut f = ErrorFinding::new(
            &failure.lemma,
            failure.pos.as_ref().map(|p| p.category()),
            ErrorCategory::Refusal,
            format!("model declined: {}", failure.detail),
        );
        f.generated_definition = Some(failure.detail.clone());
        findings.push(f);
    }

    findings.sort_by(|a, b| finding_sort_key(a).cmp(&finding_sort_key(b)));
    let mut summary: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.into_iter().map(|c| (c, 0)).collect();
    for f in &findings {
        *summary.entry(f.category).or_insert(0) += 1;
    }
    Ok(ErrorReport { findings, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{SimilarityScore, TrigramEmbedder};
    use crate::model::{PosTag, SenseDraft};
    use proptest::prelude::*;

    fn entry(lemma: &str, label: &str, defs: &[&str]) -> DictionaryEntry {
        DictionaryEntry::new(
            lemma,
            PosTag::parse(label),
            defs.iter().map(|d| SenseDraft::definition_only(*d)),
        )
        .unwrap()
    }

    fn scored(lemma: &str, best: f64) -> AlignmentRecord {
        AlignmentRecord {
            lemma: lemma.into(),
            category: PosCategory::Noun,
            gen_sense_count: 1,
            gold_sense_count: 1,
            best_gold_index: 1,
            best_score: SimilarityScore::new(best),
            mean_over_gold: SimilarityScore::new(best),
            per_gold_scores: vec![SimilarityScore::new(best)],
            sense_matrix: None,
        }
    }

    #[test]
    fn threshold_is_strict() {
        let config = ErrorAnalysisConfig::default();
        let flagged = hallucination_candidates(&[scored("a", 0.05), scored("b", 0.10), scored("c", 0.5)], &config);
        assert_eq!(flagged.len(), 1);
        assert_eq!(flagged[0].lemma, "a");
        assert_eq!(flagged[0].score, Some(0.05));
    }

    #[test]
    fn circularity_cases() {
        assert!(detect_circularity(&entry("gato", "nombre", &["Un gato es un felino"])));
        assert!(detect_circularity(&entry("gato", "nombre", &["Un GATO es un felino"])));
        assert!(!detect_circularity(&entry(
            "limitable",
            "adjetivo",
            &["Que se puede limitar o restringir"]
        )));
        assert!(!detect_circularity(&entry(
            "ollera",
            "nombre",
            &["lugar donde se fabrican o venden ollas"]
        )));
        assert!(!detect_circularity(&entry("limitar", "verbo", &["limitarse a algo"])));
        assert!(!detect_circularity(&entry("cañon", "nombre", &["un canon"])));
        assert!(detect_circularity(&entry("cañon", "nombre", &["otro cañon, grande."])));
    }

    #[test]
    fn proper_noun_cases() {
        let p = ErrorAnalysisConfig::default().proper_noun_patterns;
        assert!(detect_proper_noun_definition(&entry("x", "nombre", &["Nombre propio de persona."]), &p).is_some());
        assert!(detect_proper_noun_definition(
            &entry("x", "nombre", &["En la mitología griega, uno de los gigantes"]),
            &p
        )
        .is_some());
        assert!(detect_proper_noun_definition(&entry("x", "nombre", &["Acción y efecto de limitar"]), &p).is_none());
    }

    #[test]
    fn fabricated_polysemy_cases() {
        let e = TrigramEmbedder::default();
        let c = ErrorAnalysisConfig::default();
        assert_eq!(
            detect_fabricated_polysemy(&entry("asaltante", "adjetivo", &["que asalta.", "que asalta."]), &e, &c)
                .unwrap(),
            FabricatedPolysemy::Fabricated {
                first: 1,
                second: 2,
                score: None
            }
        );
        // Oracle cosine for this pair is well below 0.9.
        assert_eq!(
            detect_fabricated_polysemy(
                &entry("baboseo", "nombre", &["acción de babosear", "exceso de baba o saliva"]),
                &e,
                &c
            )
            .unwrap(),
            FabricatedPolysemy::Distinct
        );
        assert_eq!(
            detect_fabricated_polysemy(&entry("x", "nombre", &["uno"]), &e, &c).unwrap(),
            FabricatedPolysemy::NotApplicable
        );
    }

    #[test]
    fn edit_distance_cases() {
        assert_eq!(edit_distance("destace", "destace"), 0);
        assert_eq!(edit_distance("", "abc"), 3);
        assert_eq!(edit_distance("destace", "destaque"), 2);
        assert_eq!(edit_distance("año", "ano"), 1);
    }

    #[test]
    fn overcorrection_cases() {
        let e = TrigramEmbedder::default();
        let c = ErrorAnalysisConfig::default();
        let mut gold = Dictionary::new("gold");
        gold.insert(entry(
            "destaque",
            "nombre",
            &["Acción y efecto de destacar o destacarse"],
        ))
        .unwrap();
        gold.insert(entry("destace", "nombre", &["Acción y efecto de destazar"]))
            .unwrap();
        let index = GoldNeighborIndex::build(&gold);
        let gen = entry("destace", "nombre", &["Acción y efecto de destacar o sobresalir"]);
        let f = detect_overcorrection(&gen, &gold, &index, &e, &c).unwrap().unwrap();
        assert_eq!(f.neighbor.as_deref(), Some("destaque"));
        assert!((f.score.unwrap() - 0.7745966692414832).abs() < 1e-12);

        let lonely = entry("zzzzzzzz", "nombre", &["Acción y efecto de destacar o sobresalir"]);
        assert!(detect_overcorrection(&lonely, &gold, &index, &e, &c).unwrap().is_none());
        assert!(index.neighbors("destace", 0).is_empty());
    }

    #[test]
    fn category_names_round_trip() {
        for c in ErrorCategory::ALL {
            assert_eq!(c.as_str().parse::<ErrorCategory>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{c}\""));
        }
        assert!("nonsense".parse::<ErrorCategory>().is_err());
    }

    proptest! {
        #[test]
        fn filter_matches_brute_force(scores in proptest::collection::vec(-1.0f64..1.0, 0..40), t in 0.0f64..1.0) {
            let records: Vec<AlignmentRecord> = scores.iter().enumerate().map(|(i, s)| scored(&format!("l{i:03}"), *s)).collect();
            let config = ErrorAnalysisConfig { hallucination_threshold: t, ..ErrorAnalysisConfig::default() };
            let flagged: Vec<String> = hallucination_candidates(&records, &config).into_iter().map(|f| f.lemma).collect();
            let brute: Vec<String> = records.iter().filter(|r| r.best_score.value() < t).map(|r| r.lemma.clone()).collect();
            prop_assert_eq!(flagged, brute);
        }

        #[test]
        fn edit_distance_is_a_metric(a in "[abcñ]{0,8}", b in "[abcñ]{0,8}", c in "[abcñ]{0,8}") {
            prop_assert_eq!(edit_distance(&a, &a), 0);
            prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
            prop_assert!(edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c));
            prop_assert_eq!(edit_distance(&a, &b) == 0, a == b);
        }

        #[test]
        fn circularity_ignores_definition_case(upper in any::<bool>()) {
            let def = if upper { "UN GATO ES UN FELINO" } else { "un gato es un felino" };
            prop_assert!(detect_circularity(&entry("gato", "nombre", &[def])));
        }
    }
}

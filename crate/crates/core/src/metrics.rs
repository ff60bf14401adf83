//! Monosemy/polysemy agreement, cosine statistics and definition lengths.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::alignment::AlignmentRecord;
use crate::error_analysis::detect_circularity;
use crate::model::{Dictionary, EntryKey, PosCategory};

/// Rows are the gold dictionary (actual), columns the generated one
/// (predicted).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfusionMatrix2x2 {
    pub mono_mono: u64,
    pub mono_poly: u64,
    pub poly_mono: u64,
    pub poly_poly: u64,
}

impl ConfusionMatrix2x2 {
    pub fn new(mono_mono: u64, mono_poly: u64, poly_mono: u64, poly_poly: u64) -> Self {
        ConfusionMatrix2x2 {
            mono_mono,
            mono_poly,
            poly_mono,
            poly_poly,
        }
    }

    pub fn total(&self) -> u64 {
        self.mono_mono + self.mono_poly + self.poly_mono + self.poly_poly
    }

    pub fn actual_mono(&self) -> u64 {
        self.mono_mono + self.mono_poly
    }

    pub fn actual_poly(&self) -> u64 {
        self.poly_mono + self.poly_poly
    }

    pub fn predicted_mono(&self) -> u64 {
        self.mono_mono + self.poly_mono
    }

    pub fn predicted_poly(&self) -> u64 {
        self.mono_poly + self.poly_poly
    }

    fn record(&mut self, gold_mono: bool, gen_mono: bool) {
        match (gold_mono, gen_mono) {
            (true, true) => self.mono_mono += 1,
            (true, false) => self.mono_poly += 1,
            (false, true) => self.poly_mono += 1,
            (false, false) => self.poly_poly += 1,
        }
    }
}

/// Classifies each key present in both dictionaries.
pub fn polysemy_confusion(generated: &Dictionary, gold: &Dictionary, keys: &[EntryKey]) -> ConfusionMatrix2x2 {
    let mut matrix = ConfusionMatrix2x2::default();
    for key in keys {
        if let (Some(g), Some(o)) = (generated.get(key), gold.get(key)) {
            matrix.record(o.is_monosemous(), g.is_monosemous());
        }
    }
    matrix
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SenseClass {
    Monosemy,
    Polysemy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when any ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 with `positive` as the positive class. Each
/// value is a single division of integers.
pub fn class_metrics(matrix: &ConfusionMatrix2x2, positive: SenseClass) -> ClassMetrics {
    let (tp, fp, fn_) = match positive {
        SenseClass::Monosemy => (matrix.mono_mono, matrix.poly_mono, matrix.mono_poly),
        SenseClass::Polysemy => (matrix.poly_poly, matrix.mono_poly, matrix.poly_mono),
    };
    let mut degenerate = false;
    let precision = ratio(tp, tp + fp, &mut degenerate);
    let recall = ratio(tp, tp + fn_, &mut degenerate);
    let f1 = ratio(2 * tp, 2 * tp + fp + fn_, &mut degenerate);
    ClassMetrics {
        precision,
        recall,
        f1,
        degenerate,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsSummary {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
}

/// `None` for an empty slice. Values are summed in slice order.
pub fn summarize(values: &[f64]) -> Option<StatsSummary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(StatsSummary {
        count: values.len(),
        mean,
        std_dev: var.sqrt(),
    })
}

/// One summary over everything plus one per POS category; categories
/// without data are absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsGroup {
    pub all: Option<StatsSummary>,
    pub by_category: BTreeMap<PosCategory, StatsSummary>,
}

impl StatsGroup {
    fn from_values(values: Vec<(PosCategory, f64)>) -> Self {
        let all: Vec<f64> = values.iter().map(|(_, v)| *v).collect();
        let mut per: BTreeMap<PosCategory, Vec<f64>> = BTreeMap::new();
        for (c, v) in values {
            per.entry(c).or_default().push(v);
        }
        StatsGroup {
            all: summarize(&all),
            by_category: per
                .into_iter()
                .filter_map(|(c, vs)| summarize(&vs).map(|s| (c, s)))
                .collect(),
        }
    }

    pub fn get(&self, category: Option<PosCategory>) -> Option<&StatsSummary> {
        match category {
            None => self.all.as_ref(),
            Some(c) => self.by_category.get(&c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreField {
    BestScore,
    MeanOverGold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldFilter {
    GoldMonosemous,
    GoldPolysemous,
}

/// Cosine statistics over records whose generated entry is monosemous and
/// whose gold entry passes `gold_filter`. Records are sorted by key before
/// accumulation, so input order does not matter.
pub fn cosine_stats(records: &[AlignmentRecord], field: ScoreField, gold_filter: GoldFilter) -> StatsGroup {
    let mut selected: Vec<&AlignmentRecord> = records
        .iter()
        .filter(|r| r.gen_monosemous())
        .filter(|r| match gold_filter {
            GoldFilter::GoldMonosemous => r.gold_monosemous(),
            GoldFilter::GoldPolysemous => !r.gold_monosemous(),
        })
        .collect();
    selected.sort_by(|a, b| (&a.lemma, a.category).cmp(&(&b.lemma, b.category)));
    StatsGroup::from_values(
        selected
            .into_iter()
            .map(|r| {
                let v = match field {
                    ScoreField::BestScore => r.best_score.value(),
                    ScoreField::MeanOverGold => r.mean_over_gold.value(),
                };
                (r.category, v)
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthStats {
    pub words: StatsGroup,
    pub characters: StatsGroup,
}

pub fn word_count(definition: &str) -> usize {
    definition.split_whitespace().count()
}

pub fn char_count(definition: &str) -> usize {
    definition.trim().chars().count()
}

/// Per-sense definition lengths in words (whitespace tokens) and characters
/// (Unicode scalar values).
pub fn length_stats(dict: &Dictionary) -> LengthStats {
    let mut words = Vec::new();
    let mut chars = Vec::new();
    for entry in dict.entries() {
        for sense in entry.senses() {
            words.push((entry.category(), word_count(sense.definition()) as f64));
            chars.push((entry.category(), char_count(sense.definition()) as f64));
        }
    }
    LengthStats {
        words: StatsGroup::from_values(words),
        characters: StatsGroup::from_values(chars),
    }
}

/// Fraction of entries with at least one self-referencing definition.
pub fn circularity_rate(dict: &Dictionary) -> f64 {
    if dict.is_empty() {
        return 0.0;
    }
    let circular = dict.entries().filter(|e| detect_circularity(e)).count();
    circular as f64 / dict.len() as f64
}

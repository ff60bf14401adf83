//! Dictionary value types: part-of-speech tags, senses, entries and keyed
//! dictionaries.
//!
//! Every other module in the crate works on these types. They are immutable
//! once built; all invariants are checked by the constructors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("lemma is empty after trimming")]
    EmptyLemma,
    #[error("sense {ordinal} has an empty definition")]
    EmptyDefinition { ordinal: usize },
    #[error("entry `{lemma}` has no senses")]
    NoSenses { lemma: String },
    #[error("duplicate key ({lemma}, {category})")]
    DuplicateKey { lemma: String, category: PosCategory },
}

/// Normalizes a lemma into its join key: trimmed, NFC-composed and
/// case-folded. Diacritics are kept.
pub fn normalize_lemma(raw: &str) -> Result<String, ModelError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(ModelError::EmptyLemma);
    }
    let mut current: String = trimmed.nfc().collect();
    // Folding can expand into sequences that recompose differently, so run
    // fold + NFC until it stops changing.
    for _ in 0..4 {
        let next: String = caseless::default_case_fold_str(&current).nfc().collect();
        if next == current {
            break;
        }
        current = next;
    }
    Ok(current)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosCategory {
    Noun,
    Adjective,
    Verb,
    Adverb,
    Other,
}

impl PosCategory {
    pub const ALL: [PosCategory; 5] = [
        PosCategory::Noun,
        PosCategory::Adjective,
        PosCategory::Verb,
        PosCategory::Adverb,
        PosCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PosCategory::Noun => "noun",
            PosCategory::Adjective => "adjective",
            PosCategory::Verb => "verb",
            PosCategory::Adverb => "adverb",
            PosCategory::Other => "other",
        }
    }
}

impl fmt::Display for PosCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PosCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown POS category `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Masculine,
    Feminine,
}

/// A part-of-speech tag as it appeared in the source, plus the category and
/// gender recognised from it.
///
/// Tags are only built through [`PosTag::parse`], so category and gender are
/// always a function of `raw_label` and serializing the label alone is
/// lossless.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PosTag {
    category: PosCategory,
    raw_label: String,
    gender: Option<Gender>,
}

impl PosTag {
    /// Recognises Spanish labels such as "Nombre masculino", "Verbo",
    /// "Adjetivo" or "Adverbio" (case-insensitive). Anything else is
    /// [`PosCategory::Other`].
    pub fn parse(label: &str) -> PosTag {
        let raw_label = label.trim().to_string();
        let lowered = raw_label.to_lowercase();
        let mut words = lowered
            .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
            .map(|w| w.trim_matches(|c: char| c == '.' || c == ':'))
            .filter(|w| !w.is_empty());
        let category = match words.next() {
            Some("nombre") | Some("sustantivo") => PosCategory::Noun,
            Some("adjetivo") => PosCategory::Adjective,
            Some("verbo") => PosCategory::Verb,
            Some("adverbio") => PosCategory::Adverb,
            _ => PosCategory::Other,
        };
        let gender = if category == PosCategory::Noun {
            words.find_map(|w| {
                if w.starts_with("masculin") {
                    Some(Gender::Masculine)
                } else if w.starts_with("femenin") {
                    Some(Gender::Feminine)
                } else {
                    None
                }
            })
        } else {
            None
        };
        PosTag {
            category,
            raw_label,
            gender,
        }
    }

    pub fn category(&self) -> PosCategory {
        self.category
    }

    pub fn raw_label(&self) -> &str {
        &self.raw_label
    }

    pub fn gender(&self) -> Option<Gender> {
        self.gender
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw_label)
    }
}

impl Serialize for PosTag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw_label)
    }
}

impl<'de> Deserialize<'de> for PosTag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let label = String::deserialize(deserializer)?;
        Ok(PosTag::parse(&label))
    }
}

/// One numbered meaning of an entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sense {
    ordinal: usize,
    definition: String,
    example: Option<String>,
}

impl Sense {
    fn new(ordinal: usize, definition: &str, example: Option<&str>) -> Result<Sense, ModelError> {
        let definition = definition.trim();
        if definition.is_empty() {
            return Err(ModelError::EmptyDefinition { ordinal });
        }
        let example = example.map(str::trim).filter(|e| !e.is_empty());
        Ok(Sense {
            ordinal,
            definition: definition.to_string(),
            example: example.map(str::to_string),
        })
    }

    /// 1-based position within the entry.
    pub fn ordinal(&self) -> usize {
        self.ordinal
    }

    pub fn definition(&self) -> &str {
        &self.definition
    }

    pub fn example(&self) -> Option<&str> {
        self.example.as_deref()
    }
}

/// Definition text plus optional example sentence, before ordinals are
/// assigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SenseDraft {
    pub definition: String,
    pub example: Option<String>,
}

impl SenseDraft {
    pub fn new(definition: impl Into<String>, example: Option<impl Into<String>>) -> Self {
        SenseDraft {
            definition: definition.into(),
            example: example.map(Into::into),
        }
    }

    pub fn definition_only(definition: impl Into<String>) -> Self {
        SenseDraft {
            definition: definition.into(),
            example: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntryKey {
    pub lemma: String,
    pub category: PosCategory,
}

impl EntryKey {
    pub fn new(lemma: impl Into<String>, category: PosCategory) -> Self {
        EntryKey {
            lemma: lemma.into(),
            category,
        }
    }
}

impl fmt::Display for EntryKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.lemma, self.category)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictionaryEntry {
    lemma: String,
    pos: PosTag,
    senses: Vec<Sense>,
}

impl DictionaryEntry {
    /// Builds an entry, normalizing the lemma and numbering senses 1..n in
    /// the given order.
    pub fn new(
        lemma: &str,
        pos: PosTag,
        senses: impl IntoIterator<Item = SenseDraft>,
    ) -> Result<DictionaryEntry, ModelError> {
        let lemma = normalize_lemma(lemma)?;
        let senses = senses
            .into_iter()
            .enumerate()
            .map(|(i, draft)| Sense::new(i + 1, &draft.definition, draft.example.as_deref()))
            .collect::<Result<Vec<_>, _>>()?;
        if senses.is_empty() {
            return Err(ModelError::NoSenses { lemma });
        }
        Ok(DictionaryEntry { lemma, pos, senses })
    }

    pub fn lemma(&self) -> &str {
        &self.lemma
    }

    pub fn pos(&self) -> &PosTag {
        &self.pos
    }

    pub fn category(&self) -> PosCategory {
        self.pos.category
    }

    pub fn senses(&self) -> &[Sense] {
        &self.senses
    }

    pub fn key(&self) -> EntryKey {
        EntryKey::new(self.lemma.clone(), self.pos.category)
    }

    pub fn is_monosemous(&self) -> bool {
        self.senses.len() == 1
    }
}

pub fn is_monosemous(entry: &DictionaryEntry) -> bool {
    entry.is_monosemous()
}

/// A named set of entries keyed by (lemma, POS category).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dictionary {
    name: String,
    entries: BTreeMap<EntryKey, DictionaryEntry>,
}

impl Dictionary {
    pub fn new(name: impl Into<String>) -> Self {
        Dictionary {
            name: name.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn insert(&mut self, entry: DictionaryEntry) -> Result<(), ModelError> {
        let key = entry.key();
        if self.entries.contains_key(&key) {
            return Err(ModelError::DuplicateKey {
                lemma: key.lemma,
                category: key.category,
            });
        }
        self.entries.insert(key, entry);
        Ok(())
    }

    pub fn get(&self, key: &EntryKey) -> Option<&DictionaryEntry> {
        self.entries.get(key)
    }

    pub fn lookup(&self, lemma: &str, category: PosCategory) -> Option<&DictionaryEntry> {
        self.entries.get(&EntryKey::new(lemma, category))
    }

    pub fn contains_key(&self, key: &EntryKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in sorted key order.
    pub fn entries(&self) -> impl Iterator<Item = &DictionaryEntry> {
        self.entries.values()
    }

    pub fn keys(&self) -> impl Iterator<Item = &EntryKey> {
        self.entries.keys()
    }

    pub fn monosemous_count(&self) -> usize {
        self.entries().filter(|e| e.is_monosemous()).count()
    }

    pub fn polysemous_count(&self) -> usize {
        self.len() - self.monosemous_count()
    }

    /// Entries grouped by lemma alone, ignoring POS. Used for sensitivity
    /// checks against a lemma-only join.
    pub fn by_lemma(&self) -> BTreeMap<&str, Vec<&DictionaryEntry>> {
        let mut grouped: BTreeMap<&str, Vec<&DictionaryEntry>> = BTreeMap::new();
        for entry in self.entries() {
            grouped.entry(entry.lemma()).or_default().push(entry);
        }
        grouped
    }
}

/// Sorted keys present in both dictionaries.
pub fn vocabulary_join(generated: &Dictionary, gold: &Dictionary) -> Vec<EntryKey> {
    generated.keys().filter(|key| gold.contains_key(key)).cloned().collect()
}

/// Sorted lemmas present in both dictionaries, regardless of POS.
pub fn lemma_join(generated: &Dictionary, gold: &Dictionary) -> Vec<String> {
    let gold_lemmas = gold.by_lemma();
    generated
        .by_lemma()
        .into_keys()
        .filter(|lemma| gold_lemmas.contains_key(lemma))
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(lemma: &str, label: &str, defs: &[&str]) -> DictionaryEntry {
        DictionaryEntry::new(
            lemma,
            PosTag::parse(label),
            defs.iter().map(|d| SenseDraft::definition_only(*d)),
        )
        .unwrap()
    }

    #[test]
    fn normalize_trims_and_lowercases() {
        assert_eq!(normalize_lemma(" Limitación ").unwrap(), "limitación");
        assert_eq!(normalize_lemma("aquí").unwrap(), "aquí");
    }

    #[test]
    fn normalize_composes_decomposed_tilde() {
        let decomposed = "man\u{0303}ana";
        let composed = "ma\u{00f1}ana";
        assert_ne!(decomposed.as_bytes(), composed.as_bytes());
        let normalized = normalize_lemma(decomposed).unwrap();
        assert_eq!(normalized.as_bytes(), composed.as_bytes());
        assert_eq!(normalized.as_bytes(), &[0x6d, 0x61, 0xc3, 0xb1, 0x61, 0x6e, 0x61]);
    }

    #[test]
    fn normalize_rejects_blank() {
        assert_eq!(normalize_lemma("   \t"), Err(ModelError::EmptyLemma));
        assert_eq!(normalize_lemma(""), Err(ModelError::EmptyLemma));
    }

    #[test]
    fn pos_labels() {
        let noun = PosTag::parse("Nombre masculino");
        assert_eq!(noun.category(), PosCategory::Noun);
        assert_eq!(noun.gender(), Some(Gender::Masculine));
        assert_eq!(noun.raw_label(), "Nombre masculino");
        assert_eq!(PosTag::parse("nombre FEMENINO").gender(), Some(Gender::Feminine));
        assert_eq!(PosTag::parse("Verbo").category(), PosCategory::Verb);
        assert_eq!(PosTag::parse("verbo.").category(), PosCategory::Verb);
        assert_eq!(PosTag::parse("ADJETIVO").category(), PosCategory::Adjective);
        assert_eq!(PosTag::parse("Adverbio").category(), PosCategory::Adverb);
        let other = PosTag::parse("Locución adverbial");
        assert_eq!(other.category(), PosCategory::Other);
        assert_eq!(other.gender(), None);
        // gender is only recognised on nouns
        assert_eq!(PosTag::parse("Adjetivo masculino").gender(), None);
    }

    #[test]
    fn monosemy() {
        assert!(entry("casa", "Nombre femenino", &["Edificio para habitar."]).is_monosemous());
        let atropellado = entry(
            "atropellado",
            "Adjetivo",
            &[
                "que ha sido objeto de un atropello.",
                "que se hace de manera precipitada, sin orden ni concierto.",
            ],
        );
        assert!(!is_monosemous(&atropellado));
        let ordinals: Vec<_> = atropellado.senses().iter().map(Sense::ordinal).collect();
        assert_eq!(ordinals, vec![1, 2]);
    }

    #[test]
    fn entry_rejects_empty_parts() {
        let pos = PosTag::parse("Verbo");
        assert!(matches!(
            DictionaryEntry::new("x", pos.clone(), Vec::<SenseDraft>::new()),
            Err(ModelError::NoSenses { .. })
        ));
        assert_eq!(
            DictionaryEntry::new("x", pos, vec![SenseDraft::definition_only("  ")]),
            Err(ModelError::EmptyDefinition { ordinal: 1 })
        );
    }

    #[test]
    fn sense_trims_definition_and_drops_blank_example() {
        let e = DictionaryEntry::new(
            "x",
            PosTag::parse("Verbo"),
            vec![SenseDraft::new("  Hacer algo. ", Some("  "))],
        )
        .unwrap();
        assert_eq!(e.senses()[0].definition(), "Hacer algo.");
        assert_eq!(e.senses()[0].example(), None);
    }

    #[test]
    fn duplicate_keys_rejected_but_homographs_allowed() {
        let mut d = Dictionary::new("d");
        d.insert(entry("bajo", "Adjetivo", &["De poca altura."])).unwrap();
        d.insert(entry("bajo", "Adverbio", &["En voz baja."])).unwrap();
        let err = d.insert(entry("Bajo", "adjetivo", &["Otra."])).unwrap_err();
        assert!(matches!(err, ModelError::DuplicateKey { .. }));
        assert_eq!(d.len(), 2);
        assert!(d.lookup("bajo", PosCategory::Adverb).is_some());
        assert_eq!(d.by_lemma()["bajo"].len(), 2);
    }

    fn dict_of(keys: &[(&str, &str)]) -> Dictionary {
        let mut d = Dictionary::new("t");
        for (lemma, label) in keys {
            d.insert(entry(lemma, label, &["def."])).unwrap();
        }
        d
    }

    #[test]
    fn join_is_sorted_intersection() {
        let g = dict_of(&[("c", "Verbo"), ("a", "Verbo"), ("b", "Verbo")]);
        let gold = dict_of(&[("b", "Verbo"), ("d", "Verbo"), ("c", "Verbo")]);
        let keys = vocabulary_join(&g, &gold);
        assert_eq!(
            keys,
            vec![
                EntryKey::new("b", PosCategory::Verb),
                EntryKey::new("c", PosCategory::Verb)
            ]
        );
        assert!(vocabulary_join(&dict_of(&[("a", "Verbo")]), &dict_of(&[("z", "Verbo")])).is_empty());
    }

    #[test]
    fn join_on_ten_entry_fixture() {
        // Hand-enumerated: shared keys are everything except zarza, yegua,
        // and "bajo" as an adverb (gold only has it as an adjective).
        let generated = dict_of(&[
            ("casa", "Nombre femenino"),
            ("árbol", "Nombre masculino"),
            ("correr", "Verbo"),
            ("bajo", "Adverbio"),
            ("limitar", "Verbo"),
            ("aquí", "Adverbio"),
            ("zarza", "Nombre femenino"),
            ("yegua", "Nombre femenino"),
            ("mímico", "Adjetivo"),
            ("reducir", "Verbo"),
        ]);
        let gold = dict_of(&[
            ("casa", "Nombre femenino"),
            ("árbol", "Nombre masculino"),
            ("correr", "Verbo"),
            ("bajo", "Adjetivo"),
            ("limitar", "Verbo"),
            ("aquí", "Adverbio"),
            ("mímico", "Adjetivo"),
            ("reducir", "Verbo"),
            ("gato", "Nombre masculino"),
        ]);
        let keys: Vec<String> = vocabulary_join(&generated, &gold)
            .into_iter()
            .map(|k| k.lemma)
            .collect();
        assert_eq!(
            keys,
            vec!["aquí", "casa", "correr", "limitar", "mímico", "reducir", "árbol"]
        );
        assert_eq!(lemma_join(&generated, &gold).len(), 8);
    }

    #[test]
    fn mono_plus_poly_is_total() {
        let mut d = Dictionary::new("d");
        d.insert(entry("a", "Verbo", &["uno."])).unwrap();
        d.insert(entry("b", "Verbo", &["uno.", "dos."])).unwrap();
        d.insert(entry("c", "Verbo", &["uno."])).unwrap();
        assert_eq!(d.monosemous_count(), 2);
        assert_eq!(d.polysemous_count(), 1);
        assert_eq!(d.monosemous_count() + d.polysemous_count(), d.len());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in "\\PC{1,24}") {
            match normalize_lemma(&raw) {
                Ok(once) => {
                    prop_assert_eq!(normalize_lemma(&once).unwrap(), once);
                }
                Err(_) => prop_assert!(raw.trim().is_empty()),
            }
        }

        #[test]
        fn normalize_is_total_on_non_blank(raw in "[a-zA-ZáéíóúñÑÁ\u{0301}\u{0303} ]{0,6}[a-zA-Zñ]") {
            prop_assert!(normalize_lemma(&raw).is_ok());
        }
    }
}

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use super::{Embedder, EmbeddingError, EmbeddingVector};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CacheRecord {
    embedder: String,
    text_sha256: String,
    vector: String,
}

type Key = (String, String);

/// Content-addressed vector cache, optionally persisted as an append-only
/// JSON-lines file. Keys are (embedder id, SHA-256 of the text after NFC and
/// whitespace collapsing). Case is kept, since cased encoders distinguish it.
pub struct EmbeddingCache {
    entries: RwLock<HashMap<Key, EmbeddingVector>>,
    file: Option<Mutex<Appender>>,
    skipped: usize,
}

struct Appender {
    file: File,
    needs_newline: bool,
}

fn text_digest(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    let collapsed = nfc.split_whitespace().collect::<Vec<_>>().join(" ");
    hex::encode(Sha256::digest(collapsed.as_bytes()))
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        EmbeddingCache {
            entries: RwLock::new(HashMap::new()),
            file: None,
            skipped: 0,
        }
    }

    /// Loads every readable record of `path` (creating the file if needed).
    /// Corrupt lines are skipped with a warning; their vectors will be
    /// recomputed and appended again.
    pub fn open(path: &Path) -> io::Result<Self> {
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut entries = HashMap::new();
        let mut skipped = 0;
        let mut reader = BufReader::new(&file);
        let mut line = Vec::new();
        let mut number = 0usize;
        loop {
            line.clear();
            if reader.read_until(b'\n', &mut line)? == 0 {
                break;
            }
            number += 1;
            let text = String::from_utf8_lossy(&line);
            let text = text.trim();
            if text.is_empty() {
                continue;
            }
            match decode_record(text) {
                Some((key, vector)) => {
                    entries.insert(key, vector);
                }
                None => {
                    log::warn!("{}:{number}: skipping corrupt embedding cache record", path.display());
                    skipped += 1;
                }
            }
        }
        let needs_newline = ends_without_newline(&mut file)?;
        Ok(EmbeddingCache {
            entries: RwLock::new(entries),
            file: Some(Mutex::new(Appender { file, needs_newline })),
            skipped,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Corrupt records skipped while loading.
    pub fn skipped_records(&self) -> usize {
        self.skipped
    }

    pub fn get(&self, embedder_id: &str, text: &str) -> Option<EmbeddingVector> {
        let key = (embedder_id.to_string(), text_digest(text));
        self.entries.read().expect("cache lock").get(&key).cloned()
    }

    pub fn put(&self, embedder_id: &str, text: &str, vector: &EmbeddingVector) -> io::Result<()> {
        let key = (embedder_id.to_string(), text_digest(text));
        if let Some(file) = &self.file {
            let record = CacheRecord {
                embedder: key.0.clone(),
                text_sha256: key.1.clone(),
                vector: hex::encode(vector.to_le_bytes()),
            };
            let mut line = serde_json::to_string(&record).map_err(io::Error::other)?;
            line.push('\n');
            let mut appender = file.lock().expect("cache file lock");
            if appender.needs_newline {
                line.insert(0, '\n');
            }
            appender.file.write_all(line.as_bytes())?;
            appender.file.flush()?;
            appender.needs_newline = false;
        }
        self.entries.write().expect("cache lock").insert(key, vector.clone());
        Ok(())
    }
}

fn decode_record(line: &str) -> Option<(Key, EmbeddingVector)> {
    let record: CacheRecord = serde_json::from_str(line).ok()?;
    if record.text_sha256.len() != 64 || !record.text_sha256.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    let bytes = hex::decode(&record.vector).ok()?;
    let vector = EmbeddingVector::from_le_bytes(&bytes)?;
    if vector.is_zero() || vector.components().iter().any(|c| !c.is_finite()) {
        return None;
    }
    Some(((record.embedder, record.text_sha256), vector))
}

fn ends_without_newline(file: &mut File) -> io::Result<bool> {
    let len = file.seek(SeekFrom::End(0))?;
    if len == 0 {
        return Ok(false);
    }
    file.seek(SeekFrom::Start(len - 1))?;
    let mut last = [0u8; 1];
    file.read_exact(&mut last)?;
    Ok(last[0] != b'\n')
}

/// An embedder that consults a cache first and only forwards misses.
pub struct CachedEmbedder<'c, E> {
    inner: E,
    cache: &'c EmbeddingCache,
}

impl<'c, E: Embedder> CachedEmbedder<'c, E> {
    pub fn new(inner: E, cache: &'c EmbeddingCache) -> Self {
        CachedEmbedder { inner, cache }
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<'_, E> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let id = self.inner.id();
        let mut out: Vec<Option<EmbeddingVector>> = texts.iter().map(|t| self.cache.get(&id, t)).collect();
        let mut misses: Vec<&str> = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (text, slot) in texts.iter().zip(&out) {
            if slot.is_none() && !seen.contains_key(&text_digest(text)) {
                seen.insert(text_digest(text), misses.len());
                misses.push(text);
            }
        }
        if !misses.is_empty() {
            let fresh = self.inner.embed_batch(&misses)?;
            if fresh.len() != misses.len() {
                return Err(EmbeddingError::Protocol(format!(
                    "asked for {} vectors, got {}",
                    misses.len(),
                    fresh.len()
                )));
            }
            for (text, vector) in misses.iter().zip(&fresh) {
                if let Err(e) = self.cache.put(&id, text, vector) {
                    log::warn!("could not persist embedding cache record: {e}");
                }
            }
            for (text, slot) in texts.iter().zip(out.iter_mut()) {
                if slot.is_none() {
                    *slot = Some(fresh[seen[&text_digest(text)]].clone());
                }
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled above")).collect())
    }
}

/// Where a persistent cache lives for a given directory.
pub fn default_cache_path(dir: &Path) -> PathBuf {
    dir.join("embeddings.cache.jsonl")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::TrigramEmbedder;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting {
        inner: TrigramEmbedder,
        calls: AtomicUsize,
        texts: AtomicUsize,
    }

    impl Embedder for Counting {
        fn id(&self) -> String {
            self.inner.id()
        }
        fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.texts.fetch_add(texts.len(), Ordering::SeqCst);
            self.inner.embed_batch(texts)
        }
    }

    fn counting() -> Counting {
        Counting {
            inner: TrigramEmbedder::new(32),
            calls: AtomicUsize::new(0),
            texts: AtomicUsize::new(0),
        }
    }

    #[test]
    fn miss_then_hit() {
        let cache = EmbeddingCache::in_memory();
        assert!(cache.get("e", "casa").is_none());
        let v = EmbeddingVector::new(vec![0.5, -0.25]).unwrap();
        cache.put("e", "casa", &v).unwrap();
        assert_eq!(cache.get("e", "casa"), Some(v.clone()));
        assert_eq!(cache.get("e", "  casa "), Some(v));
        assert!(cache.get("other", "casa").is_none());
        assert!(cache.get("e", "Casa").is_none());
    }

    #[test]
    fn persistent_round_trip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = default_cache_path(dir.path());
        let v = EmbeddingVector::new(vec![0.1, 1.0 / 3.0, -7.25e-300]).unwrap();
        {
            let cache = EmbeddingCache::open(&path).unwrap();
            cache.put("e", "texto", &v).unwrap();
        }
        let cache = EmbeddingCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.get("e", "texto").unwrap().to_le_bytes(), v.to_le_bytes());
    }

    #[test]
    fn corrupt_records_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let good = format!(
            "{{\"embedder\":\"e\",\"text_sha256\":\"{}\",\"vector\":\"{}\"}}\n",
            text_digest("uno"),
            hex::encode(EmbeddingVector::new(vec![1.0]).unwrap().to_le_bytes())
        );
        let contents = format!("not json\n{good}{{\"embedder\":\"e\",\"text_sha256\":\"zz\",\"vector\":\"00\"}}\n{{\"embedder\":\"e\",\"text_sha");
        std::fs::write(&path, contents).unwrap();
        let cache = EmbeddingCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.skipped_records(), 3);
        cache
            .put("e", "dos", &EmbeddingVector::new(vec![2.0]).unwrap())
            .unwrap();
        drop(cache);
        let reopened = EmbeddingCache::open(&path).unwrap();
        assert_eq!(reopened.len(), 2);
        assert!(reopened.get("e", "dos").is_some());
    }

    #[test]
    fn warm_cache_makes_no_inner_calls() {
        let cache = EmbeddingCache::in_memory();
        let embedder = CachedEmbedder::new(counting(), &cache);
        let texts = ["a b", "c d", "a b", "e f"];
        let first = embedder.embed_batch(&texts).unwrap();
        assert_eq!(embedder.inner().calls.load(Ordering::SeqCst), 1);
        assert_eq!(embedder.inner().texts.load(Ordering::SeqCst), 3);
        assert_eq!(first[0], first[2]);

        let warm = CachedEmbedder::new(counting(), &cache);
        let second = warm.embed_batch(&texts).unwrap();
        assert_eq!(warm.inner().calls.load(Ordering::SeqCst), 0);
        assert_eq!(first, second);
    }
}

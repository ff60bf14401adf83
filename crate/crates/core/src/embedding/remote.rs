use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{Embedder, EmbeddingError, EmbeddingVector};
use crate::generation::http::{classify_status, classify_transport};
use crate::generation::ProviderError;
use crate::retry::RetryPolicy;

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteEmbedderConfig {
    pub endpoint: String,
    /// Name reported in the embedder id; the service decides what it runs.
    pub model: String,
    pub batch_size: usize,
    pub max_concurrent_calls: usize,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl Default for RemoteEmbedderConfig {
    fn default() -> Self {
        RemoteEmbedderConfig {
            endpoint: "http://127.0.0.1:8080/embed".into(),
            model: "distiluse-base-multilingual-cased-v2".into(),
            batch_size: 64,
            max_concurrent_calls: 2,
            timeout: Duration::from_secs(60),
            retry: RetryPolicy::default(),
        }
    }
}

/// Client for an embedding service speaking `{"texts": [...]}` →
/// `{"vectors": [[...]], "dimension": n}`.
pub struct RemoteEmbedder {
    agent: ureq::Agent,
    config: RemoteEmbedderConfig,
    calls: AtomicUsize,
}

#[derive(Deserialize)]
struct EmbedReply {
    vectors: Vec<Vec<f64>>,
    dimension: usize,
}

enum CallError {
    Provider(ProviderError),
    Protocol(String),
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Result<Self, EmbeddingError> {
        if config.batch_size == 0 || config.max_concurrent_calls == 0 {
            return Err(EmbeddingError::Service(
                "batch size and concurrency must be at least 1".into(),
            ));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteEmbedder {
            agent,
            config,
            calls: AtomicUsize::new(0),
        })
    }

    /// HTTP requests issued so far, retries included.
    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn call_once(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, CallError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut response = self
            .agent
            .post(&self.config.endpoint)
            .send_json(json!({ "texts": texts }))
            .map_err(|e| CallError::Provider(classify_transport(e)))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| CallError::Provider(classify_transport(e)))?;
        if status != 200 {
            return Err(CallError::Provider(classify_status(status, &body)));
        }
        let reply: EmbedReply =
            serde_json::from_str(&body).map_err(|e| CallError::Protocol(format!("malformed reply: {e}")))?;
        if reply.vectors.len() != texts.len() {
            return Err(CallError::Protocol(format!(
                "sent {} texts, received {} vectors",
                texts.len(),
                reply.vectors.len()
            )));
        }
        reply
            .vectors
            .into_iter()
            .map(|components| {
                if components.len() != reply.dimension {
                    return Err(CallError::Protocol(format!(
                        "vector of length {} in a reply declaring dimension {}",
                        components.len(),
                        reply.dimension
                    )));
                }
                let vector = EmbeddingVector::new(components).map_err(|e| CallError::Protocol(e.to_string()))?;
                if vector.is_zero() {
                    return Err(CallError::Protocol("service returned a zero vector".into()));
                }
                Ok(vector)
            })
            .collect()
    }

    fn call_with_retry(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let (result, retries) = self.config.retry.run(
            |_| self.call_once(texts),
            |e| matches!(e, CallError::Provider(p) if p.is_transient()),
        );
        result.map_err(|e| match e {
            CallError::Protocol(m) => EmbeddingError::Protocol(m),
            CallError::Provider(p) => EmbeddingError::Service(format!("{p} (after {retries} retries)")),
        })
    }
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> String {
        format!("remote-{}", self.config.model)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let chunks: Vec<&[&str]> = texts.chunks(self.config.batch_size).collect();
        let workers = self.config.max_concurrent_calls.min(chunks.len());
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel();
        thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let chunks = &chunks;
                let next = &next;
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(chunk) = chunks.get(i) else { break };
                    let result = self.call_with_retry(chunk);
                    let failed = result.is_err();
                    if tx.send((i, result)).is_err() || failed {
                        // Stop handing out work once anything has failed.
                        next.store(chunks.len(), Ordering::SeqCst);
                        break;
                    }
                });
            }
        });
        drop(tx);

        let mut slots: Vec<Option<Vec<EmbeddingVector>>> = vec![None; chunks.len()];
        let mut first_error: Option<(usize, EmbeddingError)> = None;
        for (i, result) in rx {
            match result {
                Ok(vectors) => slots[i] = Some(vectors),
                Err(e) => {
                    if first_error.as_ref().is_none_or(|(j, _)| i < *j) {
                        first_error = Some((i, e));
                    }
                }
            }
        }
        if let Some((_, e)) = first_error {
            return Err(e);
        }
        let mut out = Vec::with_capacity(texts.len());
        let mut dimension = None;
        for slot in slots {
            let vectors = slot.ok_or_else(|| EmbeddingError::Service("batch was not processed".into()))?;
            for v in vectors {
                match dimension {
                    None => dimension = Some(v.dimension()),
                    Some(d) if d != v.dimension() => {
                        return Err(EmbeddingError::Protocol(format!(
                            "dimension changed between batches: {d} then {}",
                            v.dimension()
                        )))
                    }
                    Some(_) => {}
                }
                out.push(v);
            }
        }
        Ok(out)
    }
}

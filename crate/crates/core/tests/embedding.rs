mod common;

use std::time::Duration;

use common::MockServer;
use lexiforge_core::embedding::{
    cosine_similarity, embed_deterministic, CachedEmbedder, Embedder, EmbeddingCache, EmbeddingError, RemoteEmbedder,
    RemoteEmbedderConfig,
};
use lexiforge_core::retry::RetryPolicy;
use serde_json::{json, Value};

const GOLDEN: &str = include_str!("../../../fixtures/embedding_golden.jsonl");

#[test]
fn golden_vectors_are_byte_exact() {
    let mut count = 0;
    for line in GOLDEN.lines() {
        let record: Value = serde_json::from_str(line).unwrap();
        let text = record["text"].as_str().unwrap();
        let dim = record["dimension"].as_u64().unwrap() as usize;
        let first = embed_deterministic(text, dim).unwrap();
        let second = embed_deterministic(text, dim).unwrap();
        assert_eq!(first.to_le_bytes(), second.to_le_bytes());
        assert_eq!(
            hex::encode(first.to_le_bytes()),
            record["vector_hex"].as_str().unwrap(),
            "{text:?}"
        );
        assert_eq!(cosine_similarity(&first, &second).unwrap().value(), 1.0);
        count += 1;
    }
    assert_eq!(count, 10);
}

fn echo_service(fail_first: usize, status: u16) -> MockServer {
    MockServer::start("/embed", move |n, body| {
        if n < fail_first {
            return (status, "{\"error\":\"busy\"}".into());
        }
        let request: Value = serde_json::from_str(body).unwrap();
        let vectors: Vec<Vec<f64>> = request["texts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| {
                embed_deterministic(t.as_str().unwrap(), 16)
                    .unwrap()
                    .components()
                    .to_vec()
            })
            .collect();
        (200, json!({"vectors": vectors, "dimension": 16}).to_string())
    })
}

fn config(url: &str) -> RemoteEmbedderConfig {
    RemoteEmbedderConfig {
        endpoint: url.to_string(),
        timeout: Duration::from_secs(5),
        retry: RetryPolicy::no_delay(3),
        ..RemoteEmbedderConfig::default()
    }
}

#[test]
fn remote_preserves_order_and_arity() {
    let server = echo_service(0, 200);
    let embedder = RemoteEmbedder::new(config(&server.url)).unwrap();
    let texts = ["casa", "perro", "de manera limitada"];
    let vectors = embedder.embed_batch(&texts).unwrap();
    assert_eq!(vectors.len(), 3);
    for (t, v) in texts.iter().zip(&vectors) {
        let local = embed_deterministic(t, 16).unwrap();
        assert!((cosine_similarity(&local, v).unwrap().value() - 1.0).abs() < 1e-6);
    }
    assert!(embedder.embed_batch(&[]).unwrap().is_empty());
    assert_eq!(server.calls(), 1);
}

#[test]
fn remote_batches_by_64() {
    let server = echo_service(0, 200);
    let embedder = RemoteEmbedder::new(config(&server.url)).unwrap();
    let owned: Vec<String> = (0..130).map(|i| format!("texto número {i}")).collect();
    let texts: Vec<&str> = owned.iter().map(String::as_str).collect();
    let vectors = embedder.embed_batch(&texts).unwrap();
    assert_eq!(vectors.len(), 130);
    assert_eq!(server.calls(), 3);
    assert_eq!(embedder.call_count(), 3);
    assert_eq!(vectors[129], embed_deterministic("texto número 129", 16).unwrap());
}

#[test]
fn remote_retries_transient_failures() {
    let server = echo_service(2, 503);
    let embedder = RemoteEmbedder::new(config(&server.url)).unwrap();
    assert_eq!(embedder.embed_batch(&["casa"]).unwrap().len(), 1);
    assert_eq!(server.calls(), 3);
}

#[test]
fn remote_gives_up_after_retries() {
    let server = echo_service(usize::MAX, 503);
    let embedder = RemoteEmbedder::new(config(&server.url)).unwrap();
    assert!(matches!(
        embedder.embed_batch(&["casa"]),
        Err(EmbeddingError::Service(_))
    ));
    assert_eq!(server.calls(), 4);
}

#[test]
fn remote_does_not_retry_client_errors() {
    let server = echo_service(usize::MAX, 400);
    let embedder = RemoteEmbedder::new(config(&server.url)).unwrap();
    assert!(matches!(
        embedder.embed_batch(&["casa"]),
        Err(EmbeddingError::Service(_))
    ));
    assert_eq!(server.calls(), 1);
}

#[test]
fn remote_count_mismatch_is_protocol_error() {
    let server = MockServer::start("/embed", |_, _| {
        (200, json!({"vectors": [[1.0, 0.0]], "dimension": 2}).to_string())
    });
    let embedder = RemoteEmbedder::new(config(&server.url)).unwrap();
    assert!(matches!(
        embedder.embed_batch(&["a", "b"]),
        Err(EmbeddingError::Protocol(_))
    ));
    let bad_dim = MockServer::start("/embed", |_, _| {
        (200, json!({"vectors": [[1.0, 0.0]], "dimension": 3}).to_string())
    });
    let embedder = RemoteEmbedder::new(config(&bad_dim.url)).unwrap();
    assert!(matches!(embedder.embed_batch(&["a"]), Err(EmbeddingError::Protocol(_))));
}

#[test]
fn remote_unreachable_is_service_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/embed", listener.local_addr().unwrap());
    drop(listener);
    let mut cfg = config(&url);
    cfg.retry = RetryPolicy::no_delay(1);
    let embedder = RemoteEmbedder::new(cfg).unwrap();
    assert!(matches!(
        embedder.embed_batch(&["casa"]),
        Err(EmbeddingError::Service(_))
    ));
    assert_eq!(embedder.call_count(), 2);
}

#[test]
fn warm_persistent_cache_skips_service() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.jsonl");
    let server = echo_service(0, 200);
    let texts = ["uno", "dos", "tres", "uno"];
    let cold = {
        let cache = EmbeddingCache::open(&path).unwrap();
        let embedder = CachedEmbedder::new(RemoteEmbedder::new(config(&server.url)).unwrap(), &cache);
        embedder.embed_batch(&texts).unwrap()
    };
    assert_eq!(server.calls(), 1);

    let cache = EmbeddingCache::open(&path).unwrap();
    let embedder = CachedEmbedder::new(RemoteEmbedder::new(config(&server.url)).unwrap(), &cache);
    let warm = embedder.embed_batch(&texts).unwrap();
    assert_eq!(embedder.inner().call_count(), 0);
    assert_eq!(server.calls(), 1);
    for (a, b) in cold.iter().zip(&warm) {
        assert_eq!(a.to_le_bytes(), b.to_le_bytes());
    }
}

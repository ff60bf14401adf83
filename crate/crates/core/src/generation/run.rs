use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::provider::{FinishStatus, ProviderError, ProviderRequest, ProviderResponse, TextProvider};
use super::{build_prompt, parse_model_response, FailureReason, GenerationConfig, GenerationError, GenerationFailure};
use crate::ingest::LemmaListRecord;
use crate::model::{Dictionary, ModelError};

/// Splits `records` into consecutive batches of `batch_size` (the last one
/// may be shorter).
pub fn split_batches(records: &[LemmaListRecord], batch_size: usize) -> Vec<&[LemmaListRecord]> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    records.chunks(batch_size).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchStats {
    pub index: usize,
    pub size: usize,
    pub retries: u32,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub finish: Option<FinishStatus>,
    pub provider_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub records: usize,
    pub entries: usize,
    pub failures: BTreeMap<FailureReason, usize>,
    pub total_retries: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub elapsed: Duration,
    pub batches: Vec<BatchStats>,
}

impl RunStats {
    pub fn failure_count(&self) -> usize {
        self.failures.values().sum()
    }
}

#[derive(Debug, Clone)]
pub struct GenerationOutput {
    pub dictionary: Dictionary,
    pub failures: Vec<GenerationFailure>,
    pub stats: RunStats,
    /// Raw reply (or provider error text) per batch, when audit is on.
    pub audit: Vec<String>,
}

struct BatchOutcome {
    result: Result<ProviderResponse, ProviderError>,
    retries: u32,
}

fn dispatch<P: TextProvider>(
    provider: &P,
    requests: &[ProviderRequest],
    config: &GenerationConfig,
) -> Vec<BatchOutcome> {
    let next = AtomicUsize::new(0);
    let workers = config.max_concurrent_batches.min(requests.len());
    let (tx, rx) = mpsc::channel();
    thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                let Some(request) = requests.get(index) else {
                    break;
                };
                let (result, retries) = config
                    .retry
                    .run(|_| provider.complete(request), ProviderError::is_transient);
                if tx.send((index, BatchOutcome { result, retries })).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut slots: Vec<Option<BatchOutcome>> = requests.iter().map(|_| None).collect();
    for (index, outcome) in rx {
        slots[index] = Some(outcome);
    }
    slots
        .into_iter()
        .map(|o| o.expect("every batch index is dispatched exactly once"))
        .collect()
}

/// Generates a dictionary for `records`.
///
/// Every input record ends up either in the dictionary or in the failure
/// list. Only configuration errors abort the run, and they do so before
/// anything is sent to the provider.
pub fn run_generation<P: TextProvider>(
    records: &[LemmaListRecord],
    provider: &P,
    config: &GenerationConfig,
) -> Result<GenerationOutput, GenerationError> {
    config.validate()?;
    let started = Instant::now();
    let batches = split_batches(records, config.batch_size);
    let requests = batches
        .iter()
        .map(|batch| {
            Ok(ProviderRequest {
                prompt: build_prompt(batch, config)?,
                decoding: config.decoding.clone(),
                lemmas: batch.iter().map(|r| r.lemma.clone()).collect(),
            })
        })
        .collect::<Result<Vec<_>, GenerationError>>()?;

    let outcomes = dispatch(provider, &requests, config);

    let mut dictionary = Dictionary::new("generated");
    let mut failures = Vec::new();
    let mut audit = Vec::new();
    let mut batch_stats = Vec::with_capacity(batches.len());
    for (index, (batch, outcome)) in batches.iter().zip(outcomes).enumerate() {
        let mut stats = BatchStats {
            index,
            size: batch.len(),
            retries: outcome.retries,
            prompt_tokens: 0,
            completion_tokens: 0,
            finish: None,
            provider_error: None,
        };
        match outcome.result {
            Ok(response) => {
                stats.prompt_tokens = response.usage.prompt_tokens;
                stats.completion_tokens = response.usage.completion_tokens;
                stats.finish = Some(response.finish.clone());
                let parsed = parse_model_response(&response.text, batch, &config.refusal_patterns);
                for entry in parsed.entries {
                    let (lemma, pos) = (entry.lemma().to_string(), entry.pos().clone());
                    if let Err(ModelError::DuplicateKey { .. }) = dictionary.insert(entry) {
                        failures.push(GenerationFailure {
                            lemma,
                            pos: Some(pos),
                            reason: FailureReason::ParseError,
                            detail: "duplicate (lemma, category) in generated output".into(),
                        });
                    }
                }
                failures.extend(parsed.failures);
                if config.audit {
                    audit.push(response.text);
                }
            }
            Err(err) => {
                let detail = err.to_string();
                failures.extend(batch.iter().map(|r| GenerationFailure {
                    lemma: r.lemma.clone(),
                    pos: r.pos.clone(),
                    reason: FailureReason::ProviderError,
                    detail: detail.clone(),
                }));
                if config.audit {
                    audit.push(format!(
                        "# provider error after {} retries: {detail}\n",
                        outcome.retries
                    ));
                }
                stats.provider_error = Some(detail);
            }
        }
        batch_stats.push(stats);
    }

    let mut by_reason = BTreeMap::new();
    for f in &failures {
        *by_reason.entry(f.reason).or_insert(0) += 1;
    }
    let stats = RunStats {
        records: records.len(),
        entries: dictionary.len(),
        failures: by_reason,
        total_retries: batch_stats.iter().map(|b| u64::from(b.retries)).sum(),
        prompt_tokens: batch_stats.iter().map(|b| b.prompt_tokens).sum(),
        completion_tokens: batch_stats.iter().map(|b| b.completion_tokens).sum(),
        elapsed: started.elapsed(),
        batches: batch_stats,
    };
    Ok(GenerationOutput {
        dictionary,
        failures,
        stats,
        audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::{StubProvider, TokenUsage};
    use crate::model::PosTag;
    use crate::retry::RetryPolicy;
    use std::sync::Mutex;

    fn records(n: usize) -> Vec<LemmaListRecord> {
        (0..n)
            .map(|i| LemmaListRecord::new(&format!("lema{i}"), None).unwrap())
            .collect()
    }

    fn fast_config() -> GenerationConfig {
        GenerationConfig {
            retry: RetryPolicy::no_delay(3),
            ..GenerationConfig::default()
        }
    }

    #[test]
    fn batch_sizes() {
        let recs = records(100);
        let sizes: Vec<usize> = split_batches(&recs, 32).iter().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![32, 32, 32, 4]);
        assert!(split_batches(&[], 32).is_empty());
        let flat: Vec<_> = split_batches(&recs, 7).concat();
        assert_eq!(flat, recs);
    }

    #[test]
    fn full_run_batch_count() {
        // ceil(94_472 / 32) = 2_952.25 → 2_953
        let expected = 94_472usize / 32 + usize::from(94_472 % 32 != 0);
        assert_eq!(expected, 2_953);
        let recs = records(94_472);
        assert_eq!(split_batches(&recs, 32).len(), expected);
    }

    #[test]
    fn reference_run_counts_conserve() {
        let (entries, failures, inputs) = (77_093u32, 17_379u32, 94_472u32);
        assert_eq!(entries + failures, inputs);
    }

    #[test]
    fn four_defined_one_refused() {
        let recs = records(5);
        let mut table: Vec<(String, String)> = (0..4)
            .map(|i| (format!("lema{i}"), format!("lema{i}: Verbo: Hacer {i}.")))
            .collect();
        table.push(("lema4".into(), "lema4: Verbo: Desconocido.".into()));
        let stub = StubProvider::new(table).unwrap();
        let out = run_generation(&recs, &stub, &fast_config()).unwrap();
        assert_eq!(out.dictionary.len(), 4);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].reason, FailureReason::Refusal);
        assert_eq!(out.stats.failures[&FailureReason::Refusal], 1);
    }

    /// Fails the first `failures_left` calls with a transient error.
    struct Flaky {
        inner: StubProvider,
        failures_left: Mutex<u32>,
    }

    impl TextProvider for Flaky {
        fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
            let mut left = self.failures_left.lock().unwrap();
            if *left > 0 {
                *left -= 1;
                return Err(ProviderError::Transient("503".into()));
            }
            self.inner.complete(request)
        }
    }

    #[test]
    fn retries_are_counted() {
        let recs = records(3);
        let table = (0..3).map(|i| (format!("lema{i}"), format!("lema{i}: Adjetivo: Algo {i}.")));
        let flaky = Flaky {
            inner: StubProvider::new(table).unwrap(),
            failures_left: Mutex::new(2),
        };
        let out = run_generation(&recs, &flaky, &fast_config()).unwrap();
        assert_eq!(out.dictionary.len(), 3);
        assert_eq!(out.stats.batches.len(), 1);
        assert_eq!(out.stats.batches[0].retries, 2);
        assert_eq!(out.stats.total_retries, 2);
    }

    #[test]
    fn exhausted_retries_become_provider_errors() {
        let recs = records(40);
        let flaky = Flaky {
            inner: StubProvider::default(),
            failures_left: Mutex::new(u32::MAX),
        };
        let config = GenerationConfig {
            retry: RetryPolicy::no_delay(1),
            max_concurrent_batches: 1,
            audit: true,
            ..GenerationConfig::default()
        };
        let out = run_generation(&recs, &flaky, &config).unwrap();
        assert!(out.dictionary.is_empty());
        assert_eq!(out.failures.len(), 40);
        assert!(out.failures.iter().all(|f| f.reason == FailureReason::ProviderError));
        assert_eq!(out.audit.len(), 2);
        assert_eq!(
            out.stats.batches.iter().map(|b| b.retries).collect::<Vec<_>>(),
            vec![1, 1]
        );
    }

    #[test]
    fn config_errors_abort_before_dispatch() {
        struct Panicking;
        impl TextProvider for Panicking {
            fn complete(&self, _: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
                panic!("must not be called");
            }
        }
        let recs = records(3);
        for config in [
            GenerationConfig {
                batch_size: 0,
                ..fast_config()
            },
            GenerationConfig {
                max_concurrent_batches: 0,
                ..fast_config()
            },
            GenerationConfig {
                prompt_template: "nothing".into(),
                ..fast_config()
            },
        ] {
            assert!(matches!(
                run_generation(&recs, &Panicking, &config),
                Err(GenerationError::Config(_))
            ));
        }
    }

    #[test]
    fn assembly_order_is_independent_of_concurrency() {
        let recs = records(70);
        let table = (0..70).map(|i| (format!("lema{i}"), format!("lema{i}: Verbo: Acción {i}.")));
        let stub = StubProvider::new(table).unwrap();
        let serial = run_generation(
            &recs,
            &stub,
            &GenerationConfig {
                max_concurrent_batches: 1,
                batch_size: 8,
                ..fast_config()
            },
        )
        .unwrap();
        let parallel = run_generation(
            &recs,
            &stub,
            &GenerationConfig {
                max_concurrent_batches: 8,
                batch_size: 8,
                ..fast_config()
            },
        )
        .unwrap();
        assert_eq!(serial.dictionary, parallel.dictionary);
        assert_eq!(serial.failures, parallel.failures);
    }

    #[test]
    fn cross_batch_duplicate_key_is_a_failure() {
        let recs = vec![
            LemmaListRecord::new("banco", None).unwrap(),
            LemmaListRecord::new("banco", Some(PosTag::parse("Nombre masculino"))).unwrap(),
        ];
        let stub = StubProvider::new([("banco".to_string(), "banco: Nombre masculino: Asiento.".to_string())]).unwrap();
        let config = GenerationConfig {
            batch_size: 1,
            ..fast_config()
        };
        let out = run_generation(&recs, &stub, &config).unwrap();
        assert_eq!(out.dictionary.len() + out.failures.len(), 2);
        assert_eq!(out.failures[0].reason, FailureReason::ParseError);
    }

    #[test]
    fn token_usage_is_summed() {
        struct Counting;
        impl TextProvider for Counting {
            fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
                Ok(ProviderResponse {
                    text: request.lemmas.iter().map(|l| format!("{l}: Verbo: x.\n")).collect(),
                    finish: FinishStatus::Stop,
                    usage: TokenUsage {
                        prompt_tokens: 10,
                        completion_tokens: 5,
                    },
                })
            }
        }
        let out = run_generation(&records(65), &Counting, &fast_config()).unwrap();
        assert_eq!(out.stats.batches.len(), 3);
        assert_eq!(out.stats.prompt_tokens, 30);
        assert_eq!(out.stats.completion_tokens, 15);
        assert_eq!(out.stats.entries, 65);
    }
}

//! Lemma list to dictionary: batching, prompting, reply parsing and failure
//! accounting against a pluggable text-generation provider.

pub(crate) mod http;
mod prompt;
mod provider;
mod reply;
mod run;
mod stub;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::PosTag;

pub use http::{ChatCompletionsClient, ChatCompletionsConfig};
pub use prompt::{build_prompt, FewShotExample, BATCH_PLACEHOLDER, DEFAULT_TEMPLATE, FEWSHOT_PLACEHOLDER};
pub use provider::{
    DecodingParams, FinishStatus, ProviderError, ProviderRequest, ProviderResponse, TextProvider, TokenUsage,
};
pub use reply::{detect_refusal, parse_model_response, ParsedBatch, RefusalPatterns, DEFAULT_REFUSAL_PATTERNS};
pub use run::{run_generation, split_batches, BatchStats, GenerationOutput, RunStats};
pub use stub::StubProvider;

use crate::retry::RetryPolicy;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenerationError {
    #[error("invalid generation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    ProviderError,
    ParseError,
    Refusal,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureReason::ProviderError => "provider_error",
            FailureReason::ParseError => "parse_error",
            FailureReason::Refusal => "refusal",
        })
    }
}

/// A lemma the pipeline could not define.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationFailure {
    pub lemma: String,
    pub pos: Option<PosTag>,
    pub reason: FailureReason,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub batch_size: usize,
    pub retry: RetryPolicy,
    pub max_concurrent_batches: usize,
    pub prompt_template: String,
    pub fewshot_examples: Vec<FewShotExample>,
    pub decoding: DecodingParams,
    pub refusal_patterns: RefusalPatterns,
    /// Keep every raw reply in the output for auditing.
    pub audit: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            batch_size: 32,
            retry: RetryPolicy::new(3, Duration::from_secs(2)),
            max_concurrent_batches: 4,
            prompt_template: DEFAULT_TEMPLATE.to_string(),
            fewshot_examples: FewShotExample::defaults(),
            decoding: DecodingParams::default(),
            refusal_patterns: RefusalPatterns::default(),
            audit: false,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.batch_size == 0 {
            return Err(GenerationError::Config("batch_size must be at least 1".into()));
        }
        if self.max_concurrent_batches == 0 {
            return Err(GenerationError::Config(
                "max_concurrent_batches must be at least 1".into(),
            ));
        }
        prompt::check_template(&self.prompt_template, !self.fewshot_examples.is_empty())
    }
}

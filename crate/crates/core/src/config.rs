//! TOML configuration shared by every command.
//!
//! All sections and keys are optional. Relative paths are resolved against
//! the directory holding the configuration file.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::AlignmentOptions;
use crate::embedding::{RemoteEmbedderConfig, DEFAULT_DIMENSION};
use crate::error_analysis::ErrorAnalysisConfig;
use crate::generation::{
    ChatCompletionsConfig, DecodingParams, FewShotExample, GenerationConfig, RefusalPatterns, DEFAULT_REFUSAL_PATTERNS,
    DEFAULT_TEMPLATE,
};
use crate::retry::RetryPolicy;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    ChatCompletions,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSection {
    pub kind: ProviderKind,
    pub endpoint: String,
    /// Environment variable holding the API token.
    pub credential_env: Option<String>,
    pub timeout_secs: u64,
    /// JSON object of lemma → reply text, for `kind = "stub"`.
    pub stub_replies: Option<PathBuf>,
}

impl Default for ProviderSection {
    fn default() -> Self {
        ProviderSection {
            kind: ProviderKind::ChatCompletions,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            credential_env: Some("OPENAI_API_KEY".into()),
            timeout_secs: 120,
            stub_replies: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    pub batch_size: usize,
    pub max_retries: u32,
    pub retry_base_delay_ms: u64,
    pub max_concurrent_batches: usize,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for GenerationSection {
    fn default() -> Self {
        let decoding = DecodingParams::default();
        GenerationSection {
            batch_size: 32,
            max_retries: 3,
            retry_base_delay_ms: 2000,
            max_concurrent_batches: 4,
            model: decoding.model,
            temperature: decoding.temperature,
            max_output_tokens: decoding.max_output_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSection {
    /// Replaces the built-in instruction template.
    pub template_path: Option<PathBuf>,
    /// JSON list of few-shot examples replacing the built-in ones.
    pub fewshot_path: Option<PathBuf>,
    pub fewshot_enabled: bool,
    pub refusal_patterns: Vec<String>,
}

impl Default for PromptSection {
    fn default() -> Self {
        PromptSection {
            template_path: None,
            fewshot_path: None,
            fewshot_enabled: true,
            refusal_patterns: DEFAULT_REFUSAL_PATTERNS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    Deterministic,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub kind: EmbedderKind,
    pub dimension: usize,
    pub endpoint: String,
    pub model: String,
    pub batch_size: usize,
    pub max_concurrent_calls: usize,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub retry_base_delay_ms: u64,
    pub cache_path: Option<PathBuf>,
    pub include_examples: bool,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        let remote = RemoteEmbedderConfig::default();
        EmbeddingSection {
            kind: EmbedderKind::Deterministic,
            dimension: DEFAULT_DIMENSION,
            endpoint: remote.endpoint,
            model: remote.model,
            batch_size: remote.batch_size,
            max_concurrent_calls: remote.max_concurrent_calls,
            timeout_secs: remote.timeout.as_secs(),
            max_retries: remote.retry.max_retries,
            retry_base_delay_ms: remote.retry.base_delay.as_millis() as u64,
            cache_path: None,
            include_examples: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    /// Worker threads for alignment and error analysis; 0 picks automatically.
    pub threads: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub provider: ProviderSection,
    pub generation: GenerationSection,
    pub prompt: PromptSection,
    pub embedding: EmbeddingSection,
    pub errors: ErrorAnalysisConfig,
    pub evaluation: EvaluationSection,
}

fn resolve(base: &Path, path: &mut Option<PathBuf>) {
    if let Some(p) = path {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })
}

impl Config {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Config, ConfigError> {
        let mut config: Config = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: base_dir.to_path_buf(),
            message: e.message().to_string(),
        })?;
        resolve(base_dir, &mut config.provider.stub_replies);
        resolve(base_dir, &mut config.prompt.template_path);
        resolve(base_dir, &mut config.prompt.fewshot_path);
        resolve(base_dir, &mut config.embedding.cache_path);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Config::from_toml(&text, base).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.generation.batch_size == 0 {
            return invalid("generation.batch_size must be at least 1");
        }
        if self.generation.max_concurrent_batches == 0 {
            return invalid("generation.max_concurrent_batches must be at least 1");
        }
        if self.embedding.dimension == 0 {
            return invalid("embedding.dimension must be at least 1");
        }
        if self.embedding.batch_size == 0 || self.embedding.max_concurrent_calls == 0 {
            return invalid("embedding.batch_size and embedding.max_concurrent_calls must be at least 1");
        }
        if self.provider.kind == ProviderKind::Stub && self.provider.stub_replies.is_none() {
            return invalid("provider.kind = \"stub\" needs provider.stub_replies");
        }
        self.errors.validate().map_err(ConfigError::Invalid)
    }

    /// Reads template and few-shot files and checks the result.
    pub fn generation_config(&self) -> Result<GenerationConfig, ConfigError> {
        let prompt_template = match &self.prompt.template_path {
            Some(path) => read(path)?,
            None => DEFAULT_TEMPLATE.to_string(),
        };
        let fewshot_examples = if !self.prompt.fewshot_enabled {
            Vec::new()
        } else if let Some(path) = &self.prompt.fewshot_path {
            serde_json::from_str(&read(path)?).map_err(|e| ConfigError::Parse {
                path: path.clone(),
                message: e.to_string(),
            })?
        } else {
            FewShotExample::defaults()
        };
        let g = &self.generation;
        let config = GenerationConfig {
            batch_size: g.batch_size,
            retry: RetryPolicy::new(g.max_retries, Duration::from_millis(g.retry_base_delay_ms)),
            max_concurrent_batches: g.max_concurrent_batches,
            prompt_template,
            fewshot_examples,
            decoding: DecodingParams {
                model: g.model.clone(),
                temperature: g.temperature,
                max_output_tokens: g.max_output_tokens,
            },
            refusal_patterns: RefusalPatterns::new(&self.prompt.refusal_patterns),
            audit: false,
        };
        config.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(config)
    }

    pub fn chat_completions_config(&self) -> ChatCompletionsConfig {
        ChatCompletionsConfig {
            endpoint: self.provider.endpoint.clone(),
            credential_env: self.provider.credential_env.clone(),
            timeout: Duration::from_secs(self.provider.timeout_secs),
        }
    }

    pub fn remote_embedder_config(&self) -> RemoteEmbedderConfig {
        let e = &self.embedding;
        RemoteEmbedderConfig {
            endpoint: e.endpoint.clone(),
            model: e.model.clone(),
            batch_size: e.batch_size,
            max_concurrent_calls: e.max_concurrent_calls,
            timeout: Duration::from_secs(e.timeout_secs),
            retry: RetryPolicy::new(e.max_retries, Duration::from_millis(e.retry_base_delay_ms)),
        }
    }

    pub fn alignment_options(&self) -> AlignmentOptions {
        AlignmentOptions {
            include_examples: self.embedding.include_examples,
            threads: self.evaluation.threads,
        }
    }

    /// The configuration as recorded in reports. Thread count and cache
    /// location are left out: they never change results.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("evaluation");
        }
        if let Some(embedding) = value.get_mut("embedding").and_then(|v| v.as_object_mut()) {
            embedding.remove("cache_path");
        }
        value
    }
}

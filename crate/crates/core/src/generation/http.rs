use std::env;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::provider::{FinishStatus, ProviderError, ProviderRequest, ProviderResponse, TextProvider, TokenUsage};

#[derive(Debug, Clone, PartialEq)]
pub struct ChatCompletionsConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    pub credential_env: Option<String>,
    pub timeout: Duration,
}

/// Client for chat-completions style endpoints (`messages` in,
/// `choices[0].message.content` out).
pub struct ChatCompletionsClient {
    agent: ureq::Agent,
    endpoint: String,
    token: Option<String>,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl ChatCompletionsClient {
    /// Fails when the configured credential variable is not set.
    pub fn new(config: &ChatCompletionsConfig) -> Result<Self, ProviderError> {
        let token = match &config.credential_env {
            Some(var) => Some(
                env::var(var)
                    .map_err(|_| ProviderError::Fatal(format!("credential environment variable `{var}` is not set")))?,
            ),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(ChatCompletionsClient {
            agent,
            endpoint: config.endpoint.clone(),
            token,
        })
    }
}

pub(crate) fn classify_status(status: u16, body: &str) -> ProviderError {
    let snippet: String = body.chars().take(200).collect();
    let message = format!("HTTP {status}: {snippet}");
    if status == 408 || status == 429 || (500..=599).contains(&status) {
        ProviderError::Transient(message)
    } else {
        ProviderError::Fatal(message)
    }
}

pub(crate) fn classify_transport(err: ureq::Error) -> ProviderError {
    match err {
        ureq::Error::BadUri(_) | ureq::Error::RequireHttpsOnly(_) | ureq::Error::InvalidProxyUrl => {
            ProviderError::Fatal(err.to_string())
        }
        other => ProviderError::Transient(other.to_string()),
    }
}

impl TextProvider for ChatCompletionsClient {
    fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let body = json!({
            "model": request.decoding.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.decoding.temperature,
            "max_tokens": request.decoding.max_output_tokens,
        });
        let mut call = self.agent.post(&self.endpoint);
        if let Some(token) = &self.token {
            call = call.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = call.send_json(&body).map_err(classify_transport)?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(classify_transport)?;
        if status != 200 {
            return Err(classify_status(status, &text));
        }
        let completion: Completion =
            serde_json::from_str(&text).map_err(|e| ProviderError::Fatal(format!("malformed completion body: {e}")))?;
        let choice = completion
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ProviderError::Fatal("completion has no choices".into()))?;
        let usage = completion
            .usage
            .map(|u| TokenUsage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            })
            .unwrap_or_default();
        Ok(ProviderResponse {
            text: choice.message.content.unwrap_or_default(),
            finish: FinishStatus::from_reason(choice.finish_reason.as_deref()),
            usage,
        })
    }
}

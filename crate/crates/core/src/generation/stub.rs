use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::provider::{FinishStatus, ProviderError, ProviderRequest, ProviderResponse, TextProvider, TokenUsage};
use crate::model::normalize_lemma;

/// File-backed provider for hermetic runs: a JSON object mapping each lemma
/// to the reply text the model would have produced for it. Lemmas absent
/// from the table are left out of the reply.
#[derive(Debug, Clone, Default)]
pub struct StubProvider {
    replies: BTreeMap<String, String>,
}

impl StubProvider {
    pub fn new(replies: impl IntoIterator<Item = (String, String)>) -> Result<Self, ProviderError> {
        let replies = replies
            .into_iter()
            .map(|(lemma, reply)| {
                normalize_lemma(&lemma)
                    .map(|l| (l, reply))
                    .map_err(|e| ProviderError::Fatal(format!("stub table: {e}")))
            })
            .collect::<Result<_, _>>()?;
        Ok(StubProvider { replies })
    }

    pub fn from_path(path: &Path) -> Result<Self, ProviderError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ProviderError::Fatal(format!("cannot read stub table {}: {e}", path.display())))?;
        let table: BTreeMap<String, String> = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Fatal(format!("invalid stub table {}: {e}", path.display())))?;
        StubProvider::new(table)
    }
}

impl TextProvider for StubProvider {
    fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let text = request
            .lemmas
            .iter()
            .filter_map(|lemma| self.replies.get(lemma))
            .map(|reply| reply.trim_end())
            .collect::<Vec<_>>()
            .join("\n");
        let usage = TokenUsage {
            prompt_tokens: request.prompt.split_whitespace().count() as u64,
            completion_tokens: text.split_whitespace().count() as u64,
        };
        Ok(ProviderResponse {
            text,
            finish: FinishStatus::Stop,
            usage,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::DecodingParams;

    #[test]
    fn answers_known_lemmas_only() {
        let stub = StubProvider::new([
            ("Casa".to_string(), "casa: Nombre femenino: Edificio.\n".to_string()),
            ("gato".to_string(), "gato: Nombre masculino: Felino.".to_string()),
        ])
        .unwrap();
        let response = stub
            .complete(&ProviderRequest {
                prompt: "p".into(),
                decoding: DecodingParams::default(),
                lemmas: vec!["casa".into(), "perro".into(), "gato".into()],
            })
            .unwrap();
        assert_eq!(
            response.text,
            "casa: Nombre femenino: Edificio.\ngato: Nombre masculino: Felino."
        );
        assert_eq!(response.finish, FinishStatus::Stop);
    }
}

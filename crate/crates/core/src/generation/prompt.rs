use serde::{Deserialize, Serialize};

use super::{GenerationConfig, GenerationError};
use crate::ingest::LemmaListRecord;
use crate::model::PosTag;

pub const BATCH_PLACEHOLDER: &str = "{{BATCH}}";
pub const FEWSHOT_PLACEHOLDER: &str = "{{FEWSHOT}}";

pub const DEFAULT_TEMPLATE: &str = "\
Eres un lexicógrafo que redacta un diccionario monolingüe del español.
Para cada lema de la lista final escribe su entrada completa:
- la categoría gramatical (Nombre masculino, Nombre femenino, Adjetivo, Verbo o Adverbio);
- todas las acepciones que conozcas, de la más usada a la menos usada;
- una oración de ejemplo para cada acepción.
No emplees el propio lema dentro de la definición.
Si no conoces un lema, escribe \"Desconocido\" como definición.

Responde solo con las entradas, con este formato:
lema: categoría: definición. Ejemplo: oración.
Cada acepción adicional va en una línea aparte, numerada:
2. definición. Ejemplo: oración.

Ejemplos de respuesta:
{{FEWSHOT}}

Lemas:
{{BATCH}}
";

/// One demonstration sense shown to the model in the expected reply grammar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FewShotExample {
    pub lemma: String,
    pub pos: PosTag,
    pub definition: String,
    pub example: String,
}

impl FewShotExample {
    pub fn new(lemma: &str, pos: &str, definition: &str, example: &str) -> Self {
        FewShotExample {
            lemma: lemma.to_string(),
            pos: PosTag::parse(pos),
            definition: definition.to_string(),
            example: example.to_string(),
        }
    }

    pub fn defaults() -> Vec<FewShotExample> {
        vec![
            FewShotExample::new(
                "mesa",
                "Nombre femenino",
                "Mueble formado por un tablero horizontal sostenido por una o varias patas.",
                "Dejó las llaves sobre la mesa de la cocina.",
            ),
            FewShotExample::new(
                "correr",
                "Verbo",
                "Desplazarse con rapidez moviendo las piernas.",
                "Cada mañana corre por la orilla del río.",
            ),
        ]
    }
}

pub(super) fn check_template(template: &str, needs_fewshot: bool) -> Result<(), GenerationError> {
    let batch = template.matches(BATCH_PLACEHOLDER).count();
    if batch != 1 {
        return Err(GenerationError::Config(format!(
            "prompt template must contain {BATCH_PLACEHOLDER} exactly once (found {batch})"
        )));
    }
    let fewshot = template.matches(FEWSHOT_PLACEHOLDER).count();
    if fewshot > 1 || (needs_fewshot && fewshot == 0) {
        return Err(GenerationError::Config(format!(
            "prompt template must contain {FEWSHOT_PLACEHOLDER} once when few-shot examples are configured (found {fewshot})"
        )));
    }
    Ok(())
}

fn render_fewshot(examples: &[FewShotExample]) -> String {
    let mut lines = Vec::new();
    let mut previous: Option<&str> = None;
    let mut ordinal = 1;
    for ex in examples {
        if previous == Some(ex.lemma.as_str()) {
            ordinal += 1;
            lines.push(format!("{ordinal}. {} Ejemplo: {}", ex.definition, ex.example));
        } else {
            ordinal = 1;
            lines.push(format!(
                "{}: {}: {} Ejemplo: {}",
                ex.lemma, ex.pos, ex.definition, ex.example
            ));
        }
        previous = Some(ex.lemma.as_str());
    }
    lines.join("\n")
}

fn render_batch(batch: &[LemmaListRecord]) -> String {
    batch
        .iter()
        .map(|r| match &r.pos {
            Some(pos) => format!("{} — {}", r.lemma, pos.raw_label()),
            None => r.lemma.clone(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Renders the prompt for one batch. Output depends only on the inputs.
pub fn build_prompt(batch: &[LemmaListRecord], config: &GenerationConfig) -> Result<String, GenerationError> {
    render_prompt(batch, &config.prompt_template, &config.fewshot_examples)
}

fn render_prompt(
    batch: &[LemmaListRecord],
    template: &str,
    fewshot: &[FewShotExample],
) -> Result<String, GenerationError> {
    if batch.is_empty() {
        return Err(GenerationError::Config(
            "cannot build a prompt for an empty batch".into(),
        ));
    }
    check_template(template, !fewshot.is_empty())?;
    Ok(template
        .replace(FEWSHOT_PLACEHOLDER, &render_fewshot(fewshot))
        .replace(BATCH_PLACEHOLDER, &render_batch(batch)))
}

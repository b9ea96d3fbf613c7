use serde::{Deserialize, Serialize};

use crate::kg::{LISTED_RELATIONS, RELATION_EXAMPLES};

const LLAMA_TEMPLATE: &str = include_str!("../../data/prompts/llama_style.txt");
const CHAT_TEMPLATE: &str = include_str!("../../data/prompts/chat_style.txt");
const SAMPLE_ENTITIES: &str = include_str!("../../data/prompts/sample_entities.txt");

/// Sentence every template must carry.
pub const NO_REPEAT_INSTRUCTION: &str = "Make sure there are no repeated triples.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    /// Relations with worked examples plus a list of sample entities.
    LlamaStyle,
    /// Relations only, with the instruction to prefer numeric tails.
    ChatStyle,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::LlamaStyle => "llama_style",
            TemplateId::ChatStyle => "chat_style",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "llama_style" | "llama" => Some(TemplateId::LlamaStyle),
            "chat_style" | "chat" => Some(TemplateId::ChatStyle),
            _ => None,
        }
    }

    fn template(self) -> &'static str {
        match self {
            TemplateId::LlamaStyle => LLAMA_TEMPLATE,
            TemplateId::ChatStyle => CHAT_TEMPLATE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptConfigError {
    MissingSampleEntities,
    ZeroMaxTriples,
    MissingInstruction,
}

impl std::fmt::Display for PromptConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::MissingSampleEntities => f.write_str("llama_style prompts need a sample entities block"),
            Self::ZeroMaxTriples => f.write_str("max_triples_per_call must be positive"),
            Self::MissingInstruction => write!(f, "template lacks {NO_REPEAT_INSTRUCTION:?}"),
        }
    }
}

impl std::error::Error for PromptConfigError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptConfig {
    template_id: TemplateId,
    relations_block: String,
    sample_entities_block: Option<String>,
    max_triples_per_call: usize,
}

/// One relation per line with its example triple.
pub fn relations_block_with_examples() -> String {
    RELATION_EXAMPLES.iter().map(|(h, r, t)| format!("- {r}: ({h}, {r}, {t})")).collect::<Vec<_>>().join("\n")
}

/// The relation names as listed, comma separated.
pub fn relations_block_names() -> String {
    LISTED_RELATIONS.join(", ")
}

impl PromptConfig {
    pub fn new(
        template_id: TemplateId,
        relations_block: String,
        sample_entities_block: Option<String>,
        max_triples_per_call: usize,
    ) -> Result<Self, PromptConfigError> {
        let sample_entities_block = sample_entities_block.filter(|s| !s.trim().is_empty());
        if template_id == TemplateId::LlamaStyle && sample_entities_block.is_none() {
            return Err(PromptConfigError::MissingSampleEntities);
        }
        if max_triples_per_call == 0 {
            return Err(PromptConfigError::ZeroMaxTriples);
        }
        if !template_id.template().contains(NO_REPEAT_INSTRUCTION) {
            return Err(PromptConfigError::MissingInstruction);
        }
        Ok(Self { template_id, relations_block, sample_entities_block, max_triples_per_call })
    }

    pub fn llama_style() -> Self {
        Self::new(TemplateId::LlamaStyle, relations_block_with_examples(), Some(SAMPLE_ENTITIES.trim().to_owned()), 50)
            .expect("bundled llama_style config is valid")
    }

    pub fn chat_style() -> Self {
        Self::new(TemplateId::ChatStyle, relations_block_names(), None, 50).expect("bundled chat_style config is valid")
    }

    pub fn for_template(id: TemplateId) -> Self {
        match id {
            TemplateId::LlamaStyle => Self::llama_style(),
            TemplateId::ChatStyle => Self::chat_style(),
        }
    }

    pub fn with_max_triples(mut self, n: usize) -> Result<Self, PromptConfigError> {
        if n == 0 {
            return Err(PromptConfigError::ZeroMaxTriples);
        }
        self.max_triples_per_call = n;
        Ok(self)
    }

    pub fn template_id(&self) -> TemplateId {
        self.template_id
    }

    pub fn relations_block(&self) -> &str {
        &self.relations_block
    }

    pub fn sample_entities_block(&self) -> Option<&str> {
        self.sample_entities_block.as_deref()
    }

    pub fn max_triples_per_call(&self) -> usize {
        self.max_triples_per_call
    }

    /// The instruction part of the prompt, template placeholders filled.
    pub fn render_instructions(&self) -> String {
        self.template_id
            .template()
            .trim_end()
            .replace("{relations}", &self.relations_block)
            .replace("{sample_entities}", self.sample_entities_block.as_deref().unwrap_or(""))
    }

    /// Full user message for one chunk of one page.
    pub fn render(&self, page_title: &str, chunk: &str) -> String {
        format!(
            "{}\n\nText from the Wikipedia article \"{}\":\n{}\n\nReturn at most {} triples, one per line, as (head, relation, tail).",
            self.render_instructions(),
            page_title,
            chunk.trim(),
            self.max_triples_per_call
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_templates_validate() {
        for id in [TemplateId::LlamaStyle, TemplateId::ChatStyle] {
            let c = PromptConfig::for_template(id);
            let text = c.render("Solar power", "Solar panels convert sunlight.");
            assert!(text.contains(NO_REPEAT_INSTRUCTION));
            assert!(text.contains("HasCapacity"));
            assert!(text.contains("Solar panels convert sunlight."));
            assert!(!text.contains("{relations}"));
        }
        assert!(PromptConfig::llama_style().render_instructions().contains("Permaculture"));
    }

    #[test]
    fn llama_style_needs_entities() {
        let err = PromptConfig::new(TemplateId::LlamaStyle, relations_block_names(), Some("  ".into()), 5);
        assert_eq!(err.unwrap_err(), PromptConfigError::MissingSampleEntities);
        assert!(PromptConfig::new(TemplateId::ChatStyle, String::new(), None, 0).is_err());
    }

    #[test]
    fn examples_block_lists_every_row() {
        let block = relations_block_with_examples();
        assert_eq!(block.lines().count(), 46);
        assert!(block.contains("- HasCapacity: (Wind Energy, HasCapacity, 63 GW)"));
    }
}

//! System prompts that instruct a chat model to annotate text with the three
//! whitelisted tags.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::AnnotationKind;

const HEADER: &str = "You are an intelligent reader helper and you will be given a string of text in string format, please annotate it by adding tags following these instructions:";

/// Rules 1-3: what to mark, one rule per tag.
const CATEGORY_RULES: [&str; 3] = [
    "Please annotate every date, number, location, and name of people or events in the paragraph by adding <strong> tags around them.",
    "Please highlight sentences and phrases in the paragraph that can summarize the core content of the paragraph or serve as a conclusion to the description by adding <mark> tags around them.",
    "Please underline sentences and phrases in the paragraph that are unusual or need to be particularly noted by adding <u> tags around them.",
];

/// Rules 4-9: output discipline, shared by default and custom prompts.
const RETAINED_RULES: [&str; 6] = [
    "You can add as many <mark>, <strong>, or <u> tags in one paragraph as necessary to highlight or bold important text.",
    "Please make sure to use and only use the 3 types of annotations above to annotate each paragraph of the text.",
    "Don't make the highlights or underlines too long or too often if it is not necessary.",
    PRESERVATION_RULE,
    "Your output should only contain the marked text with added tags, which can be directly presented in HTML. Don\u{2019}t add anything else like \"Here is your output\" and so on.",
    "Keep the original language; i.e., if the context was given in Chinese, your output should be Chinese as well.",
];

/// The content-preservation rule, quoted back to the model on a retry.
pub const PRESERVATION_RULE: &str = "You are allowed to add only the above previously mentioned HTML tags, and that's the only change you can make to the text. YOUR OUTPUT MUST KEEP THE CONTENT OF THE ARTICLE THE SAME AS THE ORIGINAL ONE.";

pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 2048;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("custom mode needs at least one category")]
    EmptyCategories,
    #[error("category description is empty")]
    EmptyDescription,
    #[error("temperature must be a finite number >= 0")]
    Temperature,
    #[error("max output tokens must be positive")]
    MaxOutputTokens,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    #[default]
    Default,
    Custom,
}

/// A user-chosen kind of information and the mark to put on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub description: String,
    #[serde(rename = "tag")]
    pub kind: AnnotationKind,
}

impl Category {
    pub fn new(description: impl Into<String>, kind: AnnotationKind) -> Self {
        Self {
            description: description.into(),
            kind,
        }
    }
}

/// Prompt selection plus generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    mode: PromptMode,
    categories: Vec<Category>,
    temperature: f64,
    max_output_tokens: u32,
}

impl Default for PromptSpec {
    fn default() -> Self {
        Self {
            mode: PromptMode::Default,
            categories: Vec::new(),
            temperature: 0.0,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }
}

impl PromptSpec {
    pub fn custom(categories: Vec<Category>) -> Result<Self, PromptError> {
        if categories.is_empty() {
            return Err(PromptError::EmptyCategories);
        }
        if categories.iter().any(|c| c.description.trim().is_empty()) {
            return Err(PromptError::EmptyDescription);
        }
        Ok(Self {
            mode: PromptMode::Custom,
            categories,
            ..Self::default()
        })
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self, PromptError> {
        if !temperature.is_finite() || temperature < 0.0 {
            return Err(PromptError::Temperature);
        }
        self.temperature = temperature;
        Ok(self)
    }

    pub fn with_max_output_tokens(mut self, max_output_tokens: u32) -> Result<Self, PromptError> {
        if max_output_tokens == 0 {
            return Err(PromptError::MaxOutputTokens);
        }
        self.max_output_tokens = max_output_tokens;
        Ok(self)
    }

    pub fn mode(&self) -> PromptMode {
        self.mode
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn max_output_tokens(&self) -> u32 {
        self.max_output_tokens
    }

    /// The system prompt for this spec.
    pub fn system_prompt(&self) -> String {
        match self.mode {
            PromptMode::Default => build_default_prompt(),
            PromptMode::Custom => build_custom_prompt(self).expect("custom specs are validated on construction"),
        }
    }
}

fn assemble<'a>(rules: impl IntoIterator<Item = std::borrow::Cow<'a, str>>) -> String {
    let mut out = String::from(HEADER);
    for (i, rule) in rules.into_iter().enumerate() {
        out.push_str(&format!("\n\n{}. {}", i + 1, rule));
    }
    out
}

pub fn build_default_prompt() -> String {
    assemble(CATEGORY_RULES.iter().chain(&RETAINED_RULES).map(|r| (*r).into()))
}

/// Replaces the three built-in category rules with one rule per category,
/// in order, followed by the output-discipline rules renumbered.
pub fn build_custom_prompt(spec: &PromptSpec) -> Result<String, PromptError> {
    if spec.categories.is_empty() {
        return Err(PromptError::EmptyCategories);
    }
    let generated = spec.categories.iter().map(|c| {
        format!(
            "Please annotate {} by adding <{}> tags around them.",
            c.description.trim(),
            c.kind.tag()
        )
        .into()
    });
    Ok(assemble(generated.chain(RETAINED_RULES.iter().map(|r| (*r).into()))))
}

/// Follow-up sent after a reply that changed the text.
pub fn corrective_message(original_fragment: &str, produced_fragment: &str) -> String {
    let change = match (original_fragment.is_empty(), produced_fragment.is_empty()) {
        (true, _) => format!("you added \"{produced_fragment}\""),
        (_, true) => format!("you removed \"{original_fragment}\""),
        _ => format!("you changed \"{original_fragment}\" to \"{produced_fragment}\""),
    };
    format!(
        "Your output changed the content of the text: {change}. Remember: {PRESERVATION_RULE} \
         Please annotate the original text again, adding only the tags and changing nothing else."
    )
}

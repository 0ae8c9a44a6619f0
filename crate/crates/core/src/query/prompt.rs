use serde::{Deserialize, Serialize};

use crate::corpus::ParagraphId;
use crate::error::{Error, Result};
use crate::text::normalize_whitespace;

/// The exact string the model is told to answer when passages lack the
/// requested information.
pub const REFUSAL_SENTINEL: &str = "I cannot answer that.";

const PREAMBLE: &str = " You are an assistant for a researcher working at the intersection of additive manufacturing and machine learning. Your goal is to help the researcher find and distill significant information in a scientific paper. To this end, answer the following triple-backtick delimited query from the researcher:\n    ``` ";
const AFTER_QUERY: &str = " ```\n To answer the question, use the following passages from the paper. If there is no information in the passages that answers the question, write \"I cannot answer that.\"\n ";
const CLOSING: &str = "\n ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    /// 0-based position in the prompt.
    pub index: usize,
    pub text: String,
    #[serde(default)]
    pub paragraph_id: Option<ParagraphId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub query: String,
    pub passages: Vec<Passage>,
    pub rendered: String,
}

/// Renders the query section followed by one `- Passage {i}: {text}` line
/// per passage. Passage whitespace is collapsed so every passage occupies
/// exactly one line.
pub fn create_prompt(query: &str, retrieved: &[&str]) -> Result<Prompt> {
    create_prompt_with_ids(
        query,
        retrieved.iter().map(|t| (t.to_string(), None)).collect(),
    )
}

pub fn create_prompt_with_ids(
    query: &str,
    retrieved: Vec<(String, Option<ParagraphId>)>,
) -> Result<Prompt> {
    if query.trim().is_empty() {
        return Err(Error::InvalidArgument("query must be non-empty".into()));
    }
    if retrieved.is_empty() {
        return Err(Error::InvalidArgument("at least one passage is required".into()));
    }
    let passages: Vec<Passage> = retrieved
        .into_iter()
        .enumerate()
        .map(|(index, (text, paragraph_id))| Passage {
            index,
            text: normalize_whitespace(&text),
            paragraph_id,
        })
        .collect();
    let lines: Vec<String> = passages
        .iter()
        .map(|p| format!("- Passage {}: {}", p.index, p.text))
        .collect();
    let rendered = format!("{PREAMBLE}{query}{AFTER_QUERY}{}{CLOSING}", lines.join("\n"));
    Ok(Prompt {
        query: query.to_owned(),
        passages,
        rendered,
    })
}

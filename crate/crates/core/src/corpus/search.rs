use regex::RegexBuilder;
use serde::{Deserialize, Serialize};

use super::Paragraph;
use crate::error::{Error, Result};

/// Byte range `[start, end)` into the paragraph text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub paragraph: Paragraph,
    pub spans: Vec<Span>,
}

/// Non-overlapping, leftmost occurrences of `needle` in each paragraph.
pub(super) fn find_all(
    paragraphs: Vec<&Paragraph>,
    needle: &str,
    case_sensitive: bool,
) -> Result<Vec<SearchHit>> {
    let matcher = RegexBuilder::new(&regex::escape(needle))
        .case_insensitive(!case_sensitive)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(paragraphs
        .into_iter()
        .filter_map(|p| {
            let spans: Vec<Span> = matcher
                .find_iter(&p.text)
                .map(|m| Span {
                    start: m.start(),
                    end: m.end(),
                })
                .collect();
            (!spans.is_empty()).then(|| SearchHit {
                paragraph: p.clone(),
                spans,
            })
        })
        .collect())
}

//! Versioned prompt templates for the chat-completions providers.
//!
//! The local provider renders the same messages so that token accounting
//! is identical whichever provider runs.

use serde::{Deserialize, Serialize};

pub const PROMPT_VERSION: &str = "v1";

const EXTRACT_COREF: &str = include_str!("../../prompts/extract_entities_coref.v1.txt");
const EXTRACT_PLAIN: &str = include_str!("../../prompts/extract_entities_plain.v1.txt");
const DECOMPOSE: &str = include_str!("../../prompts/decompose_query.v1.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    fn new(role: &str, content: impl Into<String>) -> Self {
        ChatMessage {
            role: role.to_owned(),
            content: content.into(),
        }
    }
}

pub fn extraction_messages(text: &str, context: &[&str], coreference: bool) -> Vec<ChatMessage> {
    let (system, user) = if coreference {
        let user = if context.is_empty() {
            format!("TEXT:\n{text}")
        } else {
            format!("CONTEXT:\n{}\n\nTEXT:\n{text}", context.join("\n"))
        };
        (EXTRACT_COREF, user)
    } else {
        (EXTRACT_PLAIN, format!("TEXT:\n{text}"))
    };
    vec![
        ChatMessage::new("system", system.trim_end()),
        ChatMessage::new("user", user),
    ]
}

pub fn decomposition_messages(query: &str) -> Vec<ChatMessage> {
    vec![
        ChatMessage::new("system", DECOMPOSE.trim_end()),
        ChatMessage::new("user", format!("QUESTION:\n{query}")),
    ]
}

/// Parse a strict JSON array of strings, tolerating a surrounding code fence.
pub fn parse_string_array(reply: &str) -> Option<Vec<String>> {
    let body = reply.trim();
    let body = body
        .strip_prefix("```json")
        .or_else(|| body.strip_prefix("```"))
        .and_then(|b| b.strip_suffix("```"))
        .unwrap_or(body)
        .trim();
    serde_json::from_str(body).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_only_in_coref_prompt() {
        let m = extraction_messages("He left.", &["Bob Dylan sang."], true);
        assert!(m[1].content.contains("CONTEXT:\nBob Dylan sang."));
        let m = extraction_messages("He left.", &["Bob Dylan sang."], false);
        assert_eq!(m[1].content, "TEXT:\nHe left.");
    }

    #[test]
    fn parses_fenced_arrays() {
        assert_eq!(parse_string_array("[\"a\",\"b\"]").unwrap(), ["a", "b"]);
        assert_eq!(parse_string_array("```json\n[\"a\"]\n```").unwrap(), ["a"]);
        assert!(parse_string_array("a, b").is_none());
        assert!(parse_string_array("{\"a\":1}").is_none());
    }
}

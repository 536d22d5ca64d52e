use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::Vocabulary;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub id: u32,
    pub surface: String,
    /// Byte offsets into the original text.
    pub span: Range<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    pub tokens: Vec<Token>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn ids(&self) -> Vec<u32> {
        self.tokens.iter().map(|t| t.id).collect()
    }

    /// Builds a sequence straight from ids, with empty surfaces and spans.
    pub fn from_ids(ids: &[u32]) -> Self {
        Self {
            tokens: ids
                .iter()
                .map(|&id| Token {
                    id,
                    surface: String::new(),
                    span: 0..0,
                })
                .collect(),
        }
    }
}

/// Lowercased surfaces with byte spans, before vocabulary lookup.
///
/// Maximal alphanumeric runs form one token; every other non-whitespace
/// character is a token of its own.
pub fn split_tokens(text: &str) -> Vec<(String, Range<usize>)> {
    let mut out = Vec::new();
    let mut word_start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            word_start.get_or_insert(i);
            continue;
        }
        if let Some(s) = word_start.take() {
            out.push((text[s..i].to_lowercase(), s..i));
        }
        if !ch.is_whitespace() {
            let end = i + ch.len_utf8();
            out.push((text[i..end].to_lowercase(), i..end));
        }
    }
    if let Some(s) = word_start {
        out.push((text[s..].to_lowercase(), s..text.len()));
    }
    out
}

pub fn tokenize(text: &str, vocab: &Vocabulary) -> TokenSeq {
    TokenSeq {
        tokens: split_tokens(text)
            .into_iter()
            .map(|(surface, span)| Token {
                id: vocab.id(&surface),
                surface,
                span,
            })
            .collect(),
    }
}

//! Tokenization, sentence segmentation and sliding-window planning.

mod sentences;
mod tokenize;
mod vocab;
mod windows;

use serde::{Deserialize, Serialize};

use crate::corpus::{Cohort, Label, Note};
use crate::error::Result;
use crate::exec::Exec;

pub use sentences::{segment_text, Sentence, SentenceIndex};
pub use tokenize::{split_tokens, tokenize, Token, TokenSeq};
pub use vocab::{build_vocab, Vocabulary, UNKNOWN_ID};
pub use windows::{make_windows, WindowPlan, DEFAULT_MAX_TOKENS, DEFAULT_WINDOW_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_size: usize,
    pub max_tokens: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_size: DEFAULT_WINDOW_SIZE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

/// A note prepared for the model: tokens, sentence index and window plan.
#[derive(Debug, Clone)]
pub struct EncodedNote {
    pub id: String,
    pub label: Label,
    pub text: String,
    pub tokens: TokenSeq,
    pub sentences: SentenceIndex,
    pub plan: WindowPlan,
}

impl EncodedNote {
    pub fn encode(note: &Note, vocab: &Vocabulary, windows: WindowConfig) -> Result<Self> {
        let tokens = tokenize(&note.text, vocab);
        let sentences = SentenceIndex::build(&note.text, &tokens);
        let plan = make_windows(tokens.len(), windows.window_size, windows.max_tokens)?;
        Ok(Self {
            id: note.id.clone(),
            label: note.label,
            text: note.text.clone(),
            tokens,
            sentences,
            plan,
        })
    }

    pub fn sentence_text(&self, index: usize) -> &str {
        &self.text[self.sentences.sentences[index].span.clone()]
    }
}

pub fn encode_cohort(
    cohort: &Cohort,
    vocab: &Vocabulary,
    windows: WindowConfig,
    exec: Exec,
) -> Result<Vec<EncodedNote>> {
    exec.try_map(cohort.notes(), |n| EncodedNote::encode(n, vocab, windows))
}

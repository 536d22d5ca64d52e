use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::TokenSeq;

/// Abbreviations whose trailing period never ends a sentence.
const GUARD: [&str; 9] = ["dr.", "mr.", "mrs.", "ms.", "prof.", "st.", "e.g.", "i.e.", "vs."];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

fn guarded(text: &str, sentence_start: usize, period_end: usize) -> bool {
    let head = &text[sentence_start..period_end];
    let word = head.rsplit(char::is_whitespace).next().unwrap_or(head);
    let word = word.trim_start_matches(|c: char| matches!(c, '(' | '[' | '"' | '\''));
    GUARD.iter().any(|g| word.eq_ignore_ascii_case(g))
}

/// Byte spans of the sentences in `text`.
///
/// A sentence ends at `.`, `!` or `?` (plus any closing quotes/brackets) when
/// whitespace follows and the next visible character is uppercase or a digit,
/// unless the period closes a guarded abbreviation. A blank line also ends a
/// sentence. Spans are trimmed, so together they cover exactly the
/// non-whitespace characters of the text.
pub fn segment_text(text: &str) -> Vec<Range<usize>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map(|c| c.0).unwrap_or(text.len());
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut last_end = 0;
    let mut i = 0;
    while i < chars.len() {
        let (b, c) = chars[i];
        if c.is_whitespace() {
            if c == '\n' && start.is_some() {
                let mut j = i + 1;
                while j < chars.len() && chars[j].1.is_whitespace() && chars[j].1 != '\n' {
                    j += 1;
                }
                if j < chars.len() && chars[j].1 == '\n' {
                    out.push(start.take().unwrap_or(b)..last_end);
                }
            }
            i += 1;
            continue;
        }
        let s = *start.get_or_insert(b);
        if !is_terminator(c) {
            last_end = b + c.len_utf8();
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && (is_terminator(chars[j].1) || is_closer(chars[j].1)) {
            j += 1;
        }
        let end = byte_at(j);
        last_end = end;
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let next_starts_sentence =
            k > j && k < chars.len() && (chars[k].1.is_uppercase() || chars[k].1.is_ascii_digit());
        let abbreviation = c == '.' && guarded(text, s, b + 1);
        if next_starts_sentence && !abbreviation {
            out.push(s..end);
            start = None;
        }
        i = j;
    }
    if let Some(s) = start {
        out.push(s..last_end);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub span: Range<usize>,
    /// `[first, last)` token indices.
    pub tokens: Range<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceIndex {
    pub sentences: Vec<Sentence>,
}

impl SentenceIndex {
    /// Segments `text` and assigns each token of `tokens` (produced from the
    /// same text) to the sentence containing it.
    pub fn build(text: &str, tokens: &TokenSeq) -> Self {
        let spans = segment_text(text);
        let mut sentences = Vec::with_capacity(spans.len());
        let mut t = 0;
        for (index, span) in spans.into_iter().enumerate() {
            let first = t;
            while t < tokens.len() && tokens.tokens[t].span.start < span.end {
                t += 1;
            }
            sentences.push(Sentence {
                index,
                span,
                tokens: first..t,
            });
        }
        Self { sentences }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textproc::{tokenize, Vocabulary};
    use proptest::prelude::*;

    fn texts(t: &str) -> Vec<&str> {
        segment_text(t).into_iter().map(|r| &t[r]).collect()
    }

    #[test]
    fn splits_on_terminators() {
        assert_eq!(texts("She fell. She shook."), ["She fell.", "She shook."]);
        assert_eq!(texts("Why? 3 events!"), ["Why?", "3 events!"]);
        assert_eq!(texts("no stop. lowercase next"), ["no stop. lowercase next"]);
        assert_eq!(texts("trailing text"), ["trailing text"]);
        assert!(texts("   ").is_empty());
    }

    #[test]
    fn abbreviation_guard() {
        assert_eq!(texts("Seen by Dr. Smith today."), ["Seen by Dr. Smith today."]);
        assert_eq!(texts("Drugs e.g. Keppra help."), ["Drugs e.g. Keppra help."]);
        assert_eq!(texts("Epilepsy vs. PNES. Unclear."), ["Epilepsy vs. PNES.", "Unclear."]);
    }

    #[test]
    fn closers_and_blank_lines() {
        assert_eq!(texts("He said \"stop.\" Then left."), ["He said \"stop.\"", "Then left."]);
        assert_eq!(texts("HPI: events\n\n  Exam normal"), ["HPI: events", "Exam normal"]);
        assert_eq!(texts("line one\nline two"), ["line one\nline two"]);
    }

    #[test]
    fn table_four_sentence_ten_stays_whole() {
        let s = "Past Medical History: Started in ____ - Fell from a horse as a child and had head injury.";
        let out = texts(s);
        assert_eq!(out.len(), 1);
        assert!(out[0].contains("Fell from a horse"));
    }

    #[test]
    fn tokens_assigned_to_sentences() {
        let text = "Tongue biting. Eyes closed!";
        let vocab = Vocabulary::from_surfaces(vec![]).unwrap();
        let seq = tokenize(text, &vocab);
        let idx = SentenceIndex::build(text, &seq);
        assert_eq!(idx.sentences[0].tokens, 0..3);
        assert_eq!(idx.sentences[1].tokens, 3..6);
    }

    proptest! {
        #[test]
        fn spans_partition_visible_chars(text in "[a-zA-Z0-9 .!?\n]{0,160}") {
            let spans = segment_text(&text);
            let mut covered = vec![false; text.len()];
            let mut prev_end = 0;
            for s in &spans {
                prop_assert!(s.start >= prev_end && s.start < s.end);
                prev_end = s.end;
                for i in s.clone() {
                    covered[i] = true;
                }
                let body = &text[s.clone()];
                prop_assert!(!body.starts_with(char::is_whitespace));
                prop_assert!(!body.ends_with(char::is_whitespace));
            }
            for (i, ch) in text.char_indices() {
                if !ch.is_whitespace() {
                    prop_assert!(covered[i], "char {} at {} not covered", ch, i);
                }
            }
            let vocab = Vocabulary::from_surfaces(vec![]).unwrap();
            let seq = tokenize(&text, &vocab);
            let idx = SentenceIndex::build(&text, &seq);
            let assigned: usize = idx.sentences.iter().map(|s| s.tokens.len()).sum();
            prop_assert_eq!(assigned, seq.len());
            for s in &idx.sentences {
                for t in s.tokens.clone() {
                    let span = &seq.tokens[t].span;
                    prop_assert!(span.start >= s.span.start && span.end <= s.span.end);
                }
            }
        }
    }
}

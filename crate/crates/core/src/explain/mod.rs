//! Sentence-level integrated gradients, ranking, phenotype tagging and
//! accumulated category scores.

mod accumulate;
mod ig;
mod phenotype;
mod ranking;

pub use accumulate::{accumulated_ig, CategoryScore, DEFAULT_TOP_K};
pub use ig::{integrated_gradients, token_integrated_gradients, TokenAttributions, DEFAULT_M_STEPS};
pub use phenotype::{LexiconTagger, PhenotypeCategory, PhenotypeTagger};
pub use ranking::{normalize_and_rank, planted_precision, sentence_attributions, top_k_precision, SentenceAttribution};

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::Result;
use crate::exec::Exec;
use crate::model::{Scorer, Target};
use crate::textproc::EncodedNote;

/// Which class's log-probability the attributions explain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetClass {
    #[default]
    Epilepsy,
    Pnes,
    /// The class the model predicts for each note.
    Predicted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    pub m_steps: usize,
    pub k: usize,
    pub target: TargetClass,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            m_steps: DEFAULT_M_STEPS,
            k: DEFAULT_TOP_K,
            target: TargetClass::Epilepsy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteReport {
    pub note_id: String,
    pub target_class: Label,
    pub m_steps: usize,
    pub completeness_residual: f64,
    pub sentences: Vec<SentenceAttribution>,
    pub category_scores: Vec<CategoryScore>,
}

impl NoteReport {
    /// Sentences ordered by rank.
    pub fn ranked(&self) -> Vec<&SentenceAttribution> {
        let mut v: Vec<_> = self.sentences.iter().collect();
        v.sort_by_key(|s| s.rank);
        v
    }
}

/// Attribution report for one note. `exec` governs the quadrature fan-out.
pub fn explain_note<S: Scorer + ?Sized>(
    scorer: &S,
    note: &EncodedNote,
    tagger: &dyn PhenotypeTagger,
    config: &ExplainConfig,
    exec: Exec,
) -> Result<NoteReport> {
    let inputs = scorer.embed(&note.tokens)?;
    let target_class = match config.target {
        TargetClass::Epilepsy => Label::Epilepsy,
        TargetClass::Pnes => Label::Pnes,
        TargetClass::Predicted => {
            let z = scorer.logits(&inputs, &note.plan)?;
            if z[0] >= z[1] {
                Label::Epilepsy
            } else {
                Label::Pnes
            }
        }
    };
    let attributions = integrated_gradients(
        scorer,
        &inputs,
        &note.plan,
        Target::LogProb(target_class),
        config.m_steps,
        exec,
    )?;
    let raw = sentence_attributions(&attributions.per_token, &note.sentences)?;
    let ranked = normalize_and_rank(&raw)?;
    let sentences: Vec<SentenceAttribution> = note
        .sentences
        .sentences
        .iter()
        .zip(raw.iter().zip(ranked))
        .map(|(s, (&raw, (score, rank)))| SentenceAttribution {
            index: s.index,
            text_span: s.span.clone(),
            raw,
            score,
            rank,
            category: tagger.tag(&note.text[s.span.clone()]),
        })
        .collect();
    let category_scores = accumulated_ig(&sentences, config.k)?;
    Ok(NoteReport {
        note_id: note.id.clone(),
        target_class,
        m_steps: config.m_steps,
        completeness_residual: attributions.completeness_residual,
        sentences,
        category_scores,
    })
}

/// Reports for many notes, fanned out over notes; each note's quadrature
/// runs sequentially.
pub fn explain_notes<S: Scorer + ?Sized>(
    scorer: &S,
    notes: &[EncodedNote],
    tagger: &dyn PhenotypeTagger,
    config: &ExplainConfig,
    exec: Exec,
) -> Result<Vec<NoteReport>> {
    exec.try_map(notes, |n| explain_note(scorer, n, tagger, config, Exec::Sequential))
}

/// Tidy CSV with one row per (note, category).
pub fn category_scores_csv(reports: &[NoteReport]) -> String {
    let mut out = String::from("note_id,category,A_c,k\n");
    for r in reports {
        for c in &r.category_scores {
            out.push_str(&format!("{},{},{},{}\n", r.note_id, c.category, c.score, c.k));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Cohort, Note};
    use crate::model::{InitConfig, ModelDims, ModelParams};
    use crate::textproc::{build_vocab, encode_cohort, WindowConfig};

    #[test]
    fn report_is_consistent_and_serializes() {
        let note = Note::new(
            "n1",
            "p1",
            "History of depression and anxiety. Rhythmic movements of the left arm lasting 45 minutes. The weather was sunny.",
            Label::Epilepsy,
            "A",
        )
        .unwrap();
        let cohort = Cohort::new(vec![note]).unwrap();
        let vocab = build_vocab(&cohort, 1, usize::MAX).unwrap();
        let enc = encode_cohort(&cohort, &vocab, WindowConfig::default(), Exec::Sequential).unwrap();
        let p = ModelParams::init(ModelDims::new(vocab.size(), 8, 6), InitConfig::default(), 1);
        let cfg = ExplainConfig {
            m_steps: 64,
            ..ExplainConfig::default()
        };
        let tagger = LexiconTagger::builtin();
        let r = explain_note(&p, &enc[0], &tagger, &cfg, Exec::Parallel).unwrap();
        assert_eq!(r.sentences.len(), 3);
        assert_eq!(r.sentences[0].category, PhenotypeCategory::PsychiatricTraits);
        assert_eq!(r.sentences[1].category, PhenotypeCategory::IctalSemiology);
        assert_eq!(r.sentences[2].category, PhenotypeCategory::Unassigned);
        assert_eq!(r.category_scores.len(), 12);
        assert!(r.category_scores.iter().all(|c| c.score >= 0.0));
        let json = serde_json::to_value(&r).unwrap();
        for key in ["note_id", "target_class", "m_steps", "completeness_residual", "sentences", "category_scores"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert!(json["category_scores"][0].get("A_c").is_some());
        let batch = explain_notes(&p, &enc, &tagger, &cfg, Exec::Parallel).unwrap();
        assert_eq!(batch[0], r);
        assert_eq!(category_scores_csv(&batch).lines().count(), 13);
    }
}

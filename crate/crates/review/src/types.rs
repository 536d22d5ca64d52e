use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use notescreen_core::corpus::Label;
use notescreen_core::eval::{ConfusionMatrix, UTestMethod};
use notescreen_core::explain::{NoteReport, PhenotypeCategory};
use notescreen_core::model::Prediction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Unaided,
    AiAssisted,
}

/// One reviewable note with its reference label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub text: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistSentence {
    pub index: usize,
    pub span: Range<usize>,
    pub score: f64,
    pub rank: usize,
    pub category: PhenotypeCategory,
}

/// Model output shown to assisted reviewers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistPayload {
    pub predicted_label: Label,
    pub p_epilepsy: f64,
    pub top_sentences: Vec<AssistSentence>,
}

impl AssistPayload {
    /// The `k` top-ranked sentences of an attribution report.
    pub fn from_report(prediction: &Prediction, report: &NoteReport, k: usize) -> Self {
        Self {
            predicted_label: prediction.predicted_label,
            p_epilepsy: prediction.p_epilepsy,
            top_sentences: report
                .ranked()
                .into_iter()
                .take(k)
                .map(|s| AssistSentence {
                    index: s.index,
                    span: s.text_span.clone(),
                    score: s.score,
                    rank: s.rank,
                    category: s.category,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterCohort {
    pub cohort_id: String,
    pub cases: Vec<CaseRecord>,
    /// case id → model output; required for assisted sessions.
    #[serde(default)]
    pub attributions: Option<BTreeMap<String, AssistPayload>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub cohort_id: String,
    pub condition: Condition,
    pub seed: u64,
    #[serde(default)]
    pub reviewers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub case_id: String,
    pub label: Label,
    #[serde(default)]
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub case_id: String,
    pub label: Label,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewSession {
    pub session_id: String,
    pub condition: Condition,
    pub cohort_id: String,
    pub seed: u64,
    pub case_order: Vec<String>,
    pub decisions: Vec<Decision>,
    pub reviewers: Vec<String>,
    pub created_at: u64,
}

/// What a reviewer sees. `assist` is never serialized for unaided sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseView {
    pub case_id: String,
    pub position: usize,
    pub total: usize,
    pub text: String,
    pub sentence_spans: Vec<Range<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub assist: Option<AssistPayload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextCase {
    Case(CaseView),
    Done { decided: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub session_id: String,
    pub case_id: String,
    pub label: Label,
    pub decided: usize,
    /// True when this was an identical re-post of an existing decision.
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub model_accuracy: f64,
    pub model_confusion: ConfusionMatrix,
    pub u: f64,
    pub p_value: f64,
    pub method: UTestMethod,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: String,
    pub cohort_id: String,
    pub condition: Condition,
    pub n_cases: usize,
    pub n_decided: usize,
    pub accuracy: f64,
    pub mean_accuracy: f64,
    pub ci_accuracy: [f64; 2],
    pub n_boot: usize,
    pub confusion: ConfusionMatrix,
    /// Present when the cohort carries model outputs for the decided cases.
    pub model: Option<ModelComparison>,
}

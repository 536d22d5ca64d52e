//! Session state as a pure fold over events. Commands are validated against
//! the current state and turned into events; only `apply` mutates.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use rand::seq::SliceRandom;

use notescreen_core::corpus::Label;
use notescreen_core::eval::{
    accuracy, bootstrap_ci, mann_whitney_u, significance_stars, ConfusionMatrix, DEFAULT_N_BOOT, DEFAULT_THRESHOLD,
};
use notescreen_core::rng;
use notescreen_core::textproc::segment_text;
use notescreen_core::Exec;

use crate::error::ReviewError;
use crate::events::{Event, LogEntry};
use crate::types::*;

#[derive(Debug, Clone)]
struct StoredCohort {
    cases: Vec<CaseRecord>,
    index: HashMap<String, usize>,
    spans: Vec<Vec<Range<usize>>>,
    attributions: Option<BTreeMap<String, AssistPayload>>,
}

#[derive(Debug, Clone, Default)]
pub struct ReviewState {
    cohorts: BTreeMap<String, StoredCohort>,
    sessions: BTreeMap<String, ReviewSession>,
}

pub enum DecisionOutcome {
    New(Event),
    Duplicate(Ack),
}

fn not_found(what: &str, id: &str) -> ReviewError {
    ReviewError::NotFound(format!("unknown {what} {id:?}"))
}

impl ReviewState {
    pub fn replay<'a>(entries: impl IntoIterator<Item = &'a LogEntry>) -> Result<Self, ReviewError> {
        let mut state = Self::default();
        for e in entries {
            state
                .apply(&e.event)
                .map_err(|err| ReviewError::Log(format!("event {}: {err}", e.seq)))?;
        }
        Ok(state)
    }

    pub fn session(&self, id: &str) -> Result<&ReviewSession, ReviewError> {
        self.sessions.get(id).ok_or_else(|| not_found("session", id))
    }

    pub fn session_ids(&self) -> impl Iterator<Item = &str> {
        self.sessions.keys().map(String::as_str)
    }

    pub fn has_cohort(&self, id: &str) -> bool {
        self.cohorts.contains_key(id)
    }

    fn cohort(&self, id: &str) -> Result<&StoredCohort, ReviewError> {
        self.cohorts.get(id).ok_or_else(|| not_found("cohort", id))
    }

    pub fn plan_register(&self, req: RegisterCohort) -> Result<Event, ReviewError> {
        if req.cohort_id.is_empty() {
            return Err(ReviewError::BadRequest("cohort_id must not be empty".into()));
        }
        if self.cohorts.contains_key(&req.cohort_id) {
            return Err(ReviewError::Conflict(format!("cohort {:?} already registered", req.cohort_id)));
        }
        if req.cases.is_empty() {
            return Err(ReviewError::BadRequest("cohort has no cases".into()));
        }
        let mut seen = HashMap::new();
        for c in &req.cases {
            if seen.insert(c.case_id.as_str(), ()).is_some() {
                return Err(ReviewError::BadRequest(format!("duplicate case id {:?}", c.case_id)));
            }
        }
        if let Some(attr) = &req.attributions {
            if let Some(extra) = attr.keys().find(|k| !seen.contains_key(k.as_str())) {
                return Err(ReviewError::BadRequest(format!("attributions for unknown case {extra:?}")));
            }
        }
        Ok(Event::CohortRegistered(req))
    }

    pub fn plan_session(&self, req: CreateSession, now: u64) -> Result<Event, ReviewError> {
        let cohort = self.cohort(&req.cohort_id)?;
        if req.condition == Condition::AiAssisted {
            let complete = cohort
                .attributions
                .as_ref()
                .is_some_and(|a| cohort.cases.iter().all(|c| a.contains_key(&c.case_id)));
            if !complete {
                return Err(ReviewError::Conflict(format!(
                    "cohort {:?} lacks precomputed attributions for an assisted session",
                    req.cohort_id
                )));
            }
        }
        let mut case_order: Vec<String> = cohort.cases.iter().map(|c| c.case_id.clone()).collect();
        case_order.shuffle(&mut rng::sub_rng(req.seed, rng::SESSION, 0));
        Ok(Event::SessionCreated {
            session_id: format!("s{:04}", self.sessions.len() + 1),
            request: req,
            case_order,
            created_at: now,
        })
    }

    pub fn plan_decision(&self, session_id: &str, req: DecisionRequest, now: u64) -> Result<DecisionOutcome, ReviewError> {
        let session = self.session(session_id)?;
        if let Some(prev) = session.decisions.iter().find(|d| d.case_id == req.case_id) {
            if prev.label == req.label {
                return Ok(DecisionOutcome::Duplicate(Ack {
                    session_id: session_id.to_string(),
                    case_id: req.case_id,
                    label: req.label,
                    decided: session.decisions.len(),
                    duplicate: true,
                }));
            }
            return Err(ReviewError::Conflict(format!(
                "case {:?} already decided as {}",
                req.case_id,
                prev.label.as_str()
            )));
        }
        if !self.cohort(&session.cohort_id)?.index.contains_key(&req.case_id) {
            return Err(not_found("case", &req.case_id));
        }
        let current = &session.case_order[session.decisions.len()];
        if *current != req.case_id {
            return Err(ReviewError::Conflict(format!(
                "case {:?} is not the current case ({current:?})",
                req.case_id
            )));
        }
        Ok(DecisionOutcome::New(Event::DecisionRecorded {
            session_id: session_id.to_string(),
            decision: Decision {
                case_id: req.case_id,
                label: req.label,
                timestamp: now,
                elapsed_ms: req.elapsed_ms,
            },
        }))
    }

    pub fn apply(&mut self, event: &Event) -> Result<(), ReviewError> {
        match event {
            Event::CohortRegistered(req) => {
                self.plan_register(req.clone())?;
                let index = req
                    .cases
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.case_id.clone(), i))
                    .collect();
                let spans = req.cases.iter().map(|c| segment_text(&c.text)).collect();
                self.cohorts.insert(
                    req.cohort_id.clone(),
                    StoredCohort {
                        cases: req.cases.clone(),
                        index,
                        spans,
                        attributions: req.attributions.clone(),
                    },
                );
            }
            Event::SessionCreated {
                session_id,
                request,
                case_order,
                created_at,
            } => {
                let cohort = self.cohort(&request.cohort_id)?;
                let mut sorted = case_order.clone();
                sorted.sort();
                let mut ids: Vec<String> = cohort.cases.iter().map(|c| c.case_id.clone()).collect();
                ids.sort();
                if sorted != ids {
                    return Err(ReviewError::Log("case order is not a permutation of the cohort".into()));
                }
                if self.sessions.contains_key(session_id) {
                    return Err(ReviewError::Conflict(format!("session {session_id:?} exists")));
                }
                self.sessions.insert(
                    session_id.clone(),
                    ReviewSession {
                        session_id: session_id.clone(),
                        condition: request.condition,
                        cohort_id: request.cohort_id.clone(),
                        seed: request.seed,
                        case_order: case_order.clone(),
                        decisions: Vec::new(),
                        reviewers: request.reviewers.clone(),
                        created_at: *created_at,
                    },
                );
            }
            Event::DecisionRecorded { session_id, decision } => {
                let req = DecisionRequest {
                    case_id: decision.case_id.clone(),
                    label: decision.label,
                    elapsed_ms: decision.elapsed_ms,
                };
                match self.plan_decision(session_id, req, decision.timestamp)? {
                    DecisionOutcome::New(_) => {}
                    DecisionOutcome::Duplicate(_) => {
                        return Err(ReviewError::Log(format!("duplicate decision for {:?}", decision.case_id)))
                    }
                }
                self.sessions
                    .get_mut(session_id)
                    .expect("checked by plan_decision")
                    .decisions
                    .push(decision.clone());
            }
        }
        Ok(())
    }

    pub fn next_case(&self, session_id: &str) -> Result<NextCase, ReviewError> {
        let session = self.session(session_id)?;
        let position = session.decisions.len();
        let Some(case_id) = session.case_order.get(position) else {
            return Ok(NextCase::Done { decided: position });
        };
        let cohort = self.cohort(&session.cohort_id)?;
        let i = cohort.index[case_id];
        let assist = match session.condition {
            Condition::Unaided => None,
            Condition::AiAssisted => cohort.attributions.as_ref().and_then(|a| a.get(case_id)).cloned(),
        };
        Ok(NextCase::Case(CaseView {
            case_id: case_id.clone(),
            position,
            total: session.case_order.len(),
            text: cohort.cases[i].text.clone(),
            sentence_spans: cohort.spans[i].clone(),
            assist,
        }))
    }

    pub fn report(&self, session_id: &str) -> Result<SessionReport, ReviewError> {
        let session = self.session(session_id)?;
        if session.decisions.is_empty() {
            return Err(ReviewError::Conflict(format!("session {session_id:?} has no decisions")));
        }
        let cohort = self.cohort(&session.cohort_id)?;
        let truth: Vec<Label> = session
            .decisions
            .iter()
            .map(|d| cohort.cases[cohort.index[&d.case_id]].label)
            .collect();
        let chosen: Vec<Label> = session.decisions.iter().map(|d| d.label).collect();
        let confusion = ConfusionMatrix::from_predictions(&chosen, &truth);
        let scores: Vec<f64> = chosen.iter().map(|&l| if l == Label::Epilepsy { 1.0 } else { 0.0 }).collect();
        let ci = bootstrap_ci(
            |s, l| accuracy(s, l, DEFAULT_THRESHOLD).map(|r| r.0),
            &scores,
            &truth,
            DEFAULT_N_BOOT,
            session.seed,
            Exec::Sequential,
        )?;

        let model = cohort.attributions.as_ref().and_then(|attr| {
            let predicted: Option<Vec<Label>> = session
                .decisions
                .iter()
                .map(|d| attr.get(&d.case_id).map(|a| a.predicted_label))
                .collect();
            predicted.map(|p| model_comparison(&chosen, &p, &truth))
        });
        let model = model.transpose()?;

        Ok(SessionReport {
            session_id: session.session_id.clone(),
            cohort_id: session.cohort_id.clone(),
            condition: session.condition,
            n_cases: session.case_order.len(),
            n_decided: session.decisions.len(),
            accuracy: confusion.accuracy().expect("at least one decision"),
            mean_accuracy: ci.mean,
            ci_accuracy: [ci.lo, ci.hi],
            n_boot: ci.n_boot,
            confusion,
            model,
        })
    }
}

/// Two-sided Mann–Whitney U on per-case correctness indicators, reviewer vs. model.
fn model_comparison(human: &[Label], model: &[Label], truth: &[Label]) -> Result<ModelComparison, ReviewError> {
    let indicator = |pred: &[Label]| -> Vec<f64> {
        pred.iter().zip(truth).map(|(p, t)| if p == t { 1.0 } else { 0.0 }).collect()
    };
    let test = mann_whitney_u(&indicator(human), &indicator(model))?;
    let model_confusion = ConfusionMatrix::from_predictions(model, truth);
    Ok(ModelComparison {
        model_accuracy: model_confusion.accuracy().expect("non-empty"),
        model_confusion,
        u: test.u,
        p_value: test.p_value,
        method: test.method,
        stars: significance_stars(test.p_value)?.to_string(),
    })
}

use std::sync::RwLock;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::ReviewError;
use crate::events::{Event, EventLog};
use crate::state::{DecisionOutcome, ReviewState};
use crate::types::*;

pub type Clock = Box<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Box::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    })
}

struct Inner {
    state: ReviewState,
    log: EventLog,
}

impl Inner {
    /// Events reaching here were planned against the current state under the
    /// write lock, so applying them cannot fail once they are durable.
    fn commit(&mut self, event: Event) -> Result<(), ReviewError> {
        self.log.append(event.clone())?;
        self.state
            .apply(&event)
            .expect("planned event applies to the state it was planned against");
        Ok(())
    }
}

/// Review state plus its event log. Writes are serialized behind one lock
/// (so each session has a single writer); reads share it.
pub struct ReviewService {
    inner: RwLock<Inner>,
    clock: Clock,
}

impl ReviewService {
    /// Rebuilds state from whatever the log already holds.
    pub fn new(log: EventLog, clock: Clock) -> Result<Self, ReviewError> {
        let state = ReviewState::replay(log.entries())?;
        Ok(Self {
            inner: RwLock::new(Inner { state, log }),
            clock,
        })
    }

    pub fn in_memory() -> Self {
        Self::new(EventLog::in_memory(), system_clock()).expect("empty log replays")
    }

    fn write<T>(&self, f: impl FnOnce(&ReviewState, u64) -> Result<(Event, T), ReviewError>) -> Result<T, ReviewError> {
        let mut inner = self.inner.write().expect("review lock poisoned");
        let (event, out) = f(&inner.state, (self.clock)())?;
        inner.commit(event)?;
        Ok(out)
    }

    fn read<T>(&self, f: impl FnOnce(&ReviewState) -> Result<T, ReviewError>) -> Result<T, ReviewError> {
        f(&self.inner.read().expect("review lock poisoned").state)
    }

    pub fn register_cohort(&self, req: RegisterCohort) -> Result<String, ReviewError> {
        let id = req.cohort_id.clone();
        self.write(|s, _| Ok((s.plan_register(req)?, id)))
    }

    pub fn create_session(&self, req: CreateSession) -> Result<String, ReviewError> {
        self.write(|s, now| {
            let event = s.plan_session(req, now)?;
            let Event::SessionCreated { session_id, .. } = &event else {
                unreachable!("plan_session yields SessionCreated")
            };
            let id = session_id.clone();
            Ok((event, id))
        })
    }

    pub fn record_decision(&self, session_id: &str, req: DecisionRequest) -> Result<Ack, ReviewError> {
        // duplicates are answered under the read lock and never logged
        let planned = self.read(|s| s.plan_decision(session_id, req.clone(), 0))?;
        if let DecisionOutcome::Duplicate(ack) = planned {
            return Ok(ack);
        }
        let mut inner = self.inner.write().expect("review lock poisoned");
        let now = (self.clock)();
        match inner.state.plan_decision(session_id, req, now)? {
            DecisionOutcome::Duplicate(ack) => Ok(ack),
            DecisionOutcome::New(event) => {
                inner.commit(event)?;
                let session = inner.state.session(session_id)?;
                let d = session.decisions.last().expect("just recorded");
                Ok(Ack {
                    session_id: session_id.to_string(),
                    case_id: d.case_id.clone(),
                    label: d.label,
                    decided: session.decisions.len(),
                    duplicate: false,
                })
            }
        }
    }

    pub fn next_case(&self, session_id: &str) -> Result<NextCase, ReviewError> {
        self.read(|s| s.next_case(session_id))
    }

    pub fn session(&self, session_id: &str) -> Result<ReviewSession, ReviewError> {
        self.read(|s| s.session(session_id).cloned())
    }

    pub fn report(&self, session_id: &str) -> Result<SessionReport, ReviewError> {
        self.read(|s| s.report(session_id))
    }

    /// The report exactly as served over HTTP.
    pub fn report_json(&self, session_id: &str) -> Result<Vec<u8>, ReviewError> {
        Ok(serde_json::to_vec(&self.report(session_id)?)?)
    }

    /// Recomputes a report from the raw log alone.
    pub fn replayed_report_json(&self, session_id: &str) -> Result<Vec<u8>, ReviewError> {
        let inner = self.inner.read().expect("review lock poisoned");
        let state = ReviewState::replay(inner.log.entries())?;
        Ok(serde_json::to_vec(&state.report(session_id)?)?)
    }

    pub fn has_cohort(&self, cohort_id: &str) -> bool {
        self.inner.read().expect("review lock poisoned").state.has_cohort(cohort_id)
    }

    pub fn log_len(&self) -> usize {
        self.inner.read().expect("review lock poisoned").log.entries().len()
    }
}

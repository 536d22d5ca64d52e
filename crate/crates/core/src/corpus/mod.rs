//! Cohort ingestion, curation, splitting and resampling protocols.

mod apportion;
mod io;
mod sampling;
mod split;
mod synth;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use apportion::{apportion_quotas, largest_remainder};
pub use io::{ingest, read_jsonl, write_jsonl, Format};
pub use sampling::{rebalance_counts, rebalance_training, stratified_sample, subsample_training};
pub use split::{stratified_split, DataSplit, SplitManifest, SplitSpec};
pub use synth::{generate_synthetic, PlantedMap, SynthConfig};

/// Diagnostic class. Epilepsy is the positive class throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Epilepsy,
    #[serde(rename = "PNES")]
    Pnes,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Epilepsy, Label::Pnes];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Epilepsy => "Epilepsy",
            Label::Pnes => "PNES",
        }
    }

    /// Index into a logit pair: Epilepsy = 0, PNES = 1.
    pub fn index(self) -> usize {
        match self {
            Label::Epilepsy => 0,
            Label::Pnes => 1,
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Epilepsy => Label::Pnes,
            Label::Pnes => Label::Epilepsy,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Epilepsy
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            x if x.eq_ignore_ascii_case("epilepsy") => Ok(Label::Epilepsy),
            x if x.eq_ignore_ascii_case("pnes") => Ok(Label::Pnes),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

/// On-disk record shape shared by the JSONL and CSV formats.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoteRecord {
    pub id: String,
    pub patient_id: String,
    pub text: String,
    pub label: String,
    pub site: String,
}

/// A labelled clinical narrative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoteRecord", into = "NoteRecord")]
pub struct Note {
    pub id: String,
    pub patient_id: String,
    pub text: String,
    pub label: Label,
    pub site: String,
    word_count: usize,
}

impl Note {
    pub fn new(
        id: impl Into<String>,
        patient_id: impl Into<String>,
        text: impl Into<String>,
        label: Label,
        site: impl Into<String>,
    ) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::EmptyText(id));
        }
        let word_count = text.split_whitespace().count();
        Ok(Self {
            id,
            patient_id: patient_id.into(),
            text,
            label,
            site: site.into(),
            word_count,
        })
    }

    pub fn word_count(&self) -> usize {
        self.word_count
    }

    /// Replaces the narrative, keeping `word_count` consistent.
    pub fn with_text(&self, text: impl Into<String>) -> Result<Self> {
        Note::new(
            self.id.clone(),
            self.patient_id.clone(),
            text,
            self.label,
            self.site.clone(),
        )
    }
}

impl TryFrom<NoteRecord> for Note {
    type Error = Error;

    fn try_from(r: NoteRecord) -> Result<Self> {
        let label = r.label.parse()?;
        Note::new(r.id, r.patient_id, r.text, label, r.site)
    }
}

impl From<Note> for NoteRecord {
    fn from(n: Note) -> Self {
        NoteRecord {
            id: n.id,
            patient_id: n.patient_id,
            text: n.text,
            label: n.label.as_str().to_string(),
            site: n.site,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub epilepsy: usize,
    pub pnes: usize,
}

impl LabelCounts {
    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Epilepsy => self.epilepsy,
            Label::Pnes => self.pnes,
        }
    }

    pub fn total(&self) -> usize {
        self.epilepsy + self.pnes
    }
}

/// An ordered collection of notes with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cohort {
    notes: Vec<Note>,
}

impl Cohort {
    pub fn new(notes: Vec<Note>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(notes.len());
        for n in &notes {
            if !seen.insert(n.id.as_str()) {
                return Err(Error::DuplicateId(n.id.clone()));
            }
        }
        Ok(Self { notes })
    }

    pub fn notes(&self) -> &[Note] {
        &self.notes
    }

    pub fn into_notes(self) -> Vec<Note> {
        self.notes
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.notes.iter().map(|n| n.id.clone()).collect()
    }

    pub fn label_counts(&self) -> LabelCounts {
        let mut c = LabelCounts::default();
        for n in &self.notes {
            match n.label {
                Label::Epilepsy => c.epilepsy += 1,
                Label::Pnes => c.pnes += 1,
            }
        }
        c
    }

    pub fn get(&self, id: &str) -> Option<&Note> {
        self.notes.iter().find(|n| n.id == id)
    }

    /// Notes with the given ids, in the order given.
    pub fn subset(&self, ids: &[String]) -> Result<Cohort> {
        let index: HashMap<&str, &Note> = self.notes.iter().map(|n| (n.id.as_str(), n)).collect();
        let notes = ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|n| (*n).clone())
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown note id {id:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Cohort::new(notes)
    }

    pub fn filter(&self, mut keep: impl FnMut(&Note) -> bool) -> Cohort {
        Cohort {
            notes: self.notes.iter().filter(|n| keep(n)).cloned().collect(),
        }
    }

    /// Positions of each label's notes, in cohort order.
    pub(crate) fn positions_by_label(&self) -> BTreeMap<Label, Vec<usize>> {
        let mut m: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
        for (i, n) in self.notes.iter().enumerate() {
            m.entry(n.label).or_default().push(i);
        }
        m
    }
}

/// Removes every patient whose notes carry both labels. Order is preserved.
pub fn exclude_dual_diagnosis(cohort: &Cohort) -> Cohort {
    let mut seen: HashMap<&str, (bool, bool)> = HashMap::new();
    for n in cohort.notes() {
        let e = seen.entry(n.patient_id.as_str()).or_default();
        match n.label {
            Label::Epilepsy => e.0 = true,
            Label::Pnes => e.1 = true,
        }
    }
    cohort.filter(|n| seen[n.patient_id.as_str()] != (true, true))
}

pub const DEFAULT_TRUNCATION_MARKERS: [&str; 2] = ["Discharge Diagnosis", "Final Diagnosis"];

/// Cuts each note at the first case-insensitive occurrence of any marker.
/// Notes left with no text are dropped; the second value counts them.
pub fn truncate_at_markers(cohort: &Cohort, markers: &[&str]) -> Result<(Cohort, usize)> {
    let lowered: Vec<String> = markers.iter().map(|m| m.to_lowercase()).collect();
    let mut out = Vec::with_capacity(cohort.len());
    let mut dropped = 0;
    for n in cohort.notes() {
        let hay = n.text.to_ascii_lowercase();
        let cut = lowered
            .iter()
            .filter(|m| !m.is_empty())
            .filter_map(|m| hay.find(m.as_str()))
            .min();
        match cut {
            None => out.push(n.clone()),
            Some(pos) => {
                let kept = n.text[..pos].trim_end();
                if kept.is_empty() {
                    dropped += 1;
                } else {
                    out.push(n.with_text(kept)?);
                }
            }
        }
    }
    Ok((Cohort::new(out)?, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn note(id: &str, pid: &str, label: Label) -> Note {
        Note::new(id, pid, format!("text of {id}"), label, "A").unwrap()
    }

    #[test]
    fn word_count_is_whitespace_tokens() {
        let n = Note::new("a", "p", "  Tongue   biting.\nNo aura ", Label::Epilepsy, "A").unwrap();
        assert_eq!(n.word_count(), 4);
    }

    #[test]
    fn empty_text_rejected() {
        assert!(matches!(
            Note::new("x", "p", "  \n", Label::Pnes, "A"),
            Err(Error::EmptyText(id)) if id == "x"
        ));
    }

    #[test]
    fn label_parsing() {
        assert_eq!("PNES".parse::<Label>().unwrap(), Label::Pnes);
        assert_eq!("Epilepsy".parse::<Label>().unwrap(), Label::Epilepsy);
        assert!(matches!("epileptic".parse::<Label>(), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let r = Cohort::new(vec![note("n1", "p1", Label::Pnes), note("n1", "p2", Label::Pnes)]);
        assert!(matches!(r, Err(Error::DuplicateId(id)) if id == "n1"));
    }

    #[test]
    fn dual_diagnosis_patients_removed() {
        let c = Cohort::new(vec![
            note("a", "p1", Label::Epilepsy),
            note("b", "p2", Label::Epilepsy),
            note("c", "p1", Label::Pnes),
            note("d", "p2", Label::Epilepsy),
            note("e", "p3", Label::Pnes),
        ])
        .unwrap();
        let out = exclude_dual_diagnosis(&c);
        assert_eq!(out.ids(), vec!["b", "d", "e"]);
        assert_eq!(exclude_dual_diagnosis(&out), out);
    }

    #[test]
    fn truncation_cuts_at_first_marker() {
        let n = Note::new(
            "a",
            "p",
            "History of events. DISCHARGE DIAGNOSIS: epilepsy.",
            Label::Epilepsy,
            "A",
        )
        .unwrap();
        let only_marker = Note::new("b", "p2", "Final diagnosis: PNES", Label::Pnes, "A").unwrap();
        let c = Cohort::new(vec![n, only_marker]).unwrap();
        let (out, dropped) = truncate_at_markers(&c, &DEFAULT_TRUNCATION_MARKERS).unwrap();
        assert_eq!(dropped, 1);
        assert_eq!(out.notes()[0].text, "History of events.");
        assert_eq!(out.notes()[0].word_count(), 3);
    }

    #[test]
    fn subset_preserves_requested_order() {
        let c = Cohort::new(vec![note("a", "1", Label::Pnes), note("b", "2", Label::Epilepsy)]).unwrap();
        let s = c.subset(&["b".into(), "a".into()]).unwrap();
        assert_eq!(s.ids(), vec!["b", "a"]);
        assert!(c.subset(&["zz".into()]).is_err());
    }
}

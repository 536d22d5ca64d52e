//! Phenotype categories and the sentence tagger.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clinician-curated phenotype domains, in tagging precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhenotypeCategory {
    #[serde(rename = "Demographics & Background")]
    DemographicsBackground,
    #[serde(rename = "Psychiatric & Psychological Traits")]
    PsychiatricTraits,
    #[serde(rename = "Neurological & Medical Comorbidity")]
    NeurologicalComorbidity,
    #[serde(rename = "Pre-ictal Symptoms")]
    PreIctalSymptoms,
    #[serde(rename = "Ictal Semiology")]
    IctalSemiology,
    #[serde(rename = "Post-ictal Features")]
    PostIctalFeatures,
    #[serde(rename = "Longitudinal Temporal Pattern")]
    LongitudinalPattern,
    #[serde(rename = "External Triggers")]
    ExternalTriggers,
    #[serde(rename = "Injury Consequences")]
    InjuryConsequences,
    #[serde(rename = "Clinical Evaluation & Diagnostic Findings")]
    ClinicalEvaluation,
    #[serde(rename = "Healthcare Utilization Pattern")]
    HealthcareUtilization,
    Unassigned,
}

impl PhenotypeCategory {
    /// The eleven clinical categories, in precedence order.
    pub const CLINICAL: [PhenotypeCategory; 11] = [
        Self::DemographicsBackground,
        Self::PsychiatricTraits,
        Self::NeurologicalComorbidity,
        Self::PreIctalSymptoms,
        Self::IctalSemiology,
        Self::PostIctalFeatures,
        Self::LongitudinalPattern,
        Self::ExternalTriggers,
        Self::InjuryConsequences,
        Self::ClinicalEvaluation,
        Self::HealthcareUtilization,
    ];

    /// All twelve values including `Unassigned`.
    pub const ALL: [PhenotypeCategory; 12] = [
        Self::DemographicsBackground,
        Self::PsychiatricTraits,
        Self::NeurologicalComorbidity,
        Self::PreIctalSymptoms,
        Self::IctalSemiology,
        Self::PostIctalFeatures,
        Self::LongitudinalPattern,
        Self::ExternalTriggers,
        Self::InjuryConsequences,
        Self::ClinicalEvaluation,
        Self::HealthcareUtilization,
        Self::Unassigned,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::DemographicsBackground => "Demographics & Background",
            Self::PsychiatricTraits => "Psychiatric & Psychological Traits",
            Self::NeurologicalComorbidity => "Neurological & Medical Comorbidity",
            Self::PreIctalSymptoms => "Pre-ictal Symptoms",
            Self::IctalSemiology => "Ictal Semiology",
            Self::PostIctalFeatures => "Post-ictal Features",
            Self::LongitudinalPattern => "Longitudinal Temporal Pattern",
            Self::ExternalTriggers => "External Triggers",
            Self::InjuryConsequences => "Injury Consequences",
            Self::ClinicalEvaluation => "Clinical Evaluation & Diagnostic Findings",
            Self::HealthcareUtilization => "Healthcare Utilization Pattern",
            Self::Unassigned => "Unassigned",
        }
    }

    /// Alternate labels used in published case tables and figures.
    fn aliases(self) -> &'static [&'static str] {
        match self {
            Self::PsychiatricTraits => &["Psychiatric & Psychological Phenotype"],
            Self::NeurologicalComorbidity => &["Medical Comorbidity Profile"],
            Self::PreIctalSymptoms => &["Pre-Event Features"],
            Self::IctalSemiology => &["Seizure Semiology"],
            Self::LongitudinalPattern => &["Event Temporal Pattern"],
            Self::ClinicalEvaluation => &[
                "Diagnostic Testing & Evaluation Phenotype",
                "Diagnostic Testing & Evaluation",
                "Diagnostic Testing Profile",
            ],
            _ => &[],
        }
    }
}

impl fmt::Display for PhenotypeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhenotypeCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|c| {
                c.name().eq_ignore_ascii_case(s) || c.aliases().iter().any(|a| a.eq_ignore_ascii_case(s))
            })
            .ok_or_else(|| Error::InvalidArgument(format!("unknown phenotype category {s:?}")))
    }
}

/// Anything that maps a sentence to a phenotype category.
pub trait PhenotypeTagger: Sync {
    fn tag(&self, sentence: &str) -> PhenotypeCategory;
}

const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.json");

/// Case-insensitive phrase lexicon. A phrase matches only on word
/// boundaries; when several categories match, the earliest in precedence
/// order wins.
#[derive(Debug, Clone)]
pub struct LexiconTagger {
    phrases: Vec<(PhenotypeCategory, Vec<String>)>,
}

impl LexiconTagger {
    /// The lexicon shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_LEXICON).expect("built-in lexicon is valid")
    }

    /// Parses a JSON map `category name → [phrases]`.
    pub fn from_json(json: &str) -> Result<Self> {
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(json)?;
        let mut by_cat: BTreeMap<PhenotypeCategory, Vec<String>> = BTreeMap::new();
        for (name, phrases) in raw {
            let cat: PhenotypeCategory = name.parse()?;
            if cat == PhenotypeCategory::Unassigned {
                return Err(Error::InvalidArgument("lexicon cannot list Unassigned phrases".into()));
            }
            by_cat
                .entry(cat)
                .or_default()
                .extend(phrases.into_iter().map(|p| normalize(&p)).filter(|p| !p.is_empty()));
        }
        Ok(Self {
            phrases: by_cat.into_iter().collect(),
        })
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Lowercases and collapses every non-alphanumeric run to one space.
fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for ch in s.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(ch);
        } else {
            pending_space = true;
        }
    }
    out
}

impl PhenotypeTagger for LexiconTagger {
    fn tag(&self, sentence: &str) -> PhenotypeCategory {
        let padded = format!(" {} ", normalize(sentence));
        for (cat, phrases) in &self.phrases {
            if phrases.iter().any(|p| padded.contains(&format!(" {p} "))) {
                return *cat;
            }
        }
        PhenotypeCategory::Unassigned
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_and_aliases_parse() {
        for c in PhenotypeCategory::ALL {
            assert_eq!(c.name().parse::<PhenotypeCategory>().unwrap(), c);
        }
        assert_eq!(
            "Seizure Semiology".parse::<PhenotypeCategory>().unwrap(),
            PhenotypeCategory::IctalSemiology
        );
        assert_eq!(
            "Diagnostic Testing & Evaluation Phenotype".parse::<PhenotypeCategory>().unwrap(),
            PhenotypeCategory::ClinicalEvaluation
        );
        assert!("Weather".parse::<PhenotypeCategory>().is_err());
    }

    #[test]
    fn serde_uses_display_names() {
        let s = serde_json::to_string(&PhenotypeCategory::PreIctalSymptoms).unwrap();
        assert_eq!(s, "\"Pre-ictal Symptoms\"");
    }

    #[test]
    fn tagger_examples() {
        let t = LexiconTagger::builtin();
        assert_eq!(
            t.tag("rhythmic movements of the left arm lasting 45 minutes"),
            PhenotypeCategory::IctalSemiology
        );
        assert_eq!(
            t.tag("history of depression and anxiety"),
            PhenotypeCategory::PsychiatricTraits
        );
        assert_eq!(t.tag("the weather was sunny"), PhenotypeCategory::Unassigned);
    }

    #[test]
    fn phrases_match_whole_words_only() {
        let t = LexiconTagger::from_json(r#"{"Ictal Semiology": ["arm"]}"#).unwrap();
        assert_eq!(t.tag("Left ARM twitching"), PhenotypeCategory::IctalSemiology);
        assert_eq!(t.tag("the alarm rang"), PhenotypeCategory::Unassigned);
    }

    #[test]
    fn precedence_follows_category_order() {
        let t = LexiconTagger::from_json(
            r#"{"Ictal Semiology": ["shaking"], "Psychiatric & Psychological Traits": ["anxiety"]}"#,
        )
        .unwrap();
        assert_eq!(t.tag("shaking with anxiety"), PhenotypeCategory::PsychiatricTraits);
    }

    #[test]
    fn table_four_sentences_tag_to_published_categories() {
        let t = LexiconTagger::builtin();
        let rows = [
            ("In ____, she was witnessed at ____ to develop acute onset of left facial redness, left eye fluttering and chronic movements of the left arm that lasted 45 minutes.", "Seizure Semiology"),
            ("The second one was much more prolonged and started again with a behavioral arrest but evolved into shaking of the arms and the third event occurred out of sleep and consisted of 30 seconds of shaking of the arms followed by behavioral arrest.", "Seizure Semiology"),
            ("These headaches are often followed by her aura (awareness that she may have an event), but if the headache is treated, she does not have an event.", "Pre-Event Features"),
            ("The background activity was relatively slow suggestive of a mild encephalopathy with additional focal slowing in the left central area suggestive of subcortical dysfunction in this region.", "Diagnostic Testing & Evaluation Phenotype"),
            ("EEG ____: This is an abnormal routine EEG due to the slow background suggestive of a moderate encephalopathy.", "Diagnostic Testing & Evaluation Phenotype"),
        ];
        for (text, label) in rows {
            let want: PhenotypeCategory = label.parse().unwrap();
            assert_eq!(t.tag(text), want, "{text}");
        }
    }
}

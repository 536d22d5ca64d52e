//! Planted-signal synthetic cohorts.
//!
//! Every note holds one templated sentence per phenotype category plus a few
//! filler sentences, in shuffled order. For each configured signal category
//! the sentence is, with probability `signal_strength`, drawn from a
//! class-specific template set instead of the shared neutral one. Those
//! planted sentence positions are returned alongside the cohort.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{largest_remainder, Cohort, Label, Note};
use crate::error::{Error, Result};
use crate::explain::PhenotypeCategory;
use crate::rng;

use PhenotypeCategory as C;

/// Note id → indices (in sentence order) of the sentences that carry signal.
pub type PlantedMap = BTreeMap<String, Vec<usize>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub epilepsy_fraction: f64,
    pub seed: u64,
    /// Probability that a signal category's sentence is class-specific.
    pub signal_strength: f64,
    pub signal_categories: Vec<PhenotypeCategory>,
    /// Probability that a planted sentence uses the opposite class's template.
    pub confusion_rate: f64,
    pub min_filler: usize,
    pub max_filler: usize,
    pub site: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 100,
            epilepsy_fraction: 0.5,
            seed: 0,
            signal_strength: 1.0,
            signal_categories: vec![
                C::PsychiatricTraits,
                C::NeurologicalComorbidity,
                C::IctalSemiology,
                C::PostIctalFeatures,
                C::ClinicalEvaluation,
            ],
            confusion_rate: 0.0,
            min_filler: 2,
            max_filler: 5,
            site: "A".to_string(),
        }
    }
}

impl SynthConfig {
    /// A harder variant: weak, partly contradictory signal.
    pub fn hard(n: usize, epilepsy_fraction: f64, seed: u64) -> Self {
        Self {
            n,
            epilepsy_fraction,
            seed,
            signal_strength: 0.35,
            confusion_rate: 0.15,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epilepsy_fraction > 0.0 && self.epilepsy_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "epilepsy fraction must be in (0, 1), got {}",
                self.epilepsy_fraction
            )));
        }
        for (name, p) in [("signal strength", self.signal_strength), ("confusion rate", self.confusion_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.min_filler > self.max_filler {
            return Err(Error::InvalidArgument("min_filler exceeds max_filler".into()));
        }
        if self.signal_categories.contains(&C::Unassigned) {
            return Err(Error::InvalidArgument("Unassigned cannot carry signal".into()));
        }
        Ok(())
    }
}

struct Templates {
    neutral: &'static [&'static str],
    epilepsy: &'static [&'static str],
    pnes: &'static [&'static str],
}

fn templates(cat: PhenotypeCategory) -> Templates {
    match cat {
        C::DemographicsBackground => Templates {
            neutral: &[
                "The patient is a {age} year old {job} who lives with {rel}.",
                "Family history is notable for {famhx} in a {kin}.",
                "The patient was born at term and completed {school}.",
            ],
            epilepsy: &[
                "Family history is significant for epilepsy in a {kin} and febrile convulsions in infancy.",
                "Birth history is notable for neonatal hypoxia and developmental delay.",
            ],
            pnes: &[
                "Social history is notable for unemployment and recent divorce.",
                "The patient is a {age} year old woman with a history of childhood abuse.",
            ],
        },
        C::PsychiatricTraits => Templates {
            neutral: &[
                "Mood was described as {mood} during the visit.",
                "Psychiatric screening was completed and mood appears {mood}.",
            ],
            epilepsy: &[
                "Psychiatric review is negative and mood is stable without psychotropic medication.",
                "Psychiatric history is unremarkable with no prior counseling or therapy.",
            ],
            pnes: &[
                "Psychiatric history includes depression, anxiety and post traumatic stress disorder.",
                "The patient reports a history of depression with panic attacks and dissociation.",
            ],
        },
        C::NeurologicalComorbidity => Templates {
            neutral: &[
                "Past medical history includes {medcond}.",
                "Medical history is significant for {medcond} which is well controlled.",
            ],
            epilepsy: &[
                "Past medical history includes remote stroke and hippocampal sclerosis.",
                "Medical history is significant for prior meningitis and cortical dysplasia.",
            ],
            pnes: &[
                "Past medical history includes fibromyalgia, chronic pain and irritable bowel syndrome.",
                "Medical history is significant for chronic fatigue and functional abdominal pain.",
            ],
        },
        C::PreIctalSymptoms => Templates {
            neutral: &[
                "Before the episodes the patient sometimes feels {pre}.",
                "Prior to events there is a vague sense of feeling {pre}.",
            ],
            epilepsy: &[
                "Events are preceded by a rising epigastric aura and deja vu.",
                "Before the episodes there is a stereotyped aura with an odd metallic taste.",
            ],
            pnes: &[
                "Events are preceded by stress, overwhelming emotion and hyperventilation.",
                "Before the episodes the patient feels panicky and cannot catch a breath.",
            ],
        },
        C::IctalSemiology => Templates {
            neutral: &[
                "During the episode there was {move} of the {limb} lasting {dur}.",
                "Witnesses describe {move} of the {limb} for about {dur}.",
            ],
            epilepsy: &[
                "Witnesses describe tonic stiffening then rhythmic clonic jerking with tongue biting.",
                "During the episode there was head version to the {side} followed by generalized convulsion.",
            ],
            pnes: &[
                "Witnesses describe asynchronous thrashing with pelvic thrusting and eyes tightly closed.",
                "During the episode there was side to side head shaking with waxing and waning movements.",
            ],
        },
        C::PostIctalFeatures => Templates {
            neutral: &[
                "After the episode the patient {post}.",
                "Following the event the patient {post}.",
            ],
            epilepsy: &[
                "After the episode there was prolonged postictal confusion and drowsiness.",
                "Following the event the patient had a postictal headache and sore muscles.",
            ],
            pnes: &[
                "After the episode the patient was immediately alert and tearful with full recall.",
                "Following the event the patient could recount every detail and was crying.",
            ],
        },
        C::LongitudinalPattern => Templates {
            neutral: &[
                "Episodes have occurred about {n} times over the past {period}.",
                "The frequency of episodes is roughly {n} per {unit}.",
            ],
            epilepsy: &[
                "Episodes occur in stereotyped clusters and often arise from sleep.",
                "The frequency of episodes increased after the medication was tapered.",
            ],
            pnes: &[
                "Episodes have occurred daily over the past {period} despite multiple medication trials.",
                "The frequency of episodes escalated with prolonged spells lasting over an hour.",
            ],
        },
        C::ExternalTriggers => Templates {
            neutral: &[
                "No clear trigger was identified for the recent episodes.",
                "The patient could not name a specific trigger for the events.",
            ],
            epilepsy: &[
                "Missed doses and sleep deprivation were identified as triggers.",
                "Flashing lights appear to trigger some of the events.",
            ],
            pnes: &[
                "Episodes are triggered by arguments and stressful conversations.",
                "Emotional conflict at home seems to trigger the events.",
            ],
        },
        C::InjuryConsequences => Templates {
            neutral: &[
                "There were no injuries during the recent episodes.",
                "The patient denies any injury related to the events.",
            ],
            epilepsy: &[
                "The patient sustained a lateral tongue laceration and a shoulder injury during an event.",
                "Prior events caused burns and a facial fracture from falls.",
            ],
            pnes: &[
                "Despite frequent dramatic falls there have been no significant injuries.",
                "The patient reports only minor bruising without serious injury.",
            ],
        },
        C::ClinicalEvaluation => Templates {
            neutral: &[
                "A routine EEG was ordered and the MRI is {pending}.",
                "Neurological examination was {exam} on this visit.",
            ],
            epilepsy: &[
                "The EEG showed left temporal epileptiform discharges with sharp waves.",
                "MRI showed mesial temporal sclerosis concordant with interictal spikes.",
            ],
            pnes: &[
                "Video EEG captured typical events without any electrographic correlate.",
                "Prolonged EEG monitoring recorded several typical spells with a normal background.",
            ],
        },
        C::HealthcareUtilization => Templates {
            neutral: &[
                "The patient was seen in the emergency department {n} times this year.",
                "There have been {n} clinic visits since the last admission.",
            ],
            epilepsy: &[
                "The patient was admitted to the epilepsy monitoring unit for presurgical evaluation.",
                "The patient follows regularly with an epileptologist for medication titration.",
            ],
            pnes: &[
                "There have been frequent emergency department visits and one intubation for presumed status.",
                "The patient has seen many specialists and had multiple admissions without diagnosis.",
            ],
        },
        C::Unassigned => Templates {
            neutral: FILLER,
            epilepsy: FILLER,
            pnes: FILLER,
        },
    }
}

const FILLER: &[&str] = &[
    "Vital signs were within normal limits.",
    "The plan was discussed in detail.",
    "Questions were answered to satisfaction.",
    "Follow up is scheduled in {n} weeks.",
    "The patient is allergic to {allergy}.",
    "The note was reviewed with the attending.",
    "Current outpatient pharmacy records were reconciled.",
    "The patient arrived on time and was cooperative.",
];

fn pool(key: &str) -> &'static [&'static str] {
    match key {
        "job" => &["teacher", "nurse", "mechanic", "student", "cashier", "farmer", "driver", "accountant"],
        "rel" => &["a partner", "two children", "a roommate", "parents", "a sister"],
        "kin" => &["cousin", "grandparent", "uncle", "aunt", "sibling"],
        "famhx" => &["diabetes", "heart disease", "hypertension", "cancer", "thyroid disease"],
        "school" => &["high school", "college", "a trade program", "graduate school"],
        "mood" => &["euthymic", "calm", "pleasant", "neutral", "appropriate"],
        "medcond" => &["hypertension", "hyperlipidemia", "asthma", "hypothyroidism", "obesity", "anemia"],
        "pre" => &["tired", "lightheaded", "warm", "hungry", "restless"],
        "move" => &["shaking", "stiffening", "jerking", "trembling", "twitching"],
        "limb" => &["left arm", "right arm", "both legs", "left leg", "whole body"],
        "dur" => &["two minutes", "one minute", "five minutes", "ten minutes", "thirty seconds"],
        "side" => &["left", "right"],
        "post" => &["felt tired", "went home", "rested briefly", "was sleepy", "had a drink of water"],
        "period" => &["year", "six months", "three months", "month"],
        "unit" => &["week", "month", "year"],
        "pending" => &["pending", "scheduled", "requested"],
        "exam" => &["nonfocal", "unremarkable", "normal"],
        "allergy" => &["penicillin", "sulfa drugs", "latex", "shellfish", "nothing"],
        _ => &["unknown"],
    }
}

fn fill(template: &str, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::with_capacity(template.len() + 16);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = open + rest[open..].find('}').expect("unterminated placeholder");
        let key = &rest[open + 1..close];
        match key {
            "age" => out.push_str(&rng.gen_range(18..80).to_string()),
            "n" => out.push_str(&rng.gen_range(2..12).to_string()),
            _ => out.push_str(pool(key).choose(rng).expect("non-empty pool")),
        }
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    out
}

/// Builds a synthetic cohort and the positions of its planted sentences.
pub fn generate_synthetic(config: &SynthConfig) -> Result<(Cohort, PlantedMap)> {
    config.validate()?;
    let mut rng = rng::sub_rng(config.seed, rng::SYNTH, 0);
    let counts = largest_remainder(
        config.n,
        &[config.epilepsy_fraction, 1.0 - config.epilepsy_fraction],
    );
    let mut labels: Vec<Label> = std::iter::repeat(Label::Epilepsy)
        .take(counts[0])
        .chain(std::iter::repeat(Label::Pnes).take(counts[1]))
        .collect();
    labels.shuffle(&mut rng);

    let width = config.n.max(1).to_string().len().max(5);
    let mut notes = Vec::with_capacity(config.n);
    let mut planted = PlantedMap::new();
    for (i, label) in labels.into_iter().enumerate() {
        // (sentence, carries signal)
        let mut sentences: Vec<(String, bool)> = Vec::with_capacity(16);
        for cat in PhenotypeCategory::CLINICAL {
            let t = templates(cat);
            let signal = config.signal_categories.contains(&cat) && rng.gen_bool(config.signal_strength);
            let set = if signal {
                let voice = if rng.gen_bool(config.confusion_rate) { label.other() } else { label };
                match voice {
                    Label::Epilepsy => t.epilepsy,
                    Label::Pnes => t.pnes,
                }
            } else {
                t.neutral
            };
            let template = set.choose(&mut rng).expect("non-empty template set");
            sentences.push((fill(template, &mut rng), signal));
        }
        let n_filler = rng.gen_range(config.min_filler..=config.max_filler);
        for _ in 0..n_filler {
            let template = FILLER.choose(&mut rng).expect("non-empty filler");
            sentences.push((fill(template, &mut rng), false));
        }
        sentences.shuffle(&mut rng);

        let id = format!("syn{:0width$}", i + 1);
        let marks: Vec<usize> = sentences
            .iter()
            .enumerate()
            .filter_map(|(k, (_, s))| s.then_some(k))
            .collect();
        let text = sentences.into_iter().map(|(s, _)| s).collect::<Vec<_>>().join(" ");
        notes.push(Note::new(id.clone(), format!("pt{:0width$}", i + 1), text, label, config.site.clone())?);
        planted.insert(id, marks);
    }
    Ok((Cohort::new(notes)?, planted))
}

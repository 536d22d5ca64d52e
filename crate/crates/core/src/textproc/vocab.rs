use std::collections::HashMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::split_tokens;
use crate::corpus::Cohort;
use crate::error::{Error, Result};

pub const UNKNOWN_ID: u32 = 0;

/// Dense surface → id map; id 0 is reserved for unknown tokens.
///
/// Serialized as a JSON array of surfaces where position `i` holds id `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    surfaces: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_surfaces(surfaces: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(surfaces.len());
        for (i, s) in surfaces.iter().enumerate() {
            if index.insert(s.clone(), i as u32 + 1).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate vocabulary entry {s:?}")));
            }
        }
        Ok(Self { surfaces, index })
    }

    pub fn id(&self, surface: &str) -> u32 {
        self.index.get(surface).copied().unwrap_or(UNKNOWN_ID)
    }

    pub fn surface(&self, id: u32) -> Option<&str> {
        match id {
            UNKNOWN_ID => None,
            _ => self.surfaces.get(id as usize - 1).map(String::as_str),
        }
    }

    /// Number of ids including the unknown id.
    pub fn size(&self) -> usize {
        self.surfaces.len() + 1
    }

    pub fn surfaces(&self) -> &[String] {
        &self.surfaces
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.surfaces.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let surfaces = Vec::<String>::deserialize(d)?;
        Vocabulary::from_surfaces(surfaces).map_err(serde::de::Error::custom)
    }
}

/// Ranks surfaces by frequency (descending) then alphabetically, keeping
/// those seen at least `min_frequency` times, at most `max_size` of them.
pub fn build_vocab(cohort: &Cohort, min_frequency: usize, max_size: usize) -> Result<Vocabulary> {
    if cohort.is_empty() {
        return Err(Error::InvalidArgument("cannot build a vocabulary from an empty cohort".into()));
    }
    let mut freq: HashMap<String, usize> = HashMap::new();
    for n in cohort.notes() {
        for (surface, _) in split_tokens(&n.text) {
            *freq.entry(surface).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = freq
        .into_iter()
        .filter(|(_, c)| *c >= min_frequency.max(1))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_size);
    Vocabulary::from_surfaces(ranked.into_iter().map(|(s, _)| s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Note};

    fn cohort(texts: &[&str]) -> Cohort {
        Cohort::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Note::new(format!("n{i}"), "p", *t, Label::Pnes, "A").unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn frequency_then_alphabetical() {
        let v = build_vocab(&cohort(&["a b a"]), 1, 100).unwrap();
        assert_eq!(v.id("a"), 1);
        assert_eq!(v.id("b"), 2);
        assert_eq!(v.id("zzz"), UNKNOWN_ID);
        let tie = build_vocab(&cohort(&["b a"]), 1, 100).unwrap();
        assert_eq!(tie.surfaces(), ["a", "b"]);
    }

    #[test]
    fn min_frequency_and_max_size() {
        let v = build_vocab(&cohort(&["a b a"]), 2, 100).unwrap();
        assert_eq!(v.surfaces(), ["a"]);
        let capped = build_vocab(&cohort(&["a a a b b c"]), 1, 2).unwrap();
        assert_eq!(capped.surfaces(), ["a", "b"]);
        assert_eq!(capped.size(), 3);
    }

    #[test]
    fn json_is_array_of_surfaces() {
        let v = Vocabulary::from_surfaces(vec!["x".into(), "y".into()]).unwrap();
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"["x","y"]"#);
        let back: Vocabulary = serde_json::from_str(&s).unwrap();
        assert_eq!(back.id("y"), 2);
        assert_eq!(back.surface(2), Some("y"));
        assert_eq!(back.surface(0), None);
        assert!(serde_json::from_str::<Vocabulary>(r#"["x","x"]"#).is_err());
    }

    #[test]
    fn empty_cohort_rejected() {
        assert!(build_vocab(&Cohort::default(), 1, 10).is_err());
    }
}

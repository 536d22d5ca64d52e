use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::PhenotypeCategory;
use crate::error::{Error, Result};
use crate::textproc::SentenceIndex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceAttribution {
    pub index: usize,
    /// Byte range of the sentence in the note text.
    pub text_span: Range<usize>,
    pub raw: f64,
    /// Normalized score in [0, 1].
    pub score: f64,
    /// 1-based rank, 1 = most influential.
    pub rank: usize,
    pub category: PhenotypeCategory,
}

/// Raw sentence IG: the sum of token attributions inside each sentence.
pub fn sentence_attributions(token_attributions: &[f64], sentences: &SentenceIndex) -> Result<Vec<f64>> {
    sentences
        .sentences
        .iter()
        .map(|s| {
            token_attributions
                .get(s.tokens.clone())
                .map(|a| a.iter().sum())
                .ok_or_else(|| {
                    Error::Shape(format!(
                        "sentence {} covers tokens {:?} of {}",
                        s.index,
                        s.tokens,
                        token_attributions.len()
                    ))
                })
        })
        .collect()
}

/// Clamps negatives to 0 and divides by the note maximum. Returns
/// `(score, rank)` per sentence. Ranks order by score (by raw value when
/// nothing is positive), ties going to the earlier sentence.
pub fn normalize_and_rank(raw: &[f64]) -> Result<Vec<(f64, usize)>> {
    if raw.is_empty() {
        return Err(Error::InvalidArgument("no sentences to rank".into()));
    }
    if let Some(v) = raw.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("sentence attribution {v}")));
    }
    let max = raw.iter().fold(0.0f64, |m, &v| m.max(v));
    let scores: Vec<f64> = if max > 0.0 {
        raw.iter().map(|&v| v.max(0.0) / max).collect()
    } else {
        vec![0.0; raw.len()]
    };
    let mut order: Vec<usize> = (0..raw.len()).collect();
    // stable sort keeps sentence order among ties
    if max > 0.0 {
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    } else {
        order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
    }
    let mut ranks = vec![0; raw.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    Ok(scores.into_iter().zip(ranks).collect())
}

/// Fraction of the `k` top-ranked sentences whose index is in `relevant`.
pub fn top_k_precision(sentences: &[SentenceAttribution], relevant: &[usize], k: usize) -> Option<f64> {
    if k == 0 {
        return None;
    }
    let hits = sentences
        .iter()
        .filter(|s| s.rank <= k && relevant.contains(&s.index))
        .count();
    let considered = sentences.iter().filter(|s| s.rank <= k).count();
    (considered > 0).then(|| hits as f64 / considered as f64)
}

/// Precision over the `min(k, |relevant|)` top-ranked sentences, so a perfect
/// ranking scores 1 even when fewer than `k` sentences are relevant.
pub fn planted_precision(sentences: &[SentenceAttribution], relevant: &[usize], k: usize) -> Option<f64> {
    let cutoff = k.min(relevant.len()).min(sentences.len());
    if cutoff == 0 {
        return None;
    }
    let hits = sentences
        .iter()
        .filter(|s| s.rank <= cutoff && relevant.contains(&s.index))
        .count();
    Some(hits as f64 / cutoff as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textproc::Sentence;
    use proptest::prelude::*;

    fn index(ranges: &[Range<usize>]) -> SentenceIndex {
        SentenceIndex {
            sentences: ranges
                .iter()
                .enumerate()
                .map(|(index, t)| Sentence {
                    index,
                    span: 0..0,
                    tokens: t.clone(),
                })
                .collect(),
        }
    }

    #[test]
    fn sums_are_local_to_sentences() {
        let a = [0.0, 0.0, 1.5, 2.0, -0.5];
        assert_eq!(sentence_attributions(&a, &index(&[0..5])).unwrap(), vec![3.0]);
        assert_eq!(sentence_attributions(&a, &index(&[0..2, 2..5])).unwrap(), vec![0.0, 3.0]);
        assert_eq!(sentence_attributions(&a, &index(&[0..2, 2..2, 2..5])).unwrap()[1], 0.0);
        assert!(sentence_attributions(&a, &index(&[0..6])).is_err());
    }

    #[test]
    fn partition_conserves_dyadic_totals_exactly() {
        let a: Vec<f64> = (0..20).map(|i| (i as f64 - 7.0) / 8.0).collect();
        let s = sentence_attributions(&a, &index(&[0..3, 3..3, 3..11, 11..20])).unwrap();
        assert_eq!(s.iter().sum::<f64>(), a.iter().sum::<f64>());
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(
            normalize_and_rank(&[2.0, 1.0, -0.5]).unwrap(),
            vec![(1.0, 1), (0.5, 2), (0.0, 3)]
        );
        assert_eq!(
            normalize_and_rank(&[0.3, 0.3, 0.3]).unwrap(),
            vec![(1.0, 1), (1.0, 2), (1.0, 3)]
        );
        // nothing positive: scores 0, ranks follow raw values
        assert_eq!(
            normalize_and_rank(&[-2.0, -0.5, -1.0]).unwrap(),
            vec![(0.0, 3), (0.0, 1), (0.0, 2)]
        );
        assert!(normalize_and_rank(&[]).is_err());
    }

    fn ranked(ranks: &[usize]) -> Vec<SentenceAttribution> {
        ranks
            .iter()
            .enumerate()
            .map(|(index, &rank)| SentenceAttribution {
                index,
                text_span: 0..0,
                raw: 0.0,
                score: 0.0,
                rank,
                category: crate::explain::PhenotypeCategory::Unassigned,
            })
            .collect()
    }

    #[test]
    fn precision_cutoffs() {
        // sentence i has rank ranks[i]; relevant = {0, 2}
        let s = ranked(&[1, 4, 2, 3, 5]);
        assert_eq!(top_k_precision(&s, &[0, 2], 2), Some(1.0));
        assert_eq!(top_k_precision(&s, &[0, 2], 4), Some(0.5));
        assert_eq!(top_k_precision(&s, &[0, 2], 10), Some(0.4));
        assert_eq!(planted_precision(&s, &[0, 2], 10), Some(1.0));
        let s = ranked(&[1, 2, 3, 4, 5]);
        assert_eq!(planted_precision(&s, &[0, 2], 10), Some(0.5));
        assert_eq!(planted_precision(&s, &[], 10), None);
        assert_eq!(top_k_precision(&s, &[0], 0), None);
    }

    proptest! {
        #[test]
        fn ranking_invariant_under_positive_scaling(
            raw in prop::collection::vec(-3.0f64..3.0, 1..30),
            lambda in 0.01f64..100.0,
        ) {
            let scaled: Vec<f64> = raw.iter().map(|v| v * lambda).collect();
            let a = normalize_and_rank(&raw).unwrap();
            let b = normalize_and_rank(&scaled).unwrap();
            let ra: Vec<usize> = a.iter().map(|x| x.1).collect();
            let rb: Vec<usize> = b.iter().map(|x| x.1).collect();
            prop_assert_eq!(ra, rb);
            let mut seen: Vec<usize> = a.iter().map(|x| x.1).collect();
            seen.sort();
            prop_assert_eq!(seen, (1..=raw.len()).collect::<Vec<_>>());
            prop_assert!(a.iter().all(|x| (0.0..=1.0).contains(&x.0)));
            if raw.iter().any(|&v| v > 0.0) {
                prop_assert!(a.iter().any(|x| x.0 == 1.0 && x.1 == 1));
            }
        }
    }
}

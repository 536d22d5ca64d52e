use serde::{Deserialize, Serialize};

use super::{PhenotypeCategory, SentenceAttribution};
use crate::error::{Error, Result};

pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub category: PhenotypeCategory,
    #[serde(rename = "A_c")]
    pub score: f64,
    pub k: usize,
}

/// Accumulated category scores `A_c = (1/k) Σ_{i ≤ k} s_i · 1(i ∈ c)` over
/// the top-`k` ranked sentences. Notes with fewer than `k` sentences use all
/// of them and still divide by `k`. Returns one entry per category
/// (including `Unassigned`) in precedence order.
pub fn accumulated_ig(sentences: &[SentenceAttribution], k: usize) -> Result<Vec<CategoryScore>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if sentences.is_empty() {
        return Err(Error::InvalidArgument("note has no sentences".into()));
    }
    let mut top: Vec<&SentenceAttribution> = sentences.iter().collect();
    top.sort_by_key(|s| s.rank);
    top.truncate(k);
    Ok(PhenotypeCategory::ALL
        .into_iter()
        .map(|category| {
            let sum: f64 = top
                .iter()
                .filter(|s| s.category == category)
                .map(|s| s.score)
                .sum();
            CategoryScore {
                category,
                score: sum / k as f64,
                k,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use PhenotypeCategory as C;

    fn sent(rank: usize, score: f64, category: PhenotypeCategory) -> SentenceAttribution {
        SentenceAttribution {
            index: rank - 1,
            text_span: 0..0,
            raw: score,
            score,
            rank,
            category,
        }
    }

    #[test]
    fn single_category_top_k() {
        let s: Vec<_> = (1..=10).map(|r| sent(r, 0.4, C::PostIctalFeatures)).collect();
        let a = accumulated_ig(&s, 10).unwrap();
        assert_eq!(a.len(), 12);
        for c in &a {
            let expected = if c.category == C::PostIctalFeatures { 0.4 } else { 0.0 };
            assert!((c.score - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn short_notes_keep_divisor_k() {
        let s = vec![sent(1, 1.0, C::IctalSemiology), sent(2, 0.5, C::Unassigned)];
        let a = accumulated_ig(&s, 10).unwrap();
        let get = |c| a.iter().find(|x| x.category == c).unwrap().score;
        assert_eq!(get(C::IctalSemiology), 0.1);
        assert_eq!(get(C::Unassigned), 0.05);
    }

    #[test]
    fn only_top_k_counted_and_conserved() {
        let cats = [C::IctalSemiology, C::PsychiatricTraits, C::Unassigned];
        let s: Vec<_> = (1..=15)
            .map(|r| sent(r, 1.0 - r as f64 / 20.0, cats[r % 3]))
            .collect();
        let a = accumulated_ig(&s, 10).unwrap();
        let total: f64 = a.iter().map(|c| c.score).sum();
        let expected: f64 = s.iter().filter(|x| x.rank <= 10).map(|x| x.score).sum::<f64>() / 10.0;
        assert!((total - expected).abs() < 1e-15);
        assert!(accumulated_ig(&s, 0).is_err());
    }
}

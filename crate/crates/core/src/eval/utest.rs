use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest per-sample size for which the exact null distribution is used.
const EXACT_MAX: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UTestMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UTestResult {
    /// `U` of the first sample: pairs where it wins, ties counted half.
    pub u: f64,
    pub p_value: f64,
    pub method: UTestMethod,
}

/// Two-sided Mann–Whitney U test.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<UTestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("Mann–Whitney U needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Mann–Whitney U sample".into()));
    }
    let mut u2 = 0u64; // doubled U
    for x in a {
        for y in b {
            u2 += match x.total_cmp(y) {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    let u = u2 as f64 / 2.0;
    let tie_groups = tie_group_sizes(a, b);
    let has_ties = tie_groups.iter().any(|&t| t > 1);
    if a.len() <= EXACT_MAX && b.len() <= EXACT_MAX && !has_ties {
        return Ok(UTestResult {
            u,
            p_value: exact_p(a.len(), b.len(), (u2 / 2) as usize),
            method: UTestMethod::Exact,
        });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let mean = na * nb / 2.0;
    let tie_term: f64 = tie_groups.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * normal.sf(z)).min(1.0)
    };
    Ok(UTestResult {
        u,
        p_value,
        method: UTestMethod::NormalApprox,
    })
}

fn tie_group_sizes(a: &[f64], b: &[f64]) -> Vec<usize> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < all.len() {
        let mut j = i + 1;
        while j < all.len() && all[j] == all[i] {
            j += 1;
        }
        groups.push(j - i);
        i = j;
    }
    groups
}

/// Two-sided exact p-value: `min(1, 2 · min(P(U ≤ u), P(U ≥ u)))` under the
/// null distribution of U for sample sizes `(na, nb)`.
fn exact_p(na: usize, nb: usize, u: usize) -> f64 {
    // counts[i][j][k]: arrangements of i a's and j b's with U = k
    let max_u = na * nb;
    let mut counts = vec![vec![vec![0f64; max_u + 1]; nb + 1]; na + 1];
    for row in counts.iter_mut() {
        row[0][0] = 1.0;
    }
    for j in 0..=nb {
        counts[0][j][0] = 1.0;
    }
    for i in 1..=na {
        for j in 1..=nb {
            for k in 0..=i * j {
                // largest element is an `a` (beats all j b's) or a `b`
                let from_a = if k >= j { counts[i - 1][j][k - j] } else { 0.0 };
                counts[i][j][k] = from_a + counts[i][j - 1][k];
            }
        }
    }
    let dist = &counts[na][nb];
    let total: f64 = dist.iter().sum();
    let lower: f64 = dist[..=u].iter().sum();
    let upper: f64 = dist[u..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

/// `***` p < 0.001, `**` p < 0.01, `*` p < 0.05, otherwise `n.s.`.
pub fn significance_stars(p: f64) -> Result<&'static str> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p-value {p} outside [0, 1]")));
    }
    Ok(if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        "n.s."
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_small_example() {
        let r = mann_whitney_u(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.u, 9.0);
        assert_eq!(r.method, UTestMethod::Exact);
        assert!((r.p_value - 0.1).abs() < 1e-15);
        let s = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(s.p_value, r.p_value);
    }

    #[test]
    fn identical_samples_not_significant() {
        let a = [0.0, 1.0, 1.0, 0.0, 1.0];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(r.method, UTestMethod::NormalApprox);
        assert!(r.p_value >= 0.99);
        let c = [2.0; 4];
        assert_eq!(mann_whitney_u(&c, &c).unwrap().p_value, 1.0);
    }

    #[test]
    fn large_samples_use_normal_approximation() {
        let a: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| i as f64 + 0.5 + 20.0).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.method, UTestMethod::NormalApprox);
        assert!(r.p_value < 1e-6);
        assert_eq!(mann_whitney_u(&b, &a).unwrap().p_value, r.p_value);
    }

    /// Enumerates every assignment of ranks 1..n to sample a.
    fn enumerated_p(na: usize, nb: usize, u_obs: usize) -> f64 {
        let n = na + nb;
        let (mut total, mut lower, mut upper) = (0u64, 0u64, 0u64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != na {
                continue;
            }
            // U = pairs (a, b) with a ranked above b
            let mut u = 0;
            for i in 0..n {
                for j in 0..n {
                    if mask & (1 << i) != 0 && mask & (1 << j) == 0 && i > j {
                        u += 1;
                    }
                }
            }
            total += 1;
            lower += (u <= u_obs) as u64;
            upper += (u >= u_obs) as u64;
        }
        (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
    }

    #[test]
    fn exact_matches_enumeration() {
        for na in 1..=6 {
            for nb in 1..=6 {
                for u in 0..=na * nb {
                    assert!((exact_p(na, nb, u) - enumerated_p(na, nb, u)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn stars() {
        assert_eq!(significance_stars(0.0005).unwrap(), "***");
        assert_eq!(significance_stars(0.001).unwrap(), "**");
        assert_eq!(significance_stars(0.005).unwrap(), "**");
        assert_eq!(significance_stars(0.03).unwrap(), "*");
        assert_eq!(significance_stars(0.05).unwrap(), "n.s.");
        assert_eq!(significance_stars(0.5).unwrap(), "n.s.");
        assert!(significance_stars(1.5).is_err());
        assert!(significance_stars(f64::NAN).is_err());
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }
}

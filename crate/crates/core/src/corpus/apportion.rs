//! Largest-remainder (Hamilton) apportionment.

const EPS: f64 = 1e-9;

/// Rounds non-negative real `quotas` to integers summing to `total`.
///
/// Each quota is floored, then the remaining units go to the largest
/// fractional remainders; equal remainders favour the lower index. Quotas
/// within `1e-9` of an integer are treated as that integer so binary
/// representation error cannot move a unit.
pub fn apportion_quotas(quotas: &[f64], total: usize) -> Vec<usize> {
    let mut counts = Vec::with_capacity(quotas.len());
    let mut remainders = Vec::with_capacity(quotas.len());
    for &q in quotas {
        let q = q.max(0.0);
        let nearest = q.round();
        let (whole, frac) = if (q - nearest).abs() < EPS {
            (nearest, 0.0)
        } else {
            (q.floor(), q - q.floor())
        };
        counts.push(whole as usize);
        remainders.push(frac);
    }
    let assigned: usize = counts.iter().sum();
    if assigned >= total {
        return counts;
    }
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (remainders[a], remainders[b]);
        if (ra - rb).abs() < EPS {
            a.cmp(&b)
        } else {
            rb.total_cmp(&ra)
        }
    });
    for &i in order.iter().cycle().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Splits `total` units in proportion to `weights`.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    apportion_quotas(&quotas, total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_one_two() {
        assert_eq!(largest_remainder(80, &[0.7, 0.1, 0.2]), vec![56, 8, 16]);
        assert_eq!(largest_remainder(20, &[0.7, 0.1, 0.2]), vec![14, 2, 4]);
        assert_eq!(largest_remainder(7, &[0.7, 0.1, 0.2]), vec![5, 1, 1]);
    }

    #[test]
    fn degenerate_weights() {
        assert_eq!(largest_remainder(9, &[1.0, 0.0, 0.0]), vec![9, 0, 0]);
        assert_eq!(largest_remainder(3, &[0.0, 0.0]), vec![0, 0]);
    }

    #[test]
    fn tied_remainders_prefer_lower_index() {
        assert_eq!(largest_remainder(1, &[1.0, 1.0]), vec![1, 0]);
        assert_eq!(apportion_quotas(&[10.6, 2.8], 14), vec![11, 3]);
    }
}

//! Training-set resampling protocols and stratified case selection.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::{apportion_quotas, Cohort, Label};
use crate::error::{Error, Result};
use crate::rng;

const EPS: f64 = 1e-9;

/// Draws `k` of `positions` without replacement; result keeps cohort order.
fn draw(positions: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut pool = positions.to_vec();
    pool.shuffle(rng);
    pool.truncate(k);
    pool.sort_unstable();
    pool
}

fn assemble(cohort: &Cohort, mut picked: Vec<usize>) -> Result<Cohort> {
    picked.sort_unstable();
    Cohort::new(picked.into_iter().map(|i| cohort.notes()[i].clone()).collect())
}

/// Epilepsy/PNES counts for a rebalanced training set of size `2t`.
///
/// The Epilepsy count is `2t·α/(1+α)` rounded half up.
pub fn rebalance_counts(t: usize, alpha: f64) -> Result<(usize, usize)> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("imbalance ratio must be positive, got {alpha}")));
    }
    let size = 2 * t;
    let exact = size as f64 * alpha / (1.0 + alpha);
    let epilepsy = ((exact + 0.5 + EPS).floor() as usize).min(size);
    Ok((epilepsy, size - epilepsy))
}

/// Resamples a training cohort to `2t` notes at Epilepsy:PNES ratio `alpha`,
/// where `t` is its PNES count.
pub fn rebalance_training(train: &Cohort, alpha: f64, seed: u64) -> Result<Cohort> {
    let counts = train.label_counts();
    let t = counts.pnes;
    if t == 0 {
        return Err(Error::InvalidArgument("training cohort has no PNES notes".into()));
    }
    let (need_e, need_p) = rebalance_counts(t, alpha)?;
    if need_e > counts.epilepsy || need_p > counts.pnes {
        return Err(Error::InfeasibleRebalance {
            required_epilepsy: need_e,
            required_pnes: need_p,
            available_epilepsy: counts.epilepsy,
            available_pnes: counts.pnes,
        });
    }
    let by_label = train.positions_by_label();
    let mut rng = rng::sub_rng(seed, rng::REBALANCE, 0);
    let mut picked = draw(&by_label[&Label::Epilepsy], need_e, &mut rng);
    picked.extend(draw(&by_label[&Label::Pnes], need_p, &mut rng));
    assemble(train, picked)
}

/// Keeps `fraction` of the training set while preserving the class ratio.
///
/// The total kept is `ceil(fraction·n)`; per-label counts are the
/// largest-remainder rounding of `fraction·count(label)` to that total.
pub fn subsample_training(train: &Cohort, fraction: f64, seed: u64) -> Result<Cohort> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("fraction must be in (0, 1], got {fraction}")));
    }
    let counts = train.label_counts();
    let quotas = [
        fraction * counts.epilepsy as f64,
        fraction * counts.pnes as f64,
    ];
    let total = ((fraction * counts.total() as f64) - EPS).ceil().max(0.0) as usize;
    let per_label = apportion_quotas(&quotas, total);
    sample_per_label(train, per_label, rng::sub_rng(seed, rng::SUBSAMPLE, 0))
}

/// Draws `n` notes with label proportions matching the cohort.
pub fn stratified_sample(cohort: &Cohort, n: usize, seed: u64) -> Result<Cohort> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    if n > cohort.len() {
        return Err(Error::InvalidArgument(format!(
            "sample size {n} exceeds cohort size {}",
            cohort.len()
        )));
    }
    let counts = cohort.label_counts();
    let total = counts.total() as f64;
    let quotas = [
        n as f64 * counts.epilepsy as f64 / total,
        n as f64 * counts.pnes as f64 / total,
    ];
    let per_label = apportion_quotas(&quotas, n);
    sample_per_label(cohort, per_label, rng::sub_rng(seed, rng::STRATIFIED, 0))
}

fn sample_per_label(cohort: &Cohort, per_label: Vec<usize>, mut rng: ChaCha8Rng) -> Result<Cohort> {
    let by_label = cohort.positions_by_label();
    let mut picked = Vec::new();
    for (label, k) in Label::ALL.into_iter().zip(per_label) {
        let pos = by_label.get(&label).map(Vec::as_slice).unwrap_or(&[]);
        picked.extend(draw(pos, k.min(pos.len()), &mut rng));
    }
    assemble(cohort, picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Note;

    fn cohort(e: usize, p: usize) -> Cohort {
        let mut notes = Vec::new();
        for i in 0..e {
            notes.push(Note::new(format!("e{i}"), format!("pe{i}"), "x", Label::Epilepsy, "A").unwrap());
        }
        for i in 0..p {
            notes.push(Note::new(format!("p{i}"), format!("pp{i}"), "x", Label::Pnes, "A").unwrap());
        }
        Cohort::new(notes).unwrap()
    }

    fn counts(c: &Cohort) -> (usize, usize) {
        let lc = c.label_counts();
        (lc.epilepsy, lc.pnes)
    }

    #[test]
    fn rebalance_alpha_five() {
        let train = cohort(300, 60);
        let out = rebalance_training(&train, 5.0, 1).unwrap();
        assert_eq!(counts(&out), (100, 20));
        assert_eq!(counts(&rebalance_training(&train, 1.0, 1).unwrap()), (60, 60));
        assert_eq!(counts(&rebalance_training(&train, 20.0, 1).unwrap()), (114, 6));
    }

    #[test]
    fn rebalance_is_without_replacement_and_deterministic() {
        let train = cohort(300, 60);
        let a = rebalance_training(&train, 10.0, 4).unwrap();
        let b = rebalance_training(&train, 10.0, 4).unwrap();
        assert_eq!(a, b);
        let mut ids = a.ids();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 120);
    }

    #[test]
    fn rebalance_infeasible() {
        let train = cohort(50, 60);
        let err = rebalance_training(&train, 5.0, 0).unwrap_err();
        assert!(matches!(
            err,
            Error::InfeasibleRebalance { required_epilepsy: 100, available_epilepsy: 50, .. }
        ));
        assert!(rebalance_training(&cohort(5, 0), 1.0, 0).is_err());
        assert!(rebalance_counts(10, 0.0).is_err());
    }

    #[test]
    fn subsample_examples() {
        assert_eq!(counts(&subsample_training(&cohort(56, 14), 0.5, 0).unwrap()), (28, 7));
        assert_eq!(counts(&subsample_training(&cohort(53, 14), 0.2, 0).unwrap()), (11, 3));
        let full = cohort(9, 4);
        assert_eq!(subsample_training(&full, 1.0, 8).unwrap(), full);
        assert!(subsample_training(&full, 0.0, 0).is_err());
        assert!(subsample_training(&full, 1.5, 0).is_err());
    }

    #[test]
    fn stratified_sample_examples() {
        let c = cohort(160, 40);
        assert_eq!(counts(&stratified_sample(&c, 100, 3).unwrap()), (80, 20));
        assert_eq!(counts(&stratified_sample(&c, 1, 3).unwrap()), (1, 0));
        assert_eq!(stratified_sample(&c, 200, 3).unwrap(), c);
        assert!(stratified_sample(&c, 201, 3).is_err());
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng;

pub const DEFAULT_N_BOOT: usize = 1000;
/// Redraws allowed for a replicate on which the metric is undefined.
pub const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    /// Mean of the replicate values.
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub n_boot: usize,
}

/// Linear-interpolation percentile of sorted values, `q ∈ [0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile 95% interval of `metric` over `n_boot` resamples drawn with
/// replacement to the original size. Replicate `r` draws from its own
/// sub-seed, so the result does not depend on the execution policy. A
/// replicate on which the metric is undefined (e.g. a single-class resample
/// for AUC) is redrawn from the same stream, up to [`MAX_REDRAWS`] times.
pub fn bootstrap_ci<F>(
    metric: F,
    scores: &[f64],
    labels: &[Label],
    n_boot: usize,
    seed: u64,
    exec: Exec,
) -> Result<BootstrapCi>
where
    F: Fn(&[f64], &[Label]) -> Result<f64> + Sync + Send,
{
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.is_empty() {
        return Err(Error::Undefined("bootstrap of an empty set".into()));
    }
    if n_boot == 0 {
        return Err(Error::InvalidArgument("n_boot must be positive".into()));
    }
    let n = scores.len();
    let replicate = |r: usize| -> Result<f64> {
        let mut rng = rng::sub_rng(seed, rng::BOOTSTRAP, r as u64);
        let mut s = vec![0.0; n];
        let mut l = vec![Label::Epilepsy; n];
        for _ in 0..=MAX_REDRAWS {
            for k in 0..n {
                let i = rng.gen_range(0..n);
                s[k] = scores[i];
                l[k] = labels[i];
            }
            match metric(&s, &l) {
                Err(Error::Undefined(_)) => continue,
                other => return other,
            }
        }
        Err(Error::Undefined(format!(
            "bootstrap replicate {r} undefined after {MAX_REDRAWS} redraws"
        )))
    };
    let mut values = exec
        .map_range(n_boot, replicate)
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let mean = values.iter().sum::<f64>() / n_boot as f64;
    values.sort_by(f64::total_cmp);
    Ok(BootstrapCi {
        mean,
        lo: percentile(&values, 0.025),
        hi: percentile(&values, 0.975),
        n_boot,
    })
}

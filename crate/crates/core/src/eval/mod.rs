//! Metrics, bootstrap confidence intervals and the Mann–Whitney U test.

mod bootstrap;
mod metrics;
mod utest;

pub use bootstrap::{bootstrap_ci, percentile, BootstrapCi, DEFAULT_N_BOOT, MAX_REDRAWS};
pub use metrics::{accuracy, auc, ConfusionMatrix, DEFAULT_THRESHOLD};
pub use utest::{mann_whitney_u, significance_stars, UTestMethod, UTestResult};

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::Result;
use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub auc: f64,
    pub accuracy: f64,
    pub mean_auc: f64,
    pub mean_accuracy: f64,
    pub ci_auc: [f64; 2],
    pub ci_accuracy: [f64; 2],
    pub n_boot: usize,
    pub seed: u64,
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
}

/// Point estimates plus percentile bootstrap intervals for AUC and accuracy.
pub fn metric_report(
    scores: &[f64],
    labels: &[Label],
    n_boot: usize,
    seed: u64,
    exec: Exec,
) -> Result<MetricReport> {
    let point_auc = auc(scores, labels)?;
    let (point_acc, confusion) = accuracy(scores, labels, DEFAULT_THRESHOLD)?;
    let boot_auc = bootstrap_ci(auc, scores, labels, n_boot, seed, exec)?;
    let boot_acc = bootstrap_ci(
        |s, l| accuracy(s, l, DEFAULT_THRESHOLD).map(|(a, _)| a),
        scores,
        labels,
        n_boot,
        seed,
        exec,
    )?;
    Ok(MetricReport {
        n: scores.len(),
        auc: point_auc,
        accuracy: point_acc,
        mean_auc: boot_auc.mean,
        mean_accuracy: boot_acc.mean,
        ci_auc: [boot_auc.lo, boot_auc.hi],
        ci_accuracy: [boot_acc.lo, boot_acc.hi],
        n_boot,
        seed,
        threshold: DEFAULT_THRESHOLD,
        confusion,
    })
}

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Epilepsy is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn from_predictions(predicted: &[Label], actual: &[Label]) -> Self {
        let mut m = Self::default();
        for (p, a) in predicted.iter().zip(actual) {
            match (a, p) {
                (Label::Epilepsy, Label::Epilepsy) => m.tp += 1,
                (Label::Epilepsy, Label::Pnes) => m.fn_ += 1,
                (Label::Pnes, Label::Epilepsy) => m.fp += 1,
                (Label::Pnes, Label::Pnes) => m.tn += 1,
            }
        }
        m
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn correct(&self) -> usize {
        self.tp + self.tn
    }

    pub fn accuracy(&self) -> Option<f64> {
        (self.total() > 0).then(|| self.correct() as f64 / self.total() as f64)
    }

    /// Rows are actual diagnoses, columns predicted.
    pub fn to_csv(&self) -> String {
        format!(
            "actual,predicted_epilepsy,predicted_pnes\nEpilepsy,{},{}\nPNES,{},{}\n",
            self.tp, self.fn_, self.fp, self.tn
        )
    }
}

fn check_inputs(scores: &[f64], labels: &[Label]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    Ok(())
}

/// Area under the ROC curve in Mann–Whitney form, ties counted half.
/// Computed from midranks in O(n log n).
pub fn auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|l| l.is_positive()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined(format!(
            "AUC needs both classes ({n_pos} positive, {n_neg} negative)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // doubled midranks keep everything integral
    let mut pos_rank_sum2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let doubled_midrank = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            if labels[k].is_positive() {
                pos_rank_sum2 += doubled_midrank;
            }
        }
        i = j + 1;
    }
    let (p, q) = (n_pos as u64, n_neg as u64);
    let u2 = pos_rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * q) as f64)
}

/// Accuracy at `threshold` (predict Epilepsy iff p ≥ threshold).
pub fn accuracy(scores: &[f64], labels: &[Label], threshold: f64) -> Result<(f64, ConfusionMatrix)> {
    check_inputs(scores, labels)?;
    if scores.is_empty() {
        return Err(Error::Undefined("accuracy of an empty set".into()));
    }
    let predicted: Vec<Label> = scores
        .iter()
        .map(|&p| if p >= threshold { Label::Epilepsy } else { Label::Pnes })
        .collect();
    let m = ConfusionMatrix::from_predictions(&predicted, labels);
    Ok((m.accuracy().expect("non-empty"), m))
}

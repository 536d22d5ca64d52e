//! Reference differentiable note classifier.
//!
//! A note is embedded token by token, each window is the mean of its token
//! embeddings and the note vector is the mean of its windows. One tanh hidden
//! layer maps the note vector to an (Epilepsy, PNES) logit pair.

mod network;
mod params;
mod scorer;

pub use network::{backward, backward_inputs, forward, forward_inputs, Gradients, HeadTrace};
pub use params::{InitConfig, ModelDims, ModelParams};
pub use scorer::Scorer;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Scalar function of the logits that gradients are taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    /// `z_epilepsy − z_pnes`
    LogitDiff,
    /// Log-probability of the given class.
    LogProb(Label),
}

impl Target {
    pub fn value(self, logits: [f64; 2]) -> f64 {
        match self {
            Target::LogitDiff => logits[0] - logits[1],
            Target::LogProb(label) => log_softmax(logits)[label.index()],
        }
    }

    /// `∂ target / ∂ logits`.
    pub fn logit_gradient(self, logits: [f64; 2]) -> [f64; 2] {
        match self {
            Target::LogitDiff => [1.0, -1.0],
            Target::LogProb(label) => {
                let lp = log_softmax(logits);
                let p = [lp[0].exp(), lp[1].exp()];
                let mut g = [-p[0], -p[1]];
                g[label.index()] += 1.0;
                g
            }
        }
    }
}

pub fn log_sum_exp(logits: [f64; 2]) -> f64 {
    let m = logits[0].max(logits[1]);
    m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln()
}

pub fn log_softmax(logits: [f64; 2]) -> [f64; 2] {
    let lse = log_sum_exp(logits);
    [logits[0] - lse, logits[1] - lse]
}

/// Probability of Epilepsy from a logit pair, via a stable log-softmax.
pub fn predict_proba(logits: [f64; 2]) -> Result<f64> {
    if !(logits[0].is_finite() && logits[1].is_finite()) {
        return Err(Error::NonFinite(format!("logits {logits:?}")));
    }
    Ok(log_softmax(logits)[0].exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub logits: [f64; 2],
    pub log_probs: [f64; 2],
    pub p_epilepsy: f64,
    pub predicted_label: Label,
}

impl Prediction {
    pub fn from_logits(logits: [f64; 2]) -> Result<Self> {
        let p_epilepsy = predict_proba(logits)?;
        let predicted_label = if logits[0] >= logits[1] {
            Label::Epilepsy
        } else {
            Label::Pnes
        };
        Ok(Self {
            logits,
            log_probs: log_softmax(logits),
            p_epilepsy,
            predicted_label,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn proba_examples() {
        assert_eq!(predict_proba([0.0, 0.0]).unwrap(), 0.5);
        assert!((predict_proba([3f64.ln(), 0.0]).unwrap() - 0.75).abs() < 1e-15);
        assert!((predict_proba([2.0, -1.0]).unwrap() - 0.952574).abs() < 5e-7);
        assert!(predict_proba([f64::NAN, 0.0]).is_err());
        assert!(predict_proba([f64::INFINITY, 0.0]).is_err());
        // no overflow for large logits
        assert_eq!(predict_proba([1000.0, -1000.0]).unwrap(), 1.0);
    }

    #[test]
    fn tie_predicts_epilepsy() {
        assert_eq!(Prediction::from_logits([0.3, 0.3]).unwrap().predicted_label, Label::Epilepsy);
        assert_eq!(Prediction::from_logits([0.2, 0.3]).unwrap().predicted_label, Label::Pnes);
    }

    #[test]
    fn logit_gradient_matches_difference_quotient() {
        let z = [0.7, -0.4];
        for target in [Target::LogitDiff, Target::LogProb(Label::Epilepsy), Target::LogProb(Label::Pnes)] {
            let g = target.logit_gradient(z);
            for i in 0..2 {
                let h = 1e-6;
                let mut up = z;
                let mut dn = z;
                up[i] += h;
                dn[i] -= h;
                let fd = (target.value(up) - target.value(dn)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn softmax_properties(a in -50.0f64..50.0, b in -50.0f64..50.0, c in -100.0f64..100.0) {
            let p = Prediction::from_logits([a, b]).unwrap();
            let q = p.log_probs[1].exp();
            prop_assert!((p.p_epilepsy + q - 1.0).abs() < 1e-12);
            let shifted = Prediction::from_logits([a + c, b + c]).unwrap();
            prop_assert!((shifted.p_epilepsy - p.p_epilepsy).abs() < 1e-12);
            prop_assert_eq!(shifted.predicted_label, p.predicted_label);
        }
    }
}

use serde::{Deserialize, Serialize};

/// Update rule applied to the trainable tensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Optimizer {
    Sgd,
    /// Adam with bias correction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub const ADAM: Optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
}

/// Per-tensor optimizer state; tensors are identified by position.
#[derive(Debug, Clone, Default)]
pub(crate) struct OptimState {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    t: i32,
}

impl OptimState {
    /// Moves each tensor against its loss gradient.
    pub(crate) fn step(&mut self, optimizer: Optimizer, params: Vec<&mut [f64]>, grads: &[Vec<f64>], lr: f64) {
        debug_assert_eq!(params.len(), grads.len());
        match optimizer {
            Optimizer::Sgd => {
                for (p, g) in params.into_iter().zip(grads) {
                    for (x, d) in p.iter_mut().zip(g) {
                        *x -= lr * d;
                    }
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                if self.first.is_empty() {
                    self.first = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                    self.second = self.first.clone();
                }
                self.t += 1;
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
                    let (m, v) = (&mut self.first[k], &mut self.second[k]);
                    for i in 0..p.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}

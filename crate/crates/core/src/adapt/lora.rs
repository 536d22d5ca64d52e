use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoraConfig {
    pub rank: usize,
    pub alpha: f64,
    pub dropout: f64,
}

impl Default for LoraConfig {
    fn default() -> Self {
        Self {
            rank: 16,
            alpha: 32.0,
            dropout: 0.05,
        }
    }
}

impl LoraConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidArgument("LoRA rank must be positive".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidArgument("LoRA alpha must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument("LoRA dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Low-rank update `scaling · B · A` for an `m × n` weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraAdapter {
    /// `r × n`
    pub a: Matrix,
    /// `m × r`, zero at initialization
    pub b: Matrix,
    pub alpha: f64,
    pub dropout: f64,
}

impl LoraAdapter {
    /// `A` uniform in ±1/√n, `B = 0`.
    pub fn new(m: usize, n: usize, config: LoraConfig, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (n.max(1) as f64).sqrt();
        let a = Matrix::from_fn(config.rank, n, |_, _| rng.gen_range(-bound..=bound));
        Self {
            a,
            b: Matrix::zeros(m, config.rank),
            alpha: config.alpha,
            dropout: config.dropout,
        }
    }

    pub fn rank(&self) -> usize {
        self.a.rows()
    }

    pub fn scaling(&self) -> f64 {
        self.alpha / self.rank() as f64
    }

    /// Output and input dimensions of the adapted weight.
    pub fn shape(&self) -> (usize, usize) {
        (self.b.rows(), self.a.cols())
    }

    pub fn delta(&self) -> Matrix {
        let mut d = self.b.matmul(&self.a).expect("adapter factors are conformable");
        for v in d.as_mut_slice() {
            *v *= self.scaling();
        }
        d
    }

    /// `W + scaling · B · A`.
    pub fn merge(&self, w: &Matrix) -> Result<Matrix> {
        if w.shape() != self.shape() {
            return Err(Error::Shape(format!(
                "adapter is {:?}, weight is {:?}",
                self.shape(),
                w.shape()
            )));
        }
        let mut out = w.clone();
        out.add_scaled(1.0, &self.delta());
        Ok(out)
    }

    /// `base_output + scaling · B · (A · (mask ⊙ input))`. `mask` is `None`
    /// at evaluation time.
    pub fn apply(&self, base_output: &[f64], input: &[f64], mask: Option<&[f64]>) -> Result<Vec<f64>> {
        let (m, n) = self.shape();
        if base_output.len() != m || input.len() != n || mask.is_some_and(|k| k.len() != n) {
            return Err(Error::Shape(format!(
                "adapter {m}×{n} applied to input {} with base output {}",
                input.len(),
                base_output.len()
            )));
        }
        let p = match mask {
            Some(k) => {
                let dropped: Vec<f64> = input.iter().zip(k).map(|(x, k)| x * k).collect();
                self.a.matvec(&dropped)
            }
            None => self.a.matvec(input),
        };
        let s = self.scaling();
        Ok(base_output
            .iter()
            .zip(self.b.matvec(&p))
            .map(|(y, d)| y + s * d)
            .collect())
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite()
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 − rate)`.
pub fn dropout_mask(n: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    if rate <= 0.0 {
        return vec![1.0; n];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

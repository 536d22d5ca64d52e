use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{axpy, Matrix};
use crate::model::{Scorer, Target};
use crate::textproc::{TokenSeq, WindowPlan};

pub const DEFAULT_M_STEPS: usize = 512;
/// Quadrature steps evaluated per work unit. Chunk sums are reduced in chunk
/// order, so the result does not depend on the execution policy.
const STEP_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenAttributions {
    /// One value per token: its attribution summed over embedding dimensions.
    pub per_token: Vec<f64>,
    /// `F(x)` at the input and `F(x′)` at the zero baseline.
    pub f_input: f64,
    pub f_baseline: f64,
    /// `|Σ attributions − (F(x) − F(x′))|`
    pub completeness_residual: f64,
    pub m_steps: usize,
}

impl TokenAttributions {
    pub fn total(&self) -> f64 {
        self.per_token.iter().sum()
    }
}

/// Integrated gradients from the all-zero baseline with midpoint quadrature:
/// `a_j = x_j · (1/m) Σ_{s=1..m} ∂F/∂x_j (((s − ½)/m) · x)`.
pub fn integrated_gradients<S: Scorer + ?Sized>(
    scorer: &S,
    inputs: &Matrix,
    plan: &WindowPlan,
    target: Target,
    m_steps: usize,
    exec: Exec,
) -> Result<TokenAttributions> {
    if m_steps == 0 {
        return Err(Error::InvalidArgument("integrated gradients needs m_steps ≥ 1".into()));
    }
    let (rows, cols) = inputs.shape();
    let n_chunks = m_steps.div_ceil(STEP_CHUNK);
    let chunk_sums = exec.map_range(n_chunks, |c| -> Result<Vec<f64>> {
        let mut acc = vec![0.0; rows * cols];
        let mut point = inputs.clone();
        for s in c * STEP_CHUNK..((c + 1) * STEP_CHUNK).min(m_steps) {
            let alpha = (s as f64 + 0.5) / m_steps as f64;
            for (p, x) in point.as_mut_slice().iter_mut().zip(inputs.as_slice()) {
                *p = alpha * x;
            }
            let (_, grad) = scorer.gradient(&point, plan, target)?;
            if !grad.is_finite() {
                return Err(Error::NonFinite(format!("gradient at quadrature step {}", s + 1)));
            }
            axpy(&mut acc, 1.0, grad.as_slice());
        }
        Ok(acc)
    });
    let mut total = vec![0.0; rows * cols];
    for chunk in chunk_sums {
        axpy(&mut total, 1.0, &chunk?);
    }
    let inv_m = 1.0 / m_steps as f64;
    let per_token: Vec<f64> = (0..rows)
        .map(|r| {
            (0..cols)
                .map(|c| inputs.get(r, c) * (total[r * cols + c] * inv_m))
                .sum()
        })
        .collect();
    let f_input = scorer.value(inputs, plan, target)?;
    let f_baseline = scorer.value(&Matrix::zeros(rows, cols), plan, target)?;
    let sum: f64 = per_token.iter().sum();
    Ok(TokenAttributions {
        completeness_residual: (sum - (f_input - f_baseline)).abs(),
        per_token,
        f_input,
        f_baseline,
        m_steps,
    })
}

/// [`integrated_gradients`] on the scorer's own embeddings of `tokens`.
pub fn token_integrated_gradients<S: Scorer + ?Sized>(
    scorer: &S,
    tokens: &TokenSeq,
    plan: &WindowPlan,
    target: Target,
    m_steps: usize,
    exec: Exec,
) -> Result<TokenAttributions> {
    let inputs = scorer.embed(tokens)?;
    integrated_gradients(scorer, &inputs, plan, target, m_steps, exec)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::linalg::dot;
    use crate::model::{InitConfig, ModelDims, ModelParams};
    use crate::rng;
    use crate::textproc::make_windows;
    use rand::Rng;

    /// `z_epilepsy = Σ w ⊙ x`, `z_pnes = 0`.
    pub(crate) struct Linear {
        pub w: Matrix,
    }

    impl Scorer for Linear {
        fn embed(&self, tokens: &TokenSeq) -> Result<Matrix> {
            Ok(Matrix::from_fn(tokens.len(), self.w.cols(), |r, c| {
                (tokens.tokens[r].id as f64 + 1.0) * (c as f64 - 1.5)
            }))
        }

        fn logits(&self, inputs: &Matrix, _: &WindowPlan) -> Result<[f64; 2]> {
            Ok([dot(self.w.as_slice(), inputs.as_slice()), 0.0])
        }

        fn gradient(&self, inputs: &Matrix, plan: &WindowPlan, target: Target) -> Result<(f64, Matrix)> {
            let z = self.logits(inputs, plan)?;
            let g0 = target.logit_gradient(z)[0];
            let mut g = self.w.clone();
            for v in g.as_mut_slice() {
                *v *= g0;
            }
            Ok((target.value(z), g))
        }
    }

    #[test]
    fn linear_scorer_is_exact_for_any_m() {
        let mut r = rng::rng(4);
        let w = Matrix::from_fn(6, 4, |_, _| r.gen_range(-1.0..1.0));
        let x = Matrix::from_fn(6, 4, |_, _| r.gen_range(-2.0..2.0));
        let plan = make_windows(6, 512, 4096).unwrap();
        let scorer = Linear { w: w.clone() };
        for m in [1, 7, 512] {
            let a = integrated_gradients(&scorer, &x, &plan, Target::LogitDiff, m, Exec::Parallel).unwrap();
            for row in 0..6 {
                let expected: f64 = (0..4).map(|c| w.get(row, c) * x.get(row, c)).sum();
                assert!((a.per_token[row] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_output_layer_gives_zero_attributions() {
        let mut p = ModelParams::init(ModelDims::new(20, 5, 4), InitConfig::default(), 1);
        p.w2 = Matrix::zeros(2, 4);
        let seq = TokenSeq::from_ids(&[1, 5, 9, 3]);
        let plan = make_windows(4, 512, 4096).unwrap();
        let a = token_integrated_gradients(&p, &seq, &plan, Target::LogProb(Label::Epilepsy), 16, Exec::Sequential)
            .unwrap();
        assert!(a.per_token.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn policies_agree_bitwise_and_residual_shrinks() {
        let p = ModelParams::init(ModelDims::new(50, 8, 6), InitConfig { embedding_scale: 1.0, weight_scale: 1.0 }, 2);
        let ids: Vec<u32> = (1..40).collect();
        let seq = TokenSeq::from_ids(&ids);
        let plan = make_windows(seq.len(), 16, 4096).unwrap();
        let t = Target::LogProb(Label::Epilepsy);
        let a = token_integrated_gradients(&p, &seq, &plan, t, 200, Exec::Parallel).unwrap();
        let b = token_integrated_gradients(&p, &seq, &plan, t, 200, Exec::Sequential).unwrap();
        assert_eq!(a, b);
        let coarse = token_integrated_gradients(&p, &seq, &plan, t, 4, Exec::Parallel).unwrap();
        assert!(a.completeness_residual < coarse.completeness_residual);
    }

    #[test]
    fn zero_steps_rejected() {
        let scorer = Linear { w: Matrix::zeros(1, 1) };
        let plan = make_windows(1, 512, 4096).unwrap();
        assert!(integrated_gradients(&scorer, &Matrix::zeros(1, 1), &plan, Target::LogitDiff, 0, Exec::Sequential).is_err());
    }
}

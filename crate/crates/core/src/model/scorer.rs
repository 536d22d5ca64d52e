use super::{backward_inputs, forward_inputs, ModelParams, Target};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::textproc::{TokenSeq, WindowPlan};

/// What any classifier backend must provide for attribution: an embedding
/// lookup, a deterministic forward pass from embeddings to the logit pair,
/// and the gradient of a target with respect to those embeddings.
pub trait Scorer: Sync {
    fn embed(&self, tokens: &TokenSeq) -> Result<Matrix>;

    fn logits(&self, inputs: &Matrix, plan: &WindowPlan) -> Result<[f64; 2]>;

    /// Target value and `∂target/∂inputs` (same shape as `inputs`).
    fn gradient(&self, inputs: &Matrix, plan: &WindowPlan, target: Target) -> Result<(f64, Matrix)>;

    fn value(&self, inputs: &Matrix, plan: &WindowPlan, target: Target) -> Result<f64> {
        Ok(target.value(self.logits(inputs, plan)?))
    }
}

impl Scorer for ModelParams {
    fn embed(&self, tokens: &TokenSeq) -> Result<Matrix> {
        let vocab = self.embedding.rows();
        let d = self.embedding.cols();
        let mut out = Matrix::zeros(tokens.len(), d);
        for (t, tok) in tokens.tokens.iter().enumerate() {
            let id = tok.id as usize;
            if id >= vocab {
                return Err(Error::TokenOutOfRange { id, vocab });
            }
            out.row_mut(t).copy_from_slice(self.embedding.row(id));
        }
        Ok(out)
    }

    fn logits(&self, inputs: &Matrix, plan: &WindowPlan) -> Result<[f64; 2]> {
        Ok(forward_inputs(self, inputs, plan)?.logits)
    }

    fn gradient(&self, inputs: &Matrix, plan: &WindowPlan, target: Target) -> Result<(f64, Matrix)> {
        let (value, grads) = backward_inputs(self, inputs, plan, target)?;
        Ok((value, grads.inputs))
    }
}

use super::{ModelParams, Prediction, Target};
use crate::error::{Error, Result};
use crate::linalg::{axpy, Matrix};
use crate::textproc::{TokenSeq, WindowPlan};

/// Intermediate values of one head evaluation.
#[derive(Debug, Clone)]
pub struct HeadTrace {
    pub pooled: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: [f64; 2],
}

/// Gradients of a scalar target with respect to every parameter and to the
/// input token embeddings (`seq_len × embed`).
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub inputs: Matrix,
}

impl Gradients {
    /// Accumulates `scale ×` the input gradients into embedding rows.
    pub fn scatter_into_embedding(&self, tokens: &TokenSeq, embedding: &mut Matrix, scale: f64) {
        for (t, tok) in tokens.tokens.iter().enumerate() {
            axpy(embedding.row_mut(tok.id as usize), scale, self.inputs.row(t));
        }
    }

    /// Dense embedding gradient.
    pub fn embedding(&self, tokens: &TokenSeq, vocab: usize) -> Matrix {
        let mut g = Matrix::zeros(vocab, self.inputs.cols());
        self.scatter_into_embedding(tokens, &mut g, 1.0);
        g
    }
}

fn check_tokens(params: &ModelParams, tokens: &TokenSeq) -> Result<()> {
    let vocab = params.embedding.rows();
    match tokens.tokens.iter().find(|t| t.id as usize >= vocab) {
        Some(t) => Err(Error::TokenOutOfRange {
            id: t.id as usize,
            vocab,
        }),
        None => Ok(()),
    }
}

fn pool_rows<'a>(
    rows: impl Iterator<Item = &'a [f64]>,
    weights: &[f64],
    dim: usize,
) -> Vec<f64> {
    let mut pooled = vec![0.0; dim];
    for (row, &w) in rows.zip(weights) {
        if w != 0.0 {
            axpy(&mut pooled, w, row);
        }
    }
    pooled
}

pub(crate) fn pool_tokens(params: &ModelParams, tokens: &TokenSeq, plan: &WindowPlan) -> Result<(Vec<f64>, Vec<f64>)> {
    check_tokens(params, tokens)?;
    let weights = plan.pool_weights(tokens.len());
    let rows = tokens.tokens.iter().map(|t| params.embedding.row(t.id as usize));
    Ok((pool_rows(rows, &weights, params.embedding.cols()), weights))
}

fn pool_inputs(params: &ModelParams, inputs: &Matrix, plan: &WindowPlan) -> Result<(Vec<f64>, Vec<f64>)> {
    if inputs.cols() != params.embedding.cols() {
        return Err(Error::Shape(format!(
            "input embeddings have {} columns, model expects {}",
            inputs.cols(),
            params.embedding.cols()
        )));
    }
    let weights = plan.pool_weights(inputs.rows());
    let rows = (0..inputs.rows()).map(|r| inputs.row(r));
    Ok((pool_rows(rows, &weights, inputs.cols()), weights))
}

pub(crate) fn head(params: &ModelParams, pooled: Vec<f64>) -> HeadTrace {
    let mut hidden = params.w1.matvec(&pooled);
    for (h, b) in hidden.iter_mut().zip(&params.b1) {
        *h = (*h + b).tanh();
    }
    let z = params.w2.matvec(&hidden);
    HeadTrace {
        pooled,
        hidden,
        logits: [z[0] + params.b2[0], z[1] + params.b2[1]],
    }
}

/// Backpropagates `d_logits` through the head. Returns the pooled-vector
/// gradient and the parameter gradients (w1, b1, w2, b2).
pub(crate) fn head_backward(
    params: &ModelParams,
    trace: &HeadTrace,
    d_logits: [f64; 2],
) -> (Vec<f64>, Matrix, Vec<f64>, Matrix, Vec<f64>) {
    let mut w2 = Matrix::zeros(2, trace.hidden.len());
    w2.add_outer(1.0, &d_logits, &trace.hidden);
    let d_hidden = params.w2.t_matvec(&d_logits);
    let d_pre: Vec<f64> = d_hidden
        .iter()
        .zip(&trace.hidden)
        .map(|(g, a)| g * (1.0 - a * a))
        .collect();
    let mut w1 = Matrix::zeros(d_pre.len(), trace.pooled.len());
    w1.add_outer(1.0, &d_pre, &trace.pooled);
    let d_pooled = params.w1.t_matvec(&d_pre);
    (d_pooled, w1, d_pre, w2, d_logits.to_vec())
}

fn finish_backward(
    params: &ModelParams,
    trace: &HeadTrace,
    weights: &[f64],
    target: Target,
) -> Result<(f64, Gradients)> {
    if !(trace.logits[0].is_finite() && trace.logits[1].is_finite()) {
        return Err(Error::NonFinite(format!("logits {:?}", trace.logits)));
    }
    let value = target.value(trace.logits);
    let (d_pooled, w1, b1, w2, b2) = head_backward(params, trace, target.logit_gradient(trace.logits));
    let mut inputs = Matrix::zeros(weights.len(), d_pooled.len());
    for (t, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            axpy(inputs.row_mut(t), w, &d_pooled);
        }
    }
    Ok((value, Gradients { w1, b1, w2, b2, inputs }))
}

pub fn forward(params: &ModelParams, tokens: &TokenSeq, plan: &WindowPlan) -> Result<Prediction> {
    let (pooled, _) = pool_tokens(params, tokens, plan)?;
    Prediction::from_logits(head(params, pooled).logits)
}

/// Forward pass from explicit token embeddings (`seq_len × embed`).
pub fn forward_inputs(params: &ModelParams, inputs: &Matrix, plan: &WindowPlan) -> Result<Prediction> {
    let (pooled, _) = pool_inputs(params, inputs, plan)?;
    Prediction::from_logits(head(params, pooled).logits)
}

/// Target value and its exact gradients.
pub fn backward(
    params: &ModelParams,
    tokens: &TokenSeq,
    plan: &WindowPlan,
    target: Target,
) -> Result<(f64, Gradients)> {
    let (pooled, weights) = pool_tokens(params, tokens, plan)?;
    finish_backward(params, &head(params, pooled), &weights, target)
}

pub fn backward_inputs(
    params: &ModelParams,
    inputs: &Matrix,
    plan: &WindowPlan,
    target: Target,
) -> Result<(f64, Gradients)> {
    let (pooled, weights) = pool_inputs(params, inputs, plan)?;
    finish_backward(params, &head(params, pooled), &weights, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::model::{InitConfig, ModelDims};
    use crate::textproc::make_windows;

    fn plan(n: usize, window: usize) -> WindowPlan {
        make_windows(n, window, 4096).unwrap()
    }

    #[test]
    fn zero_params_give_even_odds() {
        let p = ModelParams::zeros(ModelDims::new(5, 3, 4));
        let seq = TokenSeq::from_ids(&[1, 2, 3]);
        let pred = forward(&p, &seq, &plan(3, 512)).unwrap();
        assert_eq!(pred.logits, [0.0, 0.0]);
        assert_eq!(pred.p_epilepsy, 0.5);
    }

    #[test]
    fn hand_computed_two_dim_instance() {
        // d = h = 2, W1 = I, W2 rows = ±(1, 1), single token e = (0.5, -0.25)
        let mut p = ModelParams::zeros(ModelDims::new(2, 2, 2));
        p.embedding.row_mut(1).copy_from_slice(&[0.5, -0.25]);
        p.w1 = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        p.w2 = Matrix::from_vec(2, 2, vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        let seq = TokenSeq::from_ids(&[1]);
        let pred = forward(&p, &seq, &plan(1, 512)).unwrap();
        let s = 0.5f64.tanh() + (-0.25f64).tanh();
        assert!((pred.logits[0] - s).abs() < 1e-15);
        assert!((pred.logits[1] + s).abs() < 1e-15);
    }

    #[test]
    fn permutation_within_window_is_invisible() {
        let p = ModelParams::init(ModelDims::new(10, 4, 6), InitConfig::default(), 1);
        let a = forward(&p, &TokenSeq::from_ids(&[1, 2, 3, 4, 5]), &plan(5, 512)).unwrap();
        let b = forward(&p, &TokenSeq::from_ids(&[5, 3, 1, 4, 2]), &plan(5, 512)).unwrap();
        assert!((a.logits[0] - b.logits[0]).abs() < 1e-15);
        assert!((a.logits[1] - b.logits[1]).abs() < 1e-15);
    }

    #[test]
    fn empty_note_pools_to_zero() {
        let mut p = ModelParams::zeros(ModelDims::new(3, 2, 2));
        p.b2 = vec![0.4, -0.1];
        let pred = forward(&p, &TokenSeq::default(), &plan(0, 512)).unwrap();
        assert_eq!(pred.logits, [0.4, -0.1]);
    }

    #[test]
    fn out_of_range_token_rejected() {
        let p = ModelParams::zeros(ModelDims::new(3, 2, 2));
        let err = forward(&p, &TokenSeq::from_ids(&[3]), &plan(1, 512)).unwrap_err();
        assert!(matches!(err, Error::TokenOutOfRange { id: 3, vocab: 3 }));
    }

    #[test]
    fn dead_output_layer_has_zero_input_gradient() {
        let mut p = ModelParams::init(ModelDims::new(10, 4, 6), InitConfig::default(), 2);
        p.w2 = Matrix::zeros(2, 6);
        let (_, g) = backward(&p, &TokenSeq::from_ids(&[1, 2, 3]), &plan(3, 512), Target::LogitDiff).unwrap();
        assert!(g.inputs.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_token_gets_identical_gradients() {
        let p = ModelParams::init(ModelDims::new(10, 4, 6), InitConfig::default(), 3);
        let seq = TokenSeq::from_ids(&[4, 2, 4, 7]);
        let (_, g) = backward(&p, &seq, &plan(4, 512), Target::LogProb(Label::Epilepsy)).unwrap();
        assert_eq!(g.inputs.row(0), g.inputs.row(2));
    }

    #[test]
    fn token_and_input_paths_agree() {
        let p = ModelParams::init(ModelDims::new(10, 4, 6), InitConfig::default(), 4);
        let seq = TokenSeq::from_ids(&[1, 9, 3, 3, 0]);
        let inputs = Matrix::from_fn(5, 4, |r, c| p.embedding.get(seq.tokens[r].id as usize, c));
        let pl = plan(5, 2);
        let a = forward(&p, &seq, &pl).unwrap();
        let b = forward_inputs(&p, &inputs, &pl).unwrap();
        assert_eq!(a, b);
        let (va, ga) = backward(&p, &seq, &pl, Target::LogitDiff).unwrap();
        let (vb, gb) = backward_inputs(&p, &inputs, &pl, Target::LogitDiff).unwrap();
        assert_eq!(va, vb);
        assert_eq!(ga.inputs, gb.inputs);
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
}

impl ModelDims {
    pub fn new(vocab: usize, embed: usize, hidden: usize) -> Self {
        Self { vocab, embed, hidden }
    }
}

/// Half-widths of the uniform initialization ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub embedding_scale: f64,
    pub weight_scale: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            embedding_scale: 0.05,
            weight_scale: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// `vocab × embed`; row 0 is the unknown token.
    pub embedding: Matrix,
    /// `hidden × embed`
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// `2 × hidden`
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Self {
        Self {
            embedding: Matrix::zeros(dims.vocab, dims.embed),
            w1: Matrix::zeros(dims.hidden, dims.embed),
            b1: vec![0.0; dims.hidden],
            w2: Matrix::zeros(2, dims.hidden),
            b2: vec![0.0; 2],
        }
    }

    /// Uniform initialization from `seed`; biases and the unknown row are zero.
    pub fn init(dims: ModelDims, init: InitConfig, seed: u64) -> Self {
        let mut rng = rng::sub_rng(seed, rng::INIT, 0);
        let uniform = |scale: f64| {
            let scale = scale.abs();
            move |rng: &mut rand_chacha::ChaCha8Rng| {
                if scale == 0.0 {
                    0.0
                } else {
                    rng.gen_range(-scale..=scale)
                }
            }
        };
        let emb = uniform(init.embedding_scale);
        let mut embedding = Matrix::from_fn(dims.vocab, dims.embed, |_, _| emb(&mut rng));
        if dims.vocab > 0 {
            embedding.row_mut(0).fill(0.0);
        }
        let w = uniform(init.weight_scale);
        let w1 = Matrix::from_fn(dims.hidden, dims.embed, |_, _| w(&mut rng));
        let w2 = Matrix::from_fn(2, dims.hidden, |_, _| w(&mut rng));
        Self {
            embedding,
            w1,
            b1: vec![0.0; dims.hidden],
            w2,
            b2: vec![0.0; 2],
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            vocab: self.embedding.rows(),
            embed: self.embedding.cols(),
            hidden: self.w1.rows(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        let ok = self.w1.cols() == d.embed
            && self.b1.len() == d.hidden
            && self.w2.shape() == (2, d.hidden)
            && self.b2.len() == 2;
        if !ok {
            return Err(Error::Shape(format!(
                "inconsistent parameter shapes: embedding {:?}, w1 {:?}, b1 {}, w2 {:?}, b2 {}",
                self.embedding.shape(),
                self.w1.shape(),
                self.b1.len(),
                self.w2.shape(),
                self.b2.len()
            )));
        }
        let finite = self.embedding.is_finite()
            && self.w1.is_finite()
            && self.w2.is_finite()
            && self.b1.iter().chain(&self.b2).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(())
    }
}

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::lora::{dropout_mask, LoraAdapter, LoraConfig};
use super::optim::{OptimState, Optimizer};
use super::nf4::{dequantize, quantize_nf4, QuantizedMatrix, DEFAULT_BLOCK_SIZE};
use super::schedule::lr_at;
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::eval::{accuracy, auc, DEFAULT_THRESHOLD};
use crate::exec::Exec;
use crate::linalg::{axpy, Matrix};
use crate::model::{backward, forward, InitConfig, ModelDims, ModelParams, Prediction, Target};
use crate::rng;
use crate::textproc::{EncodedNote, WindowConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Full,
    Lora,
    Qlora,
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(TrainMode::Full),
            "lora" => Ok(TrainMode::Lora),
            "qlora" => Ok(TrainMode::Qlora),
            _ => Err(Error::InvalidArgument(format!("unknown training mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointRule {
    Final,
    BestValAuc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub peak_lr: f64,
    pub warmup_ratio: f64,
    pub seed: u64,
    pub mode: TrainMode,
    pub checkpoint_rule: CheckpointRule,
    pub optimizer: Optimizer,
    pub lora: LoraConfig,
    pub block_size: usize,
    pub init: InitConfig,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub windows: WindowConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3,
            batch_size: 1,
            peak_lr: 5e-4,
            warmup_ratio: 0.03,
            seed: 0,
            mode: TrainMode::Qlora,
            checkpoint_rule: CheckpointRule::BestValAuc,
            optimizer: Optimizer::ADAM,
            lora: LoraConfig::default(),
            block_size: DEFAULT_BLOCK_SIZE,
            init: InitConfig::default(),
            embed_dim: 64,
            hidden_dim: 128,
            windows: WindowConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return Err(Error::InvalidArgument("warmup_ratio must lie in [0, 1)".into()));
        }
        if !(self.peak_lr.is_finite() && self.peak_lr > 0.0) {
            return Err(Error::InvalidArgument("peak_lr must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch_size must be positive".into()));
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidArgument("model dimensions must be positive".into()));
        }
        if self.block_size == 0 {
            return Err(Error::InvalidArgument("block_size must be positive".into()));
        }
        self.lora.validate()
    }
}

/// A frozen or trainable base weight, stored dense or NF4-quantized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseWeight {
    Dense(Matrix),
    Quantized(QuantizedMatrix),
}

impl BaseWeight {
    pub fn dense(&self) -> Matrix {
        match self {
            BaseWeight::Dense(m) => m.clone(),
            BaseWeight::Quantized(q) => dequantize(q),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            BaseWeight::Dense(m) => m.shape(),
            BaseWeight::Quantized(q) => q.shape(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adapters {
    pub w1: LoraAdapter,
    pub w2: LoraAdapter,
}

/// Model state as trained: base weights in their stored form plus adapters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub mode: TrainMode,
    pub embedding: Matrix,
    pub w1: BaseWeight,
    pub b1: Vec<f64>,
    pub w2: BaseWeight,
    pub b2: Vec<f64>,
    pub adapters: Option<Adapters>,
}

impl TrainedModel {
    /// Wraps base parameters for `config.mode`: quantizes W1/W2 for qlora and
    /// attaches zero-initialized adapters for lora and qlora.
    pub fn prepare(base: ModelParams, config: &TrainConfig) -> Result<Self> {
        base.validate()?;
        let dims = base.dims();
        let (w1, w2) = match config.mode {
            TrainMode::Qlora => (
                BaseWeight::Quantized(quantize_nf4(&base.w1, config.block_size)?),
                BaseWeight::Quantized(quantize_nf4(&base.w2, config.block_size)?),
            ),
            _ => (BaseWeight::Dense(base.w1), BaseWeight::Dense(base.w2)),
        };
        let adapters = match config.mode {
            TrainMode::Full => None,
            _ => {
                config.lora.validate()?;
                let mut r = rng::sub_rng(config.seed, rng::INIT, 1);
                Some(Adapters {
                    w1: LoraAdapter::new(dims.hidden, dims.embed, config.lora, &mut r),
                    w2: LoraAdapter::new(2, dims.hidden, config.lora, &mut r),
                })
            }
        };
        Ok(Self {
            mode: config.mode,
            embedding: base.embedding,
            w1,
            b1: base.b1,
            w2,
            b2: base.b2,
            adapters,
        })
    }

    /// Fresh seeded model for a vocabulary of `vocab` entries.
    pub fn initial(vocab: usize, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let dims = ModelDims::new(vocab, config.embed_dim, config.hidden_dim);
        Self::prepare(ModelParams::init(dims, config.init, config.seed), config)
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims::new(self.embedding.rows(), self.embedding.cols(), self.b1.len())
    }

    /// Evaluation-time parameters: dequantized base with adapters merged.
    pub fn params(&self) -> Result<ModelParams> {
        let mut w1 = self.w1.dense();
        let mut w2 = self.w2.dense();
        if let Some(ad) = &self.adapters {
            w1 = ad.w1.merge(&w1)?;
            w2 = ad.w2.merge(&w2)?;
        }
        let p = ModelParams {
            embedding: self.embedding.clone(),
            w1,
            b1: self.b1.clone(),
            w2,
            b2: self.b2.clone(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        if self.w1.shape() != (d.hidden, d.embed) || self.w2.shape() != (2, d.hidden) || self.b2.len() != 2 {
            return Err(Error::Shape("trained model weights are inconsistent".into()));
        }
        if let BaseWeight::Quantized(q) = &self.w1 {
            q.validate()?;
        }
        if let BaseWeight::Quantized(q) = &self.w2 {
            q.validate()?;
        }
        if let Some(ad) = &self.adapters {
            if ad.w1.shape() != (d.hidden, d.embed) || ad.w2.shape() != (2, d.hidden) {
                return Err(Error::Shape("adapter shapes do not match the base model".into()));
            }
        }
        self.params().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` when the validation set holds a single class.
    pub val_auc: Option<f64>,
    pub val_accuracy: f64,
    /// Learning rate of the epoch's final update.
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Learning rate of every update, in order.
    pub lr_trace: Vec<f64>,
    /// 1-based epoch whose state was returned.
    pub selected_epoch: usize,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,val_auc,val_acc,lr\n");
        for r in &self.epochs {
            let auc = r.val_auc.map(|a| a.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{}\n", r.epoch, r.train_loss, auc, r.val_accuracy, r.lr));
        }
        out
    }
}

pub fn cross_entropy(log_probs: [f64; 2], label: Label) -> f64 {
    -log_probs[label.index()]
}

pub fn evaluate_notes(params: &ModelParams, notes: &[EncodedNote], exec: Exec) -> Result<Vec<Prediction>> {
    exec.try_map(notes, |n| forward(params, &n.tokens, &n.plan))
}

/// One plain-SGD step on a single note, updating every parameter. Returns the
/// loss before the step.
pub fn sgd_step(params: &mut ModelParams, note: &EncodedNote, lr: f64) -> Result<f64> {
    let (log_p, g) = backward(params, &note.tokens, &note.plan, Target::LogProb(note.label))?;
    // ascend log p(label) = descend cross-entropy
    params.w1.add_scaled(lr, &g.w1);
    axpy(&mut params.b1, lr, &g.b1);
    params.w2.add_scaled(lr, &g.w2);
    axpy(&mut params.b2, lr, &g.b2);
    g.scatter_into_embedding(&note.tokens, &mut params.embedding, lr);
    Ok(-log_p)
}

/// Gradients of `log p(label)` with respect to the adapter factors.
struct AdapterGrads {
    a1: Matrix,
    b1: Matrix,
    a2: Matrix,
    b2: Matrix,
}

impl AdapterGrads {
    fn zeros(ad: &Adapters) -> Self {
        Self {
            a1: Matrix::zeros(ad.w1.a.rows(), ad.w1.a.cols()),
            b1: Matrix::zeros(ad.w1.b.rows(), ad.w1.b.cols()),
            a2: Matrix::zeros(ad.w2.a.rows(), ad.w2.a.cols()),
            b2: Matrix::zeros(ad.w2.b.rows(), ad.w2.b.cols()),
        }
    }

    fn add(&mut self, other: &AdapterGrads) {
        self.a1.add_scaled(1.0, &other.a1);
        self.b1.add_scaled(1.0, &other.b1);
        self.a2.add_scaled(1.0, &other.a2);
        self.b2.add_scaled(1.0, &other.b2);
    }
}

fn pooled(embedding: &Matrix, note: &EncodedNote) -> Result<Vec<f64>> {
    let weights = note.plan.pool_weights(note.tokens.len());
    let mut x = vec![0.0; embedding.cols()];
    for (tok, w) in note.tokens.tokens.iter().zip(weights) {
        let id = tok.id as usize;
        if id >= embedding.rows() {
            return Err(Error::TokenOutOfRange {
                id,
                vocab: embedding.rows(),
            });
        }
        if w != 0.0 {
            axpy(&mut x, w, embedding.row(id));
        }
    }
    Ok(x)
}

/// Forward/backward through the adapted head with dropout on adapter inputs.
/// Returns `log p(label)` and the adapter gradients; base weights, biases and
/// embeddings receive none.
fn adapter_backward(
    w1: &Matrix,
    w2: &Matrix,
    model: &TrainedModel,
    ad: &Adapters,
    note: &EncodedNote,
    masks: (&[f64], &[f64]),
) -> Result<(f64, AdapterGrads)> {
    let x = pooled(&model.embedding, note)?;
    let x_drop: Vec<f64> = x.iter().zip(masks.0).map(|(v, k)| v * k).collect();
    let p1 = ad.w1.a.matvec(&x_drop);
    let s1 = ad.w1.scaling();
    let mut u = w1.matvec(&x);
    for ((ui, b), d) in u.iter_mut().zip(&model.b1).zip(ad.w1.b.matvec(&p1)) {
        *ui = (*ui + b + s1 * d).tanh();
    }
    let a = u;
    let a_drop: Vec<f64> = a.iter().zip(masks.1).map(|(v, k)| v * k).collect();
    let p2 = ad.w2.a.matvec(&a_drop);
    let s2 = ad.w2.scaling();
    let base = w2.matvec(&a);
    let delta = ad.w2.b.matvec(&p2);
    let z = [
        base[0] + model.b2[0] + s2 * delta[0],
        base[1] + model.b2[1] + s2 * delta[1],
    ];
    if !(z[0].is_finite() && z[1].is_finite()) {
        return Err(Error::NonFinite(format!("logits {z:?}")));
    }
    let target = Target::LogProb(note.label);
    let value = target.value(z);
    let dz = target.logit_gradient(z);

    let mut g = AdapterGrads::zeros(ad);
    g.b2.add_outer(s2, &dz, &p2);
    let q2: Vec<f64> = ad.w2.b.t_matvec(&dz).into_iter().map(|v| s2 * v).collect();
    g.a2.add_outer(1.0, &q2, &a_drop);
    let mut da = w2.t_matvec(&dz);
    let back2 = ad.w2.a.t_matvec(&q2);
    for ((d, b), k) in da.iter_mut().zip(back2).zip(masks.1) {
        *d += k * b;
    }
    let du: Vec<f64> = da.iter().zip(&a).map(|(d, a)| d * (1.0 - a * a)).collect();
    g.b1.add_outer(s1, &du, &p1);
    let q1: Vec<f64> = ad.w1.b.t_matvec(&du).into_iter().map(|v| s1 * v).collect();
    g.a1.add_outer(1.0, &q1, &x_drop);
    Ok((value, g))
}

fn dropout_masks(config: &TrainConfig, dims: ModelDims, step: usize) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng::sub_rng(config.seed, rng::DROPOUT, step as u64);
    let m1 = dropout_mask(dims.embed, config.lora.dropout, &mut r);
    let m2 = dropout_mask(dims.hidden, config.lora.dropout, &mut r);
    (m1, m2)
}

/// One update over `batch`, with gradients averaged at the current state.
/// Returns the summed loss.
fn update(
    model: &mut TrainedModel,
    state: &mut OptimState,
    batch: &[&EncodedNote],
    lr: f64,
    step: usize,
    config: &TrainConfig,
) -> Result<f64> {
    let abort = |note: &EncodedNote, message: String| Error::Training {
        step,
        note_id: note.id.clone(),
        message,
    };
    let inv = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    match model.adapters.take() {
        None => {
            let mut params = model.params()?;
            let vocab = params.embedding.rows();
            // loss gradients: embedding, w1, b1, w2, b2
            let mut grads: Vec<Vec<f64>> = [
                params.embedding.as_slice().len(),
                params.w1.as_slice().len(),
                params.b1.len(),
                params.w2.as_slice().len(),
                params.b2.len(),
            ]
            .iter()
            .map(|&n| vec![0.0; n])
            .collect();
            for note in batch {
                let (log_p, g) = backward(&params, &note.tokens, &note.plan, Target::LogProb(note.label))
                    .map_err(|e| abort(note, e.to_string()))?;
                if !log_p.is_finite() {
                    return Err(abort(note, format!("loss {}", -log_p)));
                }
                loss -= log_p;
                // log p is ascended, so the loss gradient is its negation
                axpy(&mut grads[0], -inv, g.embedding(&note.tokens, vocab).as_slice());
                axpy(&mut grads[1], -inv, g.w1.as_slice());
                axpy(&mut grads[2], -inv, &g.b1);
                axpy(&mut grads[3], -inv, g.w2.as_slice());
                axpy(&mut grads[4], -inv, &g.b2);
            }
            state.step(
                config.optimizer,
                vec![
                    params.embedding.as_mut_slice(),
                    params.w1.as_mut_slice(),
                    &mut params.b1,
                    params.w2.as_mut_slice(),
                    &mut params.b2,
                ],
                &grads,
                lr,
            );
            if params.validate().is_err() {
                return Err(abort(batch[0], "parameters became non-finite".into()));
            }
            model.embedding = params.embedding;
            model.w1 = BaseWeight::Dense(params.w1);
            model.b1 = params.b1;
            model.w2 = BaseWeight::Dense(params.w2);
            model.b2 = params.b2;
        }
        Some(mut ad) => {
            // frozen base, dequantized for this step
            let w1 = model.w1.dense();
            let w2 = model.w2.dense();
            let mut total = AdapterGrads::zeros(&ad);
            for (k, note) in batch.iter().enumerate() {
                let (m1, m2) = dropout_masks(config, model.dims(), step * config.batch_size + k);
                let result = adapter_backward(&w1, &w2, model, &ad, note, (&m1, &m2));
                let (log_p, g) = match result {
                    Ok(v) => v,
                    Err(e) => {
                        model.adapters = Some(ad);
                        return Err(abort(note, e.to_string()));
                    }
                };
                loss -= log_p;
                total.add(&g);
            }
            let grads: Vec<Vec<f64>> = [&total.a1, &total.b1, &total.a2, &total.b2]
                .iter()
                .map(|m| m.as_slice().iter().map(|v| -v * inv).collect())
                .collect();
            state.step(
                config.optimizer,
                vec![
                    ad.w1.a.as_mut_slice(),
                    ad.w1.b.as_mut_slice(),
                    ad.w2.a.as_mut_slice(),
                    ad.w2.b.as_mut_slice(),
                ],
                &grads,
                lr,
            );
            let finite = ad.w1.is_finite() && ad.w2.is_finite();
            model.adapters = Some(ad);
            if !finite {
                return Err(abort(batch[0], "adapter weights became non-finite".into()));
            }
        }
    }
    if !loss.is_finite() {
        return Err(abort(batch[0], format!("loss {loss}")));
    }
    Ok(loss)
}

fn validation_metrics(model: &TrainedModel, val: &[EncodedNote], exec: Exec) -> Result<(Option<f64>, f64)> {
    let params = model.params()?;
    let preds = evaluate_notes(&params, val, exec)?;
    let scores: Vec<f64> = preds.iter().map(|p| p.p_epilepsy).collect();
    let labels: Vec<Label> = val.iter().map(|n| n.label).collect();
    let val_auc = match auc(&scores, &labels) {
        Ok(a) => Some(a),
        Err(Error::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    let (acc, _) = accuracy(&scores, &labels, DEFAULT_THRESHOLD)?;
    Ok((val_auc, acc))
}

/// Supervised cross-entropy training with plain SGD on the cosine schedule.
///
/// Update `k` (1-based) uses `lr_at(k, total)`. The note order is reshuffled
/// every epoch from the seed. Validation runs after each epoch; the returned
/// state follows `config.checkpoint_rule`.
pub fn train(
    mut model: TrainedModel,
    train: &[EncodedNote],
    val: &[EncodedNote],
    config: &TrainConfig,
    exec: Exec,
) -> Result<(TrainedModel, TrainHistory)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if val.is_empty() {
        return Err(Error::InvalidArgument("validation set is empty".into()));
    }
    if model.mode != config.mode {
        return Err(Error::InvalidArgument(format!(
            "model prepared for {:?} but config requests {:?}",
            model.mode, config.mode
        )));
    }
    model.validate()?;
    let steps_per_epoch = train.len().div_ceil(config.batch_size);
    let total = steps_per_epoch * config.epochs;
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, TrainedModel)> = None;
    let mut step = 0;
    let mut state = OptimState::default();
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng::sub_rng(config.seed, rng::SHUFFLE, epoch as u64));
        let mut loss_sum = 0.0;
        let mut lr = 0.0;
        for chunk in order.chunks(config.batch_size) {
            step += 1;
            lr = lr_at(step, total, config)?;
            let batch: Vec<&EncodedNote> = chunk.iter().map(|&i| &train[i]).collect();
            loss_sum += update(&mut model, &mut state, &batch, lr, step, config)?;
            history.lr_trace.push(lr);
        }
        let (val_auc, val_accuracy) = validation_metrics(&model, val, exec)?;
        history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / train.len() as f64,
            val_auc,
            val_accuracy,
            lr,
        });
        if let Some(a) = val_auc {
            if best.as_ref().is_none_or(|(b, _, _)| a > *b) {
                best = Some((a, epoch + 1, model.clone()));
            }
        }
    }
    history.selected_epoch = config.epochs;
    if config.checkpoint_rule == CheckpointRule::BestValAuc {
        if let Some((_, epoch, state)) = best {
            history.selected_epoch = epoch;
            model = state;
        }
    }
    Ok((model, history))
}

/// Mean cross-entropy of `params` on `notes`.
pub fn mean_loss(params: &ModelParams, notes: &[EncodedNote], exec: Exec) -> Result<f64> {
    let preds = evaluate_notes(params, notes, exec)?;
    Ok(preds
        .iter()
        .zip(notes)
        .map(|(p, n)| cross_entropy(p.log_probs, n.label))
        .sum::<f64>()
        / notes.len().max(1) as f64)
}

/// `log p(label)` for the adapted head evaluated without dropout; used to
/// cross-check the adapter gradients.
#[cfg(test)]
fn adapted_log_prob(model: &TrainedModel, note: &EncodedNote) -> f64 {
    use crate::linalg::dot;
    use crate::model::log_softmax;
    let p = model.params().unwrap();
    let x = pooled(&p.embedding, note).unwrap();
    let a: Vec<f64> = p.w1.matvec(&x).iter().zip(&p.b1).map(|(u, b)| (u + b).tanh()).collect();
    let z = [dot(p.w2.row(0), &a) + p.b2[0], dot(p.w2.row(1), &a) + p.b2[1]];
    log_softmax(z)[note.label.index()]
}

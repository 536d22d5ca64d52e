//! Training engine, low-rank adapters and NF4 block quantization.

mod checkpoint;
mod lora;
mod nf4;
mod optim;
mod schedule;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use lora::{dropout_mask, LoraAdapter, LoraConfig};
pub use nf4::{DEFAULT_BLOCK_SIZE, 
    dequantize, nearest_code, nf4_codebook_from_quantiles, quantize_nf4, QuantizedMatrix, NF4_CODEBOOK,
    NF4_ZERO_CODE,
};
pub use optim::Optimizer;
pub use schedule::{lr_at, warmup_steps};
pub use train::{
    cross_entropy, evaluate_notes, mean_loss, sgd_step, train, Adapters, BaseWeight, CheckpointRule, EpochRecord, TrainConfig,
    TrainHistory, TrainMode, TrainedModel,
};

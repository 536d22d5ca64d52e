use super::TrainConfig;
use crate::error::{Error, Result};

/// Number of linear warm-up steps: `ceil(warmup_ratio · total)`, capped so
/// at least one decay step remains.
pub fn warmup_steps(total_steps: usize, warmup_ratio: f64) -> usize {
    if total_steps == 0 {
        return 0;
    }
    let w = (warmup_ratio * total_steps as f64 - 1e-9).ceil().max(0.0) as usize;
    w.min(total_steps - 1)
}

/// Learning rate at `step` (0-based update index) of `total_steps`.
///
/// Linear ramp from 0 to the peak over the warm-up, then half-cosine decay
/// reaching 0 at `step == total_steps`.
pub fn lr_at(step: usize, total_steps: usize, config: &TrainConfig) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::InvalidArgument("schedule needs at least one step".into()));
    }
    if step > total_steps {
        return Err(Error::InvalidArgument(format!(
            "step {step} beyond schedule of {total_steps} steps"
        )));
    }
    let peak = config.peak_lr;
    let warmup = warmup_steps(total_steps, config.warmup_ratio);
    if step < warmup {
        return Ok(peak * step as f64 / warmup as f64);
    }
    let progress = (step - warmup) as f64 / (total_steps - warmup) as f64;
    Ok(0.5 * peak * (1.0 + (std::f64::consts::PI * progress).cos()))
}

//! 4-bit NormalFloat block quantization.
//!
//! The codebook holds 16 levels placed at standard-normal quantiles and
//! rescaled to [-1, 1], with an exact zero. Each block of `block_size`
//! consecutive (row-major) elements stores its absmax as the scale and one
//! 4-bit code per element.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const DEFAULT_BLOCK_SIZE: usize = 64;

pub const NF4_CODEBOOK: [f64; 16] = [
    -1.0,
    -0.69619289060372,
    -0.5250730386952291,
    -0.3949174906993099,
    -0.2844413576181077,
    -0.18477343519288886,
    -0.09104999214427931,
    0.0,
    0.07958032909416937,
    0.16093017270493618,
    0.2461122939299359,
    0.33791519352165506,
    0.44070980241319013,
    0.562616970075237,
    0.7229567278928821,
    1.0,
];

/// Index of the exact zero level.
pub const NF4_ZERO_CODE: u8 = 7;

/// Rebuilds the codebook from normal quantiles: 8 positive levels from
/// evenly spaced probabilities in `[0.5, offset]`, 7 negative levels from
/// the mirrored construction, plus zero, normalized by the largest level.
pub fn nf4_codebook_from_quantiles() -> [f64; 16] {
    const OFFSET: f64 = 0.9677083;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let spaced = |n: usize| -> Vec<f64> {
        // n points from OFFSET down to 0.5, dropping the final 0.5
        (0..n - 1)
            .map(|i| OFFSET + (0.5 - OFFSET) * i as f64 / (n - 1) as f64)
            .collect()
    };
    let mut levels: Vec<f64> = spaced(9).into_iter().map(|p| normal.inverse_cdf(p)).collect();
    levels.extend(spaced(8).into_iter().map(|p| -normal.inverse_cdf(p)));
    levels.push(0.0);
    levels.sort_by(f64::total_cmp);
    let max = levels.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut out = [0.0; 16];
    for (o, v) in out.iter_mut().zip(levels) {
        *o = v / max;
    }
    out
}

/// Nearest codebook index; exact midpoints go to the lower code.
pub fn nearest_code(x: f64) -> u8 {
    // codebook is sorted, so compare against midpoints
    let mut code = 0u8;
    for i in 1..16 {
        let mid = 0.5 * (NF4_CODEBOOK[i - 1] + NF4_CODEBOOK[i]);
        if x > mid {
            code = i as u8;
        } else {
            break;
        }
    }
    code
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedMatrix {
    rows: usize,
    cols: usize,
    block_size: usize,
    /// Two codes per byte, low nibble first.
    packed: Vec<u8>,
    scales: Vec<f64>,
}

impl QuantizedMatrix {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn code(&self, i: usize) -> u8 {
        let byte = self.packed[i / 2];
        if i % 2 == 0 {
            byte & 0x0F
        } else {
            byte >> 4
        }
    }

    pub fn codes(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.code(i)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let blocks = n.div_ceil(self.block_size.max(1));
        if self.block_size == 0 || self.packed.len() != n.div_ceil(2) || self.scales.len() != blocks {
            return Err(Error::Shape("quantized matrix storage does not match its shape".into()));
        }
        Ok(())
    }
}

pub fn quantize_nf4(w: &Matrix, block_size: usize) -> Result<QuantizedMatrix> {
    if block_size == 0 {
        return Err(Error::InvalidArgument("block size must be positive".into()));
    }
    if !w.is_finite() {
        return Err(Error::NonFinite("cannot quantize non-finite weights".into()));
    }
    let data = w.as_slice();
    let mut scales = Vec::with_capacity(data.len().div_ceil(block_size));
    let mut packed = vec![0u8; data.len().div_ceil(2)];
    for (b, block) in data.chunks(block_size).enumerate() {
        let scale = block.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        scales.push(scale);
        for (j, &v) in block.iter().enumerate() {
            let code = if scale == 0.0 {
                NF4_ZERO_CODE
            } else {
                nearest_code(v / scale)
            };
            let i = b * block_size + j;
            packed[i / 2] |= if i % 2 == 0 { code } else { code << 4 };
        }
    }
    Ok(QuantizedMatrix {
        rows: w.rows(),
        cols: w.cols(),
        block_size,
        packed,
        scales,
    })
}

pub fn dequantize(q: &QuantizedMatrix) -> Matrix {
    let data = (0..q.len())
        .map(|i| q.scales[i / q.block_size] * NF4_CODEBOOK[q.code(i) as usize])
        .collect();
    Matrix::from_vec(q.rows, q.cols, data).expect("shape preserved")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn codebook_shape() {
        assert!(NF4_CODEBOOK.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(NF4_CODEBOOK.iter().filter(|&&v| v == 0.0).count(), 1);
        assert_eq!(NF4_CODEBOOK[NF4_ZERO_CODE as usize], 0.0);
        assert_eq!((NF4_CODEBOOK[0], NF4_CODEBOOK[15]), (-1.0, 1.0));
    }

    #[test]
    fn codebook_regenerates_from_quantiles() {
        let regen = nf4_codebook_from_quantiles();
        for (a, b) in regen.iter().zip(NF4_CODEBOOK) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn zeros_round_trip() {
        let w = Matrix::zeros(3, 50);
        let q = quantize_nf4(&w, 64).unwrap();
        assert!(q.codes().iter().all(|&c| c == NF4_ZERO_CODE));
        assert_eq!(dequantize(&q), w);
    }

    #[test]
    fn codebook_multiples_are_fixed_points() {
        for s in [0.3, 1.0, 17.5] {
            let data: Vec<f64> = (0..64).map(|i| s * NF4_CODEBOOK[i % 16]).collect();
            let w = Matrix::from_vec(4, 16, data).unwrap();
            let q = quantize_nf4(&w, 64).unwrap();
            assert_eq!(dequantize(&q), w);
        }
    }

    #[test]
    fn nearest_code_matches_brute_force() {
        let mut rng = crate::rng::rng(1);
        for _ in 0..10_000 {
            let x: f64 = rng.gen_range(-1.0..=1.0);
            let brute = (0..16)
                .min_by(|&a, &b| {
                    (x - NF4_CODEBOOK[a]).abs().total_cmp(&(x - NF4_CODEBOOK[b]).abs())
                })
                .unwrap() as u8;
            assert_eq!(nearest_code(x), brute, "x = {x}");
        }
    }

    #[test]
    fn normal_samples_error_bounded_and_idempotent() {
        let mut rng = crate::rng::rng(7);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let data: Vec<f64> = (0..4096)
            .map(|_| normal.inverse_cdf(rng.gen_range(1e-6..1.0 - 1e-6)))
            .collect();
        let w = Matrix::from_vec(64, 64, data).unwrap();
        let q = quantize_nf4(&w, 64).unwrap();
        let back = dequantize(&q);
        let max_gap = NF4_CODEBOOK.windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max);
        for i in 0..4096 {
            let bound = q.scales()[i / 64] * max_gap / 2.0;
            assert!((w.as_slice()[i] - back.as_slice()[i]).abs() <= bound + 1e-15);
        }
        let again = quantize_nf4(&back, 64).unwrap();
        assert_eq!(again, q);
        assert_eq!(dequantize(&again), back);
    }

    #[test]
    fn ragged_final_block() {
        let w = Matrix::from_fn(3, 7, |r, c| (r * 7 + c) as f64 - 10.0);
        let q = quantize_nf4(&w, 8).unwrap();
        assert_eq!(q.scales().len(), 3);
        q.validate().unwrap();
        assert_eq!(q.scales()[0], 10.0);
    }
}

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_WINDOW_SIZE: usize = 512;
pub const DEFAULT_MAX_TOKENS: usize = 4096;

/// Contiguous token windows over the first `max_tokens` tokens of a note.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub windows: Vec<Range<usize>>,
    pub window_size: usize,
    pub max_tokens: usize,
}

impl WindowPlan {
    pub fn covered(&self) -> usize {
        self.windows.iter().map(|w| w.end).max().unwrap_or(0)
    }

    /// Weight of each token in the pooled note vector: a window is the mean
    /// of its tokens and the note is the mean of its windows. Tokens past the
    /// plan get zero weight.
    pub fn pool_weights(&self, seq_len: usize) -> Vec<f64> {
        let mut w = vec![0.0; seq_len];
        if self.windows.is_empty() {
            return w;
        }
        let n_windows = self.windows.len() as f64;
        for win in &self.windows {
            let share = 1.0 / (n_windows * win.len() as f64);
            for slot in &mut w[win.start..win.end.min(seq_len)] {
                *slot += share;
            }
        }
        w
    }
}

/// Non-overlapping windows of `window_size` tokens; the last may be short and
/// tokens past `max_tokens` are dropped.
pub fn make_windows(seq_len: usize, window_size: usize, max_tokens: usize) -> Result<WindowPlan> {
    make_windows_with_overlap(seq_len, window_size, max_tokens, 0)
}

/// Like [`make_windows`] but consecutive windows share `overlap` tokens.
pub fn make_windows_with_overlap(
    seq_len: usize,
    window_size: usize,
    max_tokens: usize,
    overlap: usize,
) -> Result<WindowPlan> {
    if window_size == 0 {
        return Err(Error::InvalidArgument("window size must be positive".into()));
    }
    if overlap >= window_size {
        return Err(Error::InvalidArgument("window overlap must be smaller than the window".into()));
    }
    let end = seq_len.min(max_tokens);
    let stride = window_size - overlap;
    let mut windows = Vec::new();
    let mut start = 0;
    while start < end {
        let stop = (start + window_size).min(end);
        windows.push(start..stop);
        if stop == end {
            break;
        }
        start += stride;
    }
    Ok(WindowPlan {
        windows,
        window_size,
        max_tokens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let p = make_windows(1000, 512, 4096).unwrap();
        assert_eq!(p.windows, vec![0..512, 512..1000]);
        let p = make_windows(5000, 512, 4096).unwrap();
        assert_eq!(p.windows.len(), 8);
        assert!(p.windows.iter().all(|w| w.len() == 512));
        assert_eq!(p.covered(), 4096);
        assert_eq!(make_windows(512, 512, 4096).unwrap().windows, vec![0..512]);
        assert!(make_windows(0, 512, 4096).unwrap().windows.is_empty());
        assert!(make_windows(10, 0, 4096).is_err());
    }

    #[test]
    fn pool_weights_average_windows() {
        let p = make_windows(3, 2, 4096).unwrap();
        let w = p.pool_weights(3);
        assert_eq!(w, vec![0.25, 0.25, 0.5]);
        let truncated = make_windows(5, 2, 4).unwrap().pool_weights(5);
        assert_eq!(truncated[4], 0.0);
    }

    #[test]
    fn overlap_windows() {
        let p = make_windows_with_overlap(10, 4, 4096, 2).unwrap();
        assert_eq!(p.windows, vec![0..4, 2..6, 4..8, 6..10]);
        assert!(make_windows_with_overlap(10, 4, 4096, 4).is_err());
    }

    proptest! {
        #[test]
        fn coverage_is_contiguous(seq_len in 0usize..10_000) {
            let p = make_windows(seq_len, 512, 4096).unwrap();
            let mut next = 0;
            for w in &p.windows {
                prop_assert_eq!(w.start, next);
                prop_assert!(w.len() <= 512 && !w.is_empty());
                next = w.end;
            }
            prop_assert_eq!(next, seq_len.min(4096));
            let total: f64 = p.pool_weights(seq_len).iter().sum();
            if seq_len > 0 {
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
        }
    }
}

//! Summaries of repeated per-frame camera parameter predictions.

use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AggregateError {
    #[error("no values")]
    Empty,
    #[error("bin width must be positive and finite, got {0}")]
    InvalidBinWidth(f64),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

/// Mode of `values` on a histogram with bins `[k w, (k + 1) w)`; returns the
/// center of the fullest bin, the lowest one on ties.
pub fn parameter_mode(values: &[f64], bin_width: f64) -> Result<f64, AggregateError> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(AggregateError::InvalidBinWidth(bin_width));
    }
    if values.is_empty() {
        return Err(AggregateError::Empty);
    }
    let mut bins: Vec<i64> = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(AggregateError::NonFinite(i));
        }
        bins.push(libm::floor(v / bin_width) as i64);
    }
    bins.sort_unstable();
    let (mut best_bin, mut best_count) = (bins[0], 0usize);
    let mut start = 0;
    while start < bins.len() {
        let end = start
            + bins[start..]
                .iter()
                .take_while(|&&b| b == bins[start])
                .count();
        if end - start > best_count {
            best_bin = bins[start];
            best_count = end - start;
        }
        start = end;
    }
    Ok((best_bin as f64 + 0.5) * bin_width)
}

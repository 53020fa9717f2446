//! Least-squares projection onto the monotone cone.
//!
//! [`pava`] is the O(n) pool-adjacent-violators solver; scanning left to
//! right, it pools each new point with the preceding block while the block
//! levels decrease. Block levels are kept as `(sum, count)` pairs and
//! divided on demand so long merge chains do not drift. Equal adjacent
//! values are not violators; pooling triggers only on a strict decrease.
//!
//! [`pava_lower_bounded`] adds a floor constraint. Projecting onto
//! `{floor <= x1 <= ... <= xn}` is the unconstrained projection clamped
//! componentwise at the floor, so it costs one extra pass.

use crate::error::{Error, Result};

/// A maximal run of equal values in a fitted sequence: indices
/// `[start, end)` all sit at `level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub start: usize,
    pub end: usize,
    pub level: f64,
}

/// Result of an isotonic projection.
///
/// `values` is non-decreasing, preserves the input total, and within each
/// block equals the mean of the corresponding inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicFit {
    pub values: Vec<f64>,
    pub blocks: Vec<Block>,
}

fn check_input(y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn blocks_from_values(values: &[f64]) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] != values[start] {
            blocks.push(Block {
                start,
                end: i,
                level: values[start],
            });
            start = i;
        }
    }
    blocks
}

/// Euclidean projection of `y` onto `{x1 <= ... <= xn}` in O(n).
pub fn pava(y: &[f64]) -> Result<IsotonicFit> {
    check_input(y)?;
    let n = y.len();
    // (sum, count) per pooled block, levels compared as sum/count
    let mut sums: Vec<f64> = Vec::with_capacity(n);
    let mut counts: Vec<usize> = Vec::with_capacity(n);
    for &v in y {
        sums.push(v);
        counts.push(1);
        while sums.len() > 1 {
            let k = sums.len();
            let prev = sums[k - 2] / counts[k - 2] as f64;
            let cur = sums[k - 1] / counts[k - 1] as f64;
            if prev > cur {
                let s = sums.pop().unwrap();
                let c = counts.pop().unwrap();
                sums[k - 2] += s;
                counts[k - 2] += c;
            } else {
                break;
            }
        }
    }
    let mut values = Vec::with_capacity(n);
    for (s, c) in sums.iter().zip(&counts) {
        let level = s / *c as f64;
        values.extend(std::iter::repeat_n(level, *c));
    }
    let blocks = blocks_from_values(&values);
    Ok(IsotonicFit { values, blocks })
}

/// Euclidean projection of `y` onto `{floor <= x1 <= ... <= xn}`:
/// the unconstrained fit clamped at `floor` componentwise.
pub fn pava_lower_bounded(y: &[f64], floor: f64) -> Result<IsotonicFit> {
    if !floor.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut fit = pava(y)?;
    for v in &mut fit.values {
        if *v < floor {
            *v = floor;
        }
    }
    fit.blocks = blocks_from_values(&fit.values);
    Ok(fit)
}

/// Closed-form isotonic fit `max_{j<=i} min_{k>=i} mean(y[j..=k])`.
///
/// O(n^3); kept as an independent reference for [`pava`] in tests and the
/// verification suite.
pub fn maxmin_oracle(y: &[f64]) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = y.len();
    let mut prefix = vec![0.0; n + 1];
    for (i, &v) in y.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let mean = |j: usize, k: usize| (prefix[k + 1] - prefix[j]) / (k - j + 1) as f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut best = f64::NEG_INFINITY;
        for j in 0..=i {
            let mut inner = f64::INFINITY;
            for k in i..n {
                inner = inner.min(mean(j, k));
            }
            best = best.max(inner);
        }
        out.push(best);
    }
    Ok(out)
}

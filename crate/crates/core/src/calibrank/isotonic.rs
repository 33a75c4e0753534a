use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Monotone step function fitted by pool-adjacent-violators.
///
/// `scores` are the distinct training scores in increasing order and
/// `values[i]` the fitted value at `scores[i]`. Between breakpoints the value
/// of the nearest breakpoint at or below is used; below the first breakpoint
/// the first value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicModel {
    scores: Vec<f64>,
    values: Vec<f64>,
}

/// A run of consecutive (tie-pooled) points sharing one fitted value.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Block {
    sum: f64,
    weight: f64,
    /// Number of distinct scores merged into the block.
    len: usize,
}

impl Block {
    fn mean(&self) -> f64 {
        self.sum / self.weight
    }
}

impl IsotonicModel {
    /// A model from explicit breakpoints; `values` must be non-decreasing
    /// and in `[0, 1]`, `scores` strictly increasing.
    pub fn from_points(scores: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if scores.is_empty() || scores.len() != values.len() {
            return Err(Error::invalid("isotonic model needs matching, non-empty breakpoints"));
        }
        if scores.windows(2).any(|w| w[0] >= w[1]) || values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("isotonic breakpoints must increase"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("isotonic values must lie in [0, 1]"));
        }
        Ok(Self { scores, values })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn predict(&self, x: f64) -> f64 {
        let i = self.scores.partition_point(|&s| s <= x);
        self.values[i.saturating_sub(1)]
    }
}

/// Least-squares non-decreasing fit of `targets` against `scores`.
///
/// Equal scores are pooled into one weighted point first, so they always
/// share a fitted value. Constant targets give a constant model.
pub fn fit_isotonic(scores: &[f64], targets: &[f64]) -> Result<IsotonicModel> {
    if scores.len() != targets.len() || scores.len() < 2 {
        return Err(Error::invalid(format!(
            "isotonic fit needs at least 2 paired points, got {} scores and {} targets",
            scores.len(),
            targets.len()
        )));
    }
    if scores.iter().chain(targets).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("isotonic input".into()));
    }
    if targets.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::invalid("isotonic targets must lie in [0, 1]"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut distinct: Vec<f64> = Vec::new();
    let mut blocks: Vec<Block> = Vec::new();
    for &i in &order {
        if distinct.last() == Some(&scores[i]) {
            let b = blocks.last_mut().expect("tie group");
            b.sum += targets[i];
            b.weight += 1.0;
        } else {
            distinct.push(scores[i]);
            blocks.push(Block { sum: targets[i], weight: 1.0, len: 1 });
        }
    }

    let mut stack: Vec<Block> = Vec::with_capacity(blocks.len());
    for b in blocks {
        let mut cur = b;
        while let Some(top) = stack.last() {
            if top.mean() <= cur.mean() {
                break;
            }
            let top = stack.pop().expect("non-empty");
            cur = Block { sum: top.sum + cur.sum, weight: top.weight + cur.weight, len: top.len + cur.len };
        }
        stack.push(cur);
    }

    let mut values = Vec::with_capacity(distinct.len());
    for b in &stack {
        let m = b.mean().clamp(0.0, 1.0);
        values.extend(std::iter::repeat_n(m, b.len));
    }
    Ok(IsotonicModel { scores: distinct, values })
}

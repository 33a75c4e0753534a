use rayon::prelude::*;

use super::graph::SourceGraph;
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Walks over graph node indices, with the node names they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSet {
    pub nodes: Vec<String>,
    pub walks: Vec<Vec<usize>>,
}

impl WalkSet {
    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub num_walks: usize,
    pub walk_len: usize,
    /// Return bias: weight `1/p` for stepping straight back.
    pub p: f64,
    /// In-out bias: weight `1/q` for moving away from the previous node.
    pub q: f64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self { num_walks: 10, walk_len: 20, p: 1.0, q: 1.0 }
    }
}

/// Transition distribution out of `cur`, having arrived from `prev`.
///
/// Edge weights are scaled by `1/p` when returning to `prev`, by 1 when the
/// candidate is linked to `prev` in either direction, and by `1/q` otherwise.
/// Empty for a sink.
pub fn transition_probs(g: &SourceGraph, prev: Option<usize>, cur: usize, p: f64, q: f64) -> Vec<(usize, f64)> {
    let weighted: Vec<(usize, f64)> = g
        .out_edges(cur)
        .iter()
        .map(|&(x, w)| {
            let bias = match prev {
                None => 1.0,
                Some(t) if x == t => 1.0 / p,
                Some(t) if g.has_edge(t, x) || g.has_edge(x, t) => 1.0,
                Some(_) => 1.0 / q,
            };
            (x, w * bias)
        })
        .collect();
    let total: f64 = weighted.iter().map(|(_, w)| w).sum();
    weighted.into_iter().map(|(x, w)| (x, w / total)).collect()
}

fn walk_from(g: &SourceGraph, start: usize, cfg: &WalkConfig, rng: &mut Rng) -> Vec<usize> {
    let mut walk = Vec::with_capacity(cfg.walk_len);
    walk.push(start);
    while walk.len() < cfg.walk_len {
        let cur = *walk.last().expect("non-empty");
        let prev = walk.len().checked_sub(2).map(|i| walk[i]);
        let probs = transition_probs(g, prev, cur, cfg.p, cfg.q);
        if probs.is_empty() {
            break;
        }
        let weights: Vec<f64> = probs.iter().map(|(_, w)| *w).collect();
        walk.push(probs[rng.weighted(&weights)].0);
    }
    walk
}

/// `num_walks` rounds, each starting one walk at every node in node order.
/// Every walk has its own random stream, so the result does not depend on
/// thread scheduling.
pub fn random_walks(g: &SourceGraph, cfg: &WalkConfig, rng: &mut Rng) -> Result<WalkSet> {
    if g.is_empty() {
        return Err(Error::invalid("cannot walk an empty graph"));
    }
    if cfg.num_walks == 0 || cfg.walk_len == 0 {
        return Err(Error::invalid("num_walks and walk_len must be >= 1"));
    }
    if !(cfg.p > 0.0 && cfg.q > 0.0) {
        return Err(Error::invalid("p and q must be positive"));
    }
    let seed = rng.next_u64();
    let n = g.len();
    let walks = (0..cfg.num_walks * n)
        .into_par_iter()
        .map(|k| {
            let mut r = Rng::stream(seed, k as u64);
            walk_from(g, k % n, cfg, &mut r)
        })
        .collect();
    Ok(WalkSet { nodes: g.nodes().to_vec(), walks })
}

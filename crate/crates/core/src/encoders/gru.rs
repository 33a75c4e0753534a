//! Bidirectional GRU over position-major stacked inputs.
//!
//! Cell (gates ordered reset, update, candidate):
//! `r = σ(x_r + h_r)`, `z = σ(x_z + h_z)`, `n = tanh(x_n + r ⊙ h_n)`,
//! `h' = n + z ⊙ (h - n)`, where `x_* = W_x x + b_x` and `h_* = W_h h + b_h`.

use crate::error::Result;
use crate::numerics::{init, Graph, NodeId, ParamStore, Rng, Tensor};

const DIRECTIONS: [&str; 2] = ["fwd", "bwd"];

pub(crate) fn init_bigru(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut Rng) {
    let bound = 1.0 / (hidden as f64).sqrt();
    for dir in DIRECTIONS {
        store.insert(format!("{prefix}.{dir}.w_x"), init::uniform(input, 3 * hidden, bound, rng));
        store.insert(format!("{prefix}.{dir}.w_h"), init::uniform(hidden, 3 * hidden, bound, rng));
        store.insert(format!("{prefix}.{dir}.b_x"), init::uniform(1, 3 * hidden, bound, rng));
        store.insert(format!("{prefix}.{dir}.b_h"), init::uniform(1, 3 * hidden, bound, rng));
    }
}

/// `x` stacks `masks.len()` steps of `rows` inputs each. Returns, per step,
/// the `rows x 2*hidden` concatenation of forward and backward states.
///
/// A row whose mask is 0 at a step keeps its previous state, so sequences
/// shorter than the batch are read correctly in both directions as long as
/// their padding is at the end.
pub(crate) fn bigru(
    g: &mut Graph,
    prefix: &str,
    x: NodeId,
    rows: usize,
    hidden: usize,
    masks: &[Option<Tensor>],
) -> Result<Vec<NodeId>> {
    let steps = masks.len();
    let mut outputs: [Vec<NodeId>; 2] = [Vec::new(), Vec::new()];
    for (d, dir) in DIRECTIONS.iter().enumerate() {
        let w_x = g.param_by_name(&format!("{prefix}.{dir}.w_x"))?;
        let w_h = g.param_by_name(&format!("{prefix}.{dir}.w_h"))?;
        let b_x = g.param_by_name(&format!("{prefix}.{dir}.b_x"))?;
        let b_h = g.param_by_name(&format!("{prefix}.{dir}.b_h"))?;
        let xw = g.matmul(x, w_x)?;
        let xw = g.add(xw, b_x)?;
        let mut h = g.constant(Tensor::zeros(&[rows, hidden]));
        let mut states = vec![h; steps];
        let order: Vec<usize> = if d == 0 { (0..steps).collect() } else { (0..steps).rev().collect() };
        for t in order {
            let xr = g.slice(xw, t * rows, rows, 0, hidden)?;
            let xz = g.slice(xw, t * rows, rows, hidden, hidden)?;
            let xn = g.slice(xw, t * rows, rows, 2 * hidden, hidden)?;
            let hw = g.matmul(h, w_h)?;
            let hw = g.add(hw, b_h)?;
            let hr = g.slice(hw, 0, rows, 0, hidden)?;
            let hz = g.slice(hw, 0, rows, hidden, hidden)?;
            let hn = g.slice(hw, 0, rows, 2 * hidden, hidden)?;
            let r = g.add(xr, hr)?;
            let r = g.sigmoid(r);
            let z = g.add(xz, hz)?;
            let z = g.sigmoid(z);
            let rh = g.mul(r, hn)?;
            let n = g.add(xn, rh)?;
            let n = g.tanh(n);
            let gap = g.sub(h, n)?;
            let zg = g.mul(z, gap)?;
            let next = g.add(n, zg)?;
            h = match &masks[t] {
                None => next,
                Some(m) => {
                    let m = g.constant(m.clone());
                    let delta = g.sub(next, h)?;
                    let kept = g.mul_col(delta, m)?;
                    g.add(h, kept)?
                }
            };
            states[t] = h;
        }
        outputs[d] = states;
    }
    let [fwd, bwd] = outputs;
    fwd.into_iter().zip(bwd).map(|(f, b)| g.concat_cols(&[f, b])).collect()
}

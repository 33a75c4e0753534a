//! Inference network over the concatenated views and the class discriminator.

use super::config::{Architecture, TrainingConfig, ViewMask};
use super::gaussian::{GaussianDiag, LOGVAR_BIAS_INIT, LOGVAR_MAX, LOGVAR_MIN};
use crate::error::{Error, Result};
use crate::numerics::{init, Graph, NodeId, ParamStore, Rng, Tensor};

pub const NUM_CLASSES: usize = 3;

/// View vectors of one article; `None` for a view that is not present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViewVectors {
    pub title: Option<Vec<f64>>,
    pub network: Option<Vec<f64>>,
    pub content: Option<Vec<f64>>,
}

fn linear(store: &mut ParamStore, prefix: &str, input: usize, output: usize, rng: &mut Rng) {
    store.insert(format!("{prefix}.weight"), init::xavier(input, output, rng));
    store.insert(format!("{prefix}.bias"), Tensor::zeros(&[1, output]));
}

fn apply_linear(g: &mut Graph, prefix: &str, x: NodeId) -> Result<NodeId> {
    let w = g.param_by_name(&format!("{prefix}.weight"))?;
    let b = g.param_by_name(&format!("{prefix}.bias"))?;
    let y = g.matmul(x, w)?;
    g.add(y, b)
}

/// `fuse.*`: `3d -> d`, ReLU, `d -> d`, then the mean and log-variance heads.
pub fn init_inference_net(store: &mut ParamStore, dim: usize, rng: &mut Rng) {
    linear(store, "fuse.l1", 3 * dim, dim, rng);
    linear(store, "fuse.l2", dim, dim, rng);
    linear(store, "fuse.mu", dim, dim, rng);
    linear(store, "fuse.logvar", dim, dim, rng);
    store.insert("fuse.logvar.bias", Tensor::filled(&[1, dim], LOGVAR_BIAS_INIT));
}

/// `disc.*`: `input -> d`, ReLU, `d -> 3`.
pub fn init_discriminator(store: &mut ParamStore, input: usize, dim: usize, rng: &mut Rng) {
    linear(store, "disc.l1", input, dim, rng);
    linear(store, "disc.out", dim, NUM_CLASSES, rng);
}

/// Width of the discriminator input for a configuration.
pub fn discriminator_input(cfg: &TrainingConfig) -> usize {
    match cfg.architecture {
        Architecture::Variational => cfg.dim,
        Architecture::Direct => cfg.views.count() * cfg.dim,
    }
}

/// Concatenates `[title, network, content]` (each `rows x d`), replacing
/// masked or missing views with zeros. Returns `rows x 3d`.
pub fn concat_views(g: &mut Graph, views: [Option<NodeId>; 3], rows: usize, dim: usize) -> Result<NodeId> {
    let mut parts = Vec::with_capacity(3);
    for v in views {
        let node = match v {
            Some(n) => {
                if g.value(n).dims2() != (rows, dim) {
                    return Err(Error::shape(format!("view vector {:?}, expected {rows}x{dim}", g.value(n).shape())));
                }
                n
            }
            None => g.constant(Tensor::zeros(&[rows, dim])),
        };
        parts.push(node);
    }
    g.concat_cols(&parts)
}

/// Posterior mean and clamped log-variance, each `rows x d`, from the
/// `rows x 3d` view concatenation.
pub fn posterior_nodes(g: &mut Graph, concat: NodeId) -> Result<(NodeId, NodeId)> {
    let h = apply_linear(g, "fuse.l1", concat)?;
    let h = g.relu(h);
    let h = apply_linear(g, "fuse.l2", h)?;
    let mu = apply_linear(g, "fuse.mu", h)?;
    let lv = apply_linear(g, "fuse.logvar", h)?;
    let lv = g.clamp(lv, LOGVAR_MIN, LOGVAR_MAX);
    Ok((mu, lv))
}

/// Pre-softmax class scores, `rows x 3`.
pub fn discriminator_logits(g: &mut Graph, h: NodeId) -> Result<NodeId> {
    let x = apply_linear(g, "disc.l1", h)?;
    let x = g.relu(x);
    apply_linear(g, "disc.out", x)
}

/// The approximate posterior for one article. Views outside `mask` are
/// replaced by zeros whether or not they are given.
pub fn infer_posterior(views: &ViewVectors, store: &ParamStore, mask: ViewMask) -> Result<GaussianDiag> {
    let d = store.get("fuse.l2.weight").ok_or_else(|| Error::invalid("store has no inference network"))?.rows();
    let mut g = Graph::new(store);
    let mut nodes = [None; 3];
    for (slot, (v, on)) in nodes.iter_mut().zip([
        (&views.title, mask.title),
        (&views.network, mask.network),
        (&views.content, mask.content),
    ]) {
        if let (Some(v), true) = (v, on) {
            if v.len() != d {
                return Err(Error::shape(format!("view vector of length {}, expected {d}", v.len())));
            }
            *slot = Some(g.constant(Tensor::row(v.clone())));
        }
    }
    let concat = concat_views(&mut g, nodes, 1, d)?;
    let (mu, lv) = posterior_nodes(&mut g, concat)?;
    GaussianDiag::new(g.value(mu).data().to_vec(), g.value(lv).data().to_vec())
}

/// Class probabilities for one latent (or direct input) vector.
pub fn discriminate(h: &[f64], store: &ParamStore) -> Result<[f64; NUM_CLASSES]> {
    let mut g = Graph::new(store);
    let x = g.constant(Tensor::row(h.to_vec()));
    let logits = discriminator_logits(&mut g, x)?;
    let p = g.softmax(logits);
    let v = g.value(p).data();
    Ok([v[0], v[1], v[2]])
}

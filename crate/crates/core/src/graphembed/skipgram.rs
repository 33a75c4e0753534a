use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::walks::WalkSet;
use crate::corpus::Article;
use crate::error::{Error, Result};
use crate::numerics::checkpoint::{load_tensors, write_tensors};
use crate::numerics::{sigmoid, Rng, Tensor};

/// Checkpoint key of the node embedding table.
pub const EMBEDDING_KEY: &str = "net.F";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial learning rate, decayed linearly towards `lr0 * 1e-4`.
    pub lr0: f64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self { dim: 128, window: 5, negatives: 5, epochs: 5, lr0: 0.025 }
    }
}

/// Node-name → vector table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    table: Tensor,
}

impl EmbeddingMatrix {
    pub fn new(nodes: Vec<String>, table: Tensor) -> Result<Self> {
        if table.shape().len() != 2 || table.rows() != nodes.len() {
            return Err(Error::shape(format!(
                "embedding table {:?} does not match {} nodes",
                table.shape(),
                nodes.len()
            )));
        }
        let index: HashMap<String, usize> = nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        if index.len() != nodes.len() {
            return Err(Error::invalid("duplicate node names"));
        }
        Ok(Self { nodes, index, table })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn table(&self) -> &Tensor {
        &self.table
    }

    pub fn get(&self, node: &str) -> Option<&[f64]> {
        self.index.get(node).map(|&i| self.table.row_slice(i))
    }

    /// Node-name list written next to the checkpoint.
    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".nodes");
        PathBuf::from(s)
    }

    /// Writes the table as `net.F` in an MVDM1 container plus `<path>.nodes`,
    /// one node name per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(fs::File::create(path)?);
        write_tensors(f, std::iter::once((EMBEDDING_KEY, &self.table)))?;
        let mut names = self.nodes.join("\n");
        names.push('\n');
        fs::write(Self::sidecar_path(path), names)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let tensors = load_tensors(path)?;
        let table = tensors.into_iter().find(|(n, _)| n == EMBEDDING_KEY).map(|(_, t)| t).ok_or_else(|| {
            Error::Checkpoint { path: path.to_path_buf(), message: format!("missing tensor {EMBEDDING_KEY}") }
        })?;
        let nodes =
            fs::read_to_string(Self::sidecar_path(path))?.lines().filter(|l| !l.is_empty()).map(String::from).collect();
        Self::new(nodes, table)
    }
}

/// `-log σ(u·pos) - Σ_n log σ(-u·n)` for one (center, context) pair.
pub fn sgns_loss(center: &[f64], pos: &[f64], negs: &[&[f64]]) -> f64 {
    let mut loss = softplus(-dot(center, pos));
    for n in negs {
        loss += softplus(dot(center, n));
    }
    loss
}

/// Gradients of [`sgns_loss`] with respect to the center, the positive
/// context and each negative.
pub fn sgns_grad(center: &[f64], pos: &[f64], negs: &[&[f64]]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let gp = sigmoid(dot(center, pos)) - 1.0;
    let mut d_center: Vec<f64> = pos.iter().map(|p| gp * p).collect();
    let d_pos: Vec<f64> = center.iter().map(|c| gp * c).collect();
    let mut d_negs = Vec::with_capacity(negs.len());
    for n in negs {
        let gn = sigmoid(dot(center, n));
        for (dc, nv) in d_center.iter_mut().zip(n.iter()) {
            *dc += gn * nv;
        }
        d_negs.push(center.iter().map(|c| gn * c).collect());
    }
    (d_center, d_pos, d_negs)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Skip-gram with negative sampling over a walk corpus, trained one epoch at
/// a time.
pub struct SkipGramTrainer<'w> {
    walks: &'w WalkSet,
    cfg: SkipGramConfig,
    input: Vec<f64>,
    output: Vec<f64>,
    noise_cdf: Vec<f64>,
    rng: Rng,
    step: usize,
    total_steps: usize,
    epochs_done: usize,
}

impl<'w> SkipGramTrainer<'w> {
    pub fn new(walks: &'w WalkSet, cfg: SkipGramConfig, rng: &mut Rng) -> Result<Self> {
        if cfg.window == 0 {
            return Err(Error::invalid("skip-gram window must be >= 1"));
        }
        if cfg.dim == 0 {
            return Err(Error::invalid("embedding dimension must be >= 1"));
        }
        if walks.is_empty() || walks.nodes.is_empty() {
            return Err(Error::invalid("no walks to train on"));
        }
        let v = walks.nodes.len();
        let mut counts = vec![0.0f64; v];
        for w in &walks.walks {
            for &n in w {
                if n >= v {
                    return Err(Error::invalid(format!("walk visits unknown node {n}")));
                }
                counts[n] += 1.0;
            }
        }
        let mut acc = 0.0;
        let noise_cdf = counts
            .iter()
            .map(|c| {
                acc += c.powf(0.75);
                acc
            })
            .collect();
        let mut rng = rng.fork();
        let half = 0.5 / cfg.dim as f64;
        let input = (0..v * cfg.dim).map(|_| rng.uniform_range(-half, half)).collect();
        let pairs_per_epoch: usize = walks
            .walks
            .iter()
            .map(|w| (0..w.len()).map(|i| context_range(i, w.len(), cfg.window).len() - 1).sum::<usize>())
            .sum();
        Ok(Self {
            walks,
            cfg,
            input,
            output: vec![0.0; v * cfg.dim],
            noise_cdf,
            rng,
            step: 0,
            total_steps: (pairs_per_epoch * cfg.epochs).max(1),
            epochs_done: 0,
        })
    }

    fn sample_noise(&mut self) -> usize {
        let total = *self.noise_cdf.last().expect("non-empty");
        let x = self.rng.uniform() * total;
        self.noise_cdf.partition_point(|&c| c <= x).min(self.noise_cdf.len() - 1)
    }

    fn learning_rate(&self) -> f64 {
        let frac = self.step as f64 / self.total_steps as f64;
        (self.cfg.lr0 * (1.0 - frac)).max(self.cfg.lr0 * 1e-4)
    }

    fn update(&mut self, center: usize, context: usize) {
        let d = self.cfg.dim;
        let lr = self.learning_rate();
        let mut neu = vec![0.0; d];
        let mut targets = vec![(context, 1.0)];
        for _ in 0..self.cfg.negatives {
            let n = self.sample_noise();
            if n != context {
                targets.push((n, 0.0));
            }
        }
        let c_row = center * d..(center + 1) * d;
        for (t, label) in targets {
            let t_row = t * d..(t + 1) * d;
            let score = dot(&self.input[c_row.clone()], &self.output[t_row.clone()]);
            let g = lr * (label - sigmoid(score));
            for k in 0..d {
                neu[k] += g * self.output[t_row.start + k];
                self.output[t_row.start + k] += g * self.input[c_row.start + k];
            }
        }
        for (x, dx) in self.input[c_row].iter_mut().zip(neu) {
            *x += dx;
        }
        self.step += 1;
    }

    /// One pass over every (center, context) pair of every walk, in order.
    pub fn run_epoch(&mut self) {
        let walks = self.walks;
        for w in &walks.walks {
            for i in 0..w.len() {
                for j in context_range(i, w.len(), self.cfg.window) {
                    if j != i {
                        self.update(w[i], w[j]);
                    }
                }
            }
        }
        self.epochs_done += 1;
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    /// `σ(F(u)·F'(v))`, the model probability that `v` is in the context of `u`.
    pub fn pair_probability(&self, u: usize, v: usize) -> f64 {
        let d = self.cfg.dim;
        sigmoid(dot(&self.input[u * d..(u + 1) * d], &self.output[v * d..(v + 1) * d]))
    }

    pub fn into_embeddings(self) -> EmbeddingMatrix {
        let v = self.walks.nodes.len();
        let table = Tensor::matrix(v, self.cfg.dim, self.input).expect("table shape");
        EmbeddingMatrix::new(self.walks.nodes.clone(), table).expect("walk nodes are unique")
    }
}

fn context_range(i: usize, len: usize, window: usize) -> std::ops::Range<usize> {
    i.saturating_sub(window)..(i + window + 1).min(len)
}

/// Trains node vectors for `cfg.epochs` epochs and returns the input-side table.
pub fn train_embeddings(walks: &WalkSet, cfg: &SkipGramConfig, rng: &mut Rng) -> Result<EmbeddingMatrix> {
    let mut t = SkipGramTrainer::new(walks, *cfg, rng)?;
    for _ in 0..cfg.epochs {
        t.run_epoch();
    }
    Ok(t.into_embeddings())
}

/// Mean embedding of the article's links; links unknown to `f` are skipped
/// and an article without usable links maps to the zero vector.
pub fn article_network_repr(article: &Article, f: &EmbeddingMatrix) -> Vec<f64> {
    let mut out = vec![0.0; f.dim()];
    let mut n = 0usize;
    for link in &article.links {
        if let Some(row) = f.get(link) {
            for (o, x) in out.iter_mut().zip(row) {
                *o += x;
            }
            n += 1;
        }
    }
    if n > 0 {
        for o in &mut out {
            *o /= n as f64;
        }
    }
    out
}

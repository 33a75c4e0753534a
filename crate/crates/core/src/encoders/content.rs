use serde::{Deserialize, Serialize};

use super::batch::{score_mask, ContentBatch};
use super::gru::{bigru, init_bigru};
use super::{AttentionKind, EncoderConfig, WORD_EMBEDDING};
use crate::corpus::PAD;
use crate::error::Result;
use crate::model::GaussianDiag;
use crate::model::{LOGVAR_BIAS_INIT, LOGVAR_MAX, LOGVAR_MIN};
use crate::numerics::{init, Graph, NodeId, NoiseSource, ParamStore, Rng, Tensor};

/// How sentence vectors are read off their Gaussians.
pub enum Latent<'a> {
    /// The mean; deterministic.
    Mean,
    /// One reparameterized draw per sentence.
    Sample(&'a mut dyn NoiseSource),
}

/// Attention weights of one article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionWeights {
    pub sentence: Vec<f64>,
    /// One vector per (kept) sentence.
    pub words: Vec<Vec<f64>>,
}

/// Exported attention for one article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub article_id: String,
    pub sentence_attn: Vec<f64>,
    pub word_attn: Vec<Vec<f64>>,
    pub predicted: String,
}

/// Graph nodes produced by [`content_forward`].
#[derive(Debug, Clone, Copy)]
pub struct ContentOutput {
    /// `batch x dim`.
    pub z: NodeId,
    /// `sentences x max_words`; padded positions hold exact zeros.
    pub word_attn: NodeId,
    /// `batch x max_sentences`.
    pub sentence_attn: NodeId,
    /// `sentences x dim` each.
    pub sentence_mean: NodeId,
    pub sentence_logvar: NodeId,
}

fn init_attention(store: &mut ParamStore, prefix: &str, cfg: &EncoderConfig, rng: &mut Rng) {
    let d = cfg.dim;
    store.insert(format!("{prefix}.weight"), init::xavier(d, 1, rng));
    if cfg.attention == AttentionKind::TanhContext {
        store.insert(format!("{prefix}.proj"), init::xavier(d, d, rng));
        store.insert(format!("{prefix}.proj_bias"), Tensor::zeros(&[1, d]));
    }
}

pub fn init_content(store: &mut ParamStore, cfg: &EncoderConfig, rng: &mut Rng) {
    let (d, h) = (cfg.dim, cfg.hidden());
    init_bigru(store, "content.word_gru", cfg.emb_dim, h, rng);
    init_attention(store, "content.word_attn", cfg, rng);
    store.insert("content.sent_mu.weight", init::xavier(d, d, rng));
    store.insert("content.sent_mu.bias", Tensor::zeros(&[1, d]));
    store.insert("content.sent_logvar.weight", init::xavier(d, d, rng));
    store.insert("content.sent_logvar.bias", Tensor::filled(&[1, d], LOGVAR_BIAS_INIT));
    init_bigru(store, "content.sent_gru", d, h, rng);
    init_attention(store, "content.sent_attn", cfg, rng);
}

/// Softmax attention over `states` (one `rows x dim` node per step). Scores
/// carry no bias: softmax ignores a shift shared by every position.
/// Returns the attended `rows x dim` context and the `rows x steps` weights.
fn attend(
    g: &mut Graph,
    prefix: &str,
    kind: AttentionKind,
    states: &[NodeId],
    lens: &[usize],
) -> Result<(NodeId, NodeId)> {
    let steps = states.len();
    let rows = lens.len();
    let stacked = g.concat_rows(states)?;
    let keys = match kind {
        AttentionKind::Linear => stacked,
        AttentionKind::TanhContext => {
            let p = g.param_by_name(&format!("{prefix}.proj"))?;
            let pb = g.param_by_name(&format!("{prefix}.proj_bias"))?;
            let u = g.matmul(stacked, p)?;
            let u = g.add(u, pb)?;
            g.tanh(u)
        }
    };
    let w = g.param_by_name(&format!("{prefix}.weight"))?;
    let scores = g.matmul(keys, w)?;
    let scores = g.reshape(scores, steps, rows)?;
    let mut scores = g.transpose(scores);
    if let Some(mask) = score_mask(lens, steps) {
        let m = g.constant(mask);
        scores = g.add(scores, m)?;
    }
    let alpha = g.softmax(scores);
    let col = g.transpose(alpha);
    let col = g.reshape(col, steps * rows, 1)?;
    let weighted = g.mul_col(stacked, col)?;
    let context = g.block_sum(weighted, steps)?;
    Ok((context, alpha))
}

/// Word-level bi-GRU and attention, stochastic sentence heads, sentence-level
/// bi-GRU and attention.
pub fn content_forward(
    g: &mut Graph,
    cfg: &EncoderConfig,
    batch: &ContentBatch,
    latent: Latent,
) -> Result<ContentOutput> {
    let n = batch.sentences();
    let h = cfg.hidden();
    let table = g.param_by_name(WORD_EMBEDDING)?;
    let words = g.embedding(table, &batch.word_ids, Some(PAD))?;
    let word_states = bigru(g, "content.word_gru", words, n, h, &batch.word_masks())?;
    let (context, word_attn) = attend(g, "content.word_attn", cfg.attention, &word_states, &batch.sentence_lens)?;

    let wm = g.param_by_name("content.sent_mu.weight")?;
    let bm = g.param_by_name("content.sent_mu.bias")?;
    let wl = g.param_by_name("content.sent_logvar.weight")?;
    let bl = g.param_by_name("content.sent_logvar.bias")?;
    let mean = g.matmul(context, wm)?;
    let mean = g.add(mean, bm)?;
    let logvar = g.matmul(context, wl)?;
    let logvar = g.add(logvar, bl)?;
    let logvar = g.clamp(logvar, LOGVAR_MIN, LOGVAR_MAX);
    let sentences = match latent {
        Latent::Mean => mean,
        Latent::Sample(noise) => {
            let eps = noise.standard_normals(n * cfg.dim);
            g.reparam(mean, logvar, &eps)?
        }
    };

    let b = batch.size();
    let seq = g.gather_rows(sentences, &batch.sentence_gather())?;
    let sent_states = bigru(g, "content.sent_gru", seq, b, h, &batch.sentence_masks())?;
    let counts: Vec<usize> = batch.articles.iter().map(Vec::len).collect();
    let (z, sentence_attn) = attend(g, "content.sent_attn", cfg.attention, &sent_states, &counts)?;
    Ok(ContentOutput { z, word_attn, sentence_attn, sentence_mean: mean, sentence_logvar: logvar })
}

/// Per-article attention weights, trimmed to real words and sentences.
pub fn attention_weights(g: &Graph, out: &ContentOutput, batch: &ContentBatch) -> Vec<AttentionWeights> {
    let words = g.value(out.word_attn);
    let sents = g.value(out.sentence_attn);
    batch
        .articles
        .iter()
        .enumerate()
        .map(|(a, rows)| AttentionWeights {
            sentence: sents.row_slice(a)[..rows.len()].to_vec(),
            words: rows.iter().map(|&r| words.row_slice(r)[..batch.sentence_lens[r]].to_vec()).collect(),
        })
        .collect()
}

/// Gaussian and word attention for a single sentence.
pub fn encode_sentence(words: &[usize], store: &ParamStore, cfg: &EncoderConfig) -> Result<(GaussianDiag, Vec<f64>)> {
    let sentences = vec![words.to_vec()];
    let batch = ContentBatch::new(&[&sentences], cfg.max_sentences, cfg.max_words)?;
    let mut g = Graph::new(store);
    let out = content_forward(&mut g, cfg, &batch, Latent::Mean)?;
    let q =
        GaussianDiag::new(g.value(out.sentence_mean).data().to_vec(), g.value(out.sentence_logvar).data().to_vec())?;
    let attn = g.value(out.word_attn).row_slice(0)[..batch.sentence_lens[0]].to_vec();
    Ok((q, attn))
}

/// Content vector and attention for one article's sentences.
pub fn encode_content(
    sentences: &[Vec<usize>],
    store: &ParamStore,
    cfg: &EncoderConfig,
    latent: Latent,
) -> Result<(Vec<f64>, AttentionWeights)> {
    let batch = ContentBatch::new(&[sentences], cfg.max_sentences, cfg.max_words)?;
    let mut g = Graph::new(store);
    let out = content_forward(&mut g, cfg, &batch, latent)?;
    let weights = attention_weights(&g, &out, &batch).remove(0);
    Ok((g.value(out.z).data().to_vec(), weights))
}

//! View encoders: a convolutional title encoder and a hierarchical attention
//! content encoder with stochastic sentence units.

mod batch;
mod content;
mod gru;
mod title;

use serde::{Deserialize, Serialize};

pub use batch::{ContentBatch, TitleBatch};
pub use content::{
    attention_weights, content_forward, encode_content, encode_sentence, init_content, AttentionRecord,
    AttentionWeights, ContentOutput, Latent,
};
pub use title::{encode_title, init_title, title_forward, Mode};

use crate::corpus::PAD;
use crate::error::{Error, Result};
use crate::numerics::{init, ParamStore, Rng};

/// Word embedding table shared by the title and content encoders.
pub const WORD_EMBEDDING: &str = "content.word_emb";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKind {
    /// Score is a linear function of the hidden state.
    Linear,
    /// Score is `tanh(W h + b) . u` with a learned context vector `u`.
    TanhContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub emb_dim: usize,
    /// Output width of every view; the GRUs use `dim / 2` per direction.
    pub dim: usize,
    pub windows: Vec<usize>,
    pub feature_maps: usize,
    pub dropout: f64,
    pub attention: AttentionKind,
    pub max_sentences: usize,
    pub max_words: usize,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim % 2 != 0 {
            return Err(Error::invalid(format!("view dimension {} must be even and positive", self.dim)));
        }
        if self.emb_dim == 0 || self.feature_maps == 0 {
            return Err(Error::invalid("embedding size and feature maps must be >= 1"));
        }
        if self.vocab_size < 2 {
            return Err(Error::invalid("vocabulary must hold at least the reserved ids"));
        }
        if self.windows.is_empty() || self.windows.contains(&0) {
            return Err(Error::invalid("convolution windows must be non-empty and >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.max_sentences == 0 || self.max_words == 0 {
            return Err(Error::invalid("sentence and word caps must be >= 1"));
        }
        Ok(())
    }

    pub fn hidden(&self) -> usize {
        self.dim / 2
    }

    pub fn max_window(&self) -> usize {
        self.windows.iter().copied().max().unwrap_or(1)
    }
}

/// Registers the shared word table: uniform in `[-0.5, 0.5]`, padding row zero.
pub fn init_word_embedding(store: &mut ParamStore, cfg: &EncoderConfig, rng: &mut Rng) {
    let mut t = init::uniform(cfg.vocab_size, cfg.emb_dim, 0.5, rng);
    t.row_slice_mut(PAD).fill(0.0);
    store.insert(WORD_EMBEDDING, t);
}

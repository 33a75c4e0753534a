use serde::{Deserialize, Serialize};

use super::classifier::{EncodedArticle, Model, Stochastic};
use super::config::{Architecture, TrainingConfig};
use crate::corpus::{clean_corpus, synth_corpus, CleanConfig, SynthSpec};
use crate::encoders::{
    content_forward, init_content, init_title, init_word_embedding, title_forward, AttentionKind, ContentBatch,
    EncoderConfig, Latent, Mode, TitleBatch,
};
use crate::error::Result;
use crate::graphembed::{sgns_grad, sgns_loss};
use crate::numerics::{fd_check, fd_check_with, Grads, ParamStore, Rng, Tensor};

/// Finite-difference step used by the suite.
pub const GRADCHECK_STEP: f64 = 1e-4;
/// Relative error every case must stay under.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckCase {
    pub name: String,
    pub max_rel_error: f64,
    /// Parameter and flat index of the worst element.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

impl GradCheckCase {
    pub fn passes(&self) -> bool {
        self.max_rel_error < GRADCHECK_TOLERANCE
    }
}

fn case(name: &str, r: crate::numerics::GradCheckReport) -> GradCheckCase {
    GradCheckCase { name: name.into(), max_rel_error: r.max_rel_error, worst: r.worst, checked: r.checked }
}

fn micro_encoder(attention: AttentionKind) -> EncoderConfig {
    EncoderConfig {
        vocab_size: 12,
        emb_dim: 4,
        dim: 6,
        windows: vec![2, 3],
        feature_maps: 3,
        dropout: 0.0,
        attention,
        max_sentences: 30,
        max_words: 50,
    }
}

fn micro_store(cfg: &EncoderConfig, seed: u64) -> ParamStore {
    let mut rng = Rng::new(seed);
    let mut store = ParamStore::new();
    init_word_embedding(&mut store, cfg, &mut rng);
    init_title(&mut store, cfg, &mut rng);
    init_content(&mut store, cfg, &mut rng);
    store
}

fn micro_model(arch: Architecture, seed: u64) -> Result<(Model, Vec<EncodedArticle>)> {
    let spec = SynthSpec {
        sources_per_block: 2,
        num_articles: 12,
        shared_lexicon: 20,
        partisan_lexicon: 4,
        title_len: 5,
        sentences: 2,
        sentence_len: 3,
        links_per_article: 2,
        seed,
        ..SynthSpec::default()
    };
    let corpus = clean_corpus(&synth_corpus(&spec)?, &CleanConfig::default());
    let cfg = TrainingConfig {
        dim: 4,
        emb_dim: 3,
        windows: vec![2, 3],
        feature_maps: 2,
        dropout: 0.0,
        num_walks: 2,
        walk_len: 5,
        sgns_epochs: 1,
        architecture: arch,
        seed,
        ..TrainingConfig::default()
    };
    let model = Model::from_corpus(&corpus, cfg)?;
    let enc = model.encode_all(corpus.articles());
    Ok((model, enc))
}

/// Central-difference checks of every trainable block and of the full
/// objective on micro inputs.
pub fn gradcheck_suite(seed: u64) -> Result<Vec<GradCheckCase>> {
    let h = GRADCHECK_STEP;
    let mut out = Vec::new();

    let cfg = micro_encoder(AttentionKind::Linear);
    let store = micro_store(&cfg, seed);
    let titles: [&[usize]; 2] = [&[2, 3, 4], &[5, 6, 7, 8, 9, 10, 11]];
    let batch = TitleBatch::new(&titles, cfg.max_window())?;
    let r = fd_check(&store, h, |g| {
        let z = title_forward(g, &cfg, &batch, Mode::Eval)?;
        let sq = g.mul(z, z)?;
        Ok(g.sum_all(sq))
    })?;
    out.push(case("title encoder", r));

    for (name, kind) in
        [("content encoder", AttentionKind::Linear), ("content encoder (tanh)", AttentionKind::TanhContext)]
    {
        let cfg = micro_encoder(kind);
        let store = micro_store(&cfg, seed + 1);
        let art = vec![vec![2, 3, 4], vec![5, 6], vec![7]];
        let batch = ContentBatch::new(&[&art], cfg.max_sentences, cfg.max_words)?;
        let r = fd_check(&store, h, |g| {
            let mut noise = Rng::stream(seed, 99);
            let out = content_forward(g, &cfg, &batch, Latent::Sample(&mut noise))?;
            let sq = g.mul(out.z, out.z)?;
            Ok(g.sum_all(sq))
        })?;
        out.push(case(name, r));
    }

    let mut rng = Rng::stream(seed, 5);
    let mut store = ParamStore::new();
    for name in ["center", "pos", "neg0", "neg1"] {
        store.insert(name, Tensor::row(rng.normals(4)));
    }
    let get = |s: &ParamStore, n: &str| s.get(n).expect("inserted").data().to_vec();
    let (n0, n1) = (get(&store, "neg0"), get(&store, "neg1"));
    let (dc, dp, dn) = sgns_grad(&get(&store, "center"), &get(&store, "pos"), &[&n0, &n1]);
    let mut grads = Grads::zeros_like(&store);
    for (name, g) in [("center", dc), ("pos", dp), ("neg0", dn[0].clone()), ("neg1", dn[1].clone())] {
        grads.by_id_mut(store.id(name).expect("inserted")).data_mut().copy_from_slice(&g);
    }
    let r = fd_check_with(&store, &grads, h, None, |s| {
        let (n0, n1) = (get(s, "neg0"), get(s, "neg1"));
        Ok(sgns_loss(&get(s, "center"), &get(s, "pos"), &[&n0, &n1]))
    })?;
    out.push(case("skip-gram loss", r));

    for (name, arch) in [("full objective", Architecture::Variational), ("direct objective", Architecture::Direct)] {
        let (model, enc) = micro_model(arch, seed)?;
        let batch: Vec<&EncodedArticle> = enc.iter().take(3).collect();
        let r = fd_check(model.store(), h, |g| {
            let mut noise = Rng::stream(seed, 11);
            let fwd = model.forward(g, &batch, Stochastic { dropout: None, noise: Some(&mut noise) })?;
            Ok(model.loss_nodes(g, &fwd, &batch, 0.5)?.total)
        })?;
        out.push(case(name, r));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_case_passes() {
        let cases = gradcheck_suite(3).unwrap();
        assert_eq!(cases.len(), 6);
        for c in &cases {
            assert!(c.passes(), "{c:?}");
            assert!(c.checked > 0);
        }
    }
}

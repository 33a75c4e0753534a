use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Architecture, LatentMode, TrainingConfig};
use super::gaussian::kl_to_standard;
use super::network::{
    concat_views, discriminator_input, discriminator_logits, init_discriminator, init_inference_net, posterior_nodes,
    NUM_CLASSES,
};
use crate::corpus::{Article, Corpus, Ideology, Vocabulary, PAD};
use crate::encoders::{
    attention_weights, content_forward, init_content, init_title, init_word_embedding, title_forward, AttentionRecord,
    ContentBatch, ContentOutput, EncoderConfig, Latent, Mode, TitleBatch,
};
use crate::error::{Error, Result};
use crate::eval::eval_metrics;
use crate::graphembed::{
    article_network_repr, build_graph, random_walks, train_embeddings, EmbeddingMatrix, EMBEDDING_KEY,
};
use crate::numerics::{checkpoint, Graph, NodeId, NoiseSource, ParamStore, Rng, Tensor};

/// Articles per graph during prediction.
const EVAL_BATCH: usize = 64;

/// An article mapped to token ids and its network vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedArticle {
    pub id: String,
    pub source: String,
    pub label: Option<Ideology>,
    pub title: Vec<usize>,
    pub sentences: Vec<Vec<usize>>,
    pub network: Vec<f64>,
}

/// Randomness used by one forward pass. With both fields `None` the pass is
/// deterministic and reads every stochastic unit at its mean.
#[derive(Default)]
pub struct Stochastic<'a> {
    pub dropout: Option<&'a mut Rng>,
    pub noise: Option<&'a mut dyn NoiseSource>,
}

/// Graph nodes of a forward pass.
pub struct Forward {
    /// `batch x 3`.
    pub logits: NodeId,
    /// Posterior mean and log-variance (variational architecture only).
    pub posterior: Option<(NodeId, NodeId)>,
    pub content: Option<(ContentOutput, ContentBatch)>,
}

#[derive(Debug, Clone, Copy)]
pub struct LossNodes {
    pub total: NodeId,
    pub nll: NodeId,
    pub kl: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub nll: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub article_id: String,
    pub source: String,
    pub gold: Option<Ideology>,
    pub distribution: [f64; NUM_CLASSES],
    pub predicted: Ideology,
    pub latent: LatentMode,
    /// Present when the content view is enabled.
    pub attention: Option<AttentionRecord>,
    pub calibrated: Option<[f64; NUM_CLASSES]>,
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-article objective over the epoch's batches.
    pub loss: f64,
    pub nll: f64,
    pub kl: f64,
    /// Validation macro-F1; NaN without a validation split.
    pub val_f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, if any epoch ran.
    pub best_epoch: Option<usize>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,nll,kl,val_f1\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{},{},{},{}\n", e.epoch, e.loss, e.nll, e.kl, e.val_f1));
        }
        s
    }
}

fn sidecar(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

/// Parameters plus everything needed to encode raw articles.
#[derive(Debug, Clone)]
pub struct Model {
    config: TrainingConfig,
    vocab: Vocabulary,
    embeddings: EmbeddingMatrix,
    store: ParamStore,
}

impl Model {
    /// Initializes parameters from `config.seed`. Every encoder is created
    /// whatever the view mask, so checkpoints share one layout.
    pub fn new(config: TrainingConfig, vocab: Vocabulary, embeddings: Option<EmbeddingMatrix>) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        let embeddings = match embeddings {
            Some(e) => e,
            None if config.views.network => {
                return Err(Error::View { view: "network", message: "graph embeddings are required".into() })
            }
            None => EmbeddingMatrix::new(Vec::new(), Tensor::zeros(&[0, d]))?,
        };
        if embeddings.dim() != d {
            return Err(Error::shape(format!("graph embeddings have width {}, model dim {d}", embeddings.dim())));
        }
        let enc = config.encoder(vocab.len());
        let mut rng = Rng::stream(config.seed, 0);
        let mut store = ParamStore::new();
        init_word_embedding(&mut store, &enc, &mut rng);
        init_title(&mut store, &enc, &mut rng);
        init_content(&mut store, &enc, &mut rng);
        if config.architecture == Architecture::Variational {
            init_inference_net(&mut store, d, &mut rng);
        }
        init_discriminator(&mut store, discriminator_input(&config), d, &mut rng);
        store.insert_frozen(EMBEDDING_KEY, embeddings.table().clone());
        Ok(Self { config, vocab, embeddings, store })
    }

    /// Builds the vocabulary and, when the network view is on, the graph
    /// embeddings from the training split, then initializes parameters.
    pub fn from_corpus(train: &Corpus, config: TrainingConfig) -> Result<Self> {
        config.validate()?;
        let vocab = Vocabulary::build(train, config.min_count, Some(config.max_vocab))?;
        let embeddings = if config.views.network {
            let graph = build_graph(train);
            let walks = random_walks(&graph, &config.walks(), &mut Rng::stream(config.seed, 2))?;
            Some(train_embeddings(&walks, &config.skipgram(), &mut Rng::stream(config.seed, 3))?)
        } else {
            None
        };
        Self::new(config, vocab, embeddings)
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        self.config.encoder(self.vocab.len())
    }

    pub fn encode(&self, article: &Article) -> EncodedArticle {
        EncodedArticle {
            id: article.id.clone(),
            source: article.source.clone(),
            label: article.label,
            title: self.vocab.encode(&article.title),
            sentences: article.sentences.iter().map(|s| self.vocab.encode(s)).collect(),
            network: article_network_repr(article, &self.embeddings),
        }
    }

    pub fn encode_all(&self, articles: &[Article]) -> Vec<EncodedArticle> {
        articles.par_iter().map(|a| self.encode(a)).collect()
    }

    fn check_views(&self, a: &EncodedArticle) -> Result<()> {
        let views = self.config.views;
        if views.title && a.title.iter().all(|&t| t == PAD) {
            return Err(Error::View { view: "title", message: format!("article {:?} has an empty title", a.id) });
        }
        if views.content && a.sentences.iter().all(|s| s.is_empty()) {
            return Err(Error::View { view: "content", message: format!("article {:?} has no sentences", a.id) });
        }
        if views.network && a.network.len() != self.config.dim {
            return Err(Error::View {
                view: "network",
                message: format!("article {:?} has a network vector of length {}", a.id, a.network.len()),
            });
        }
        Ok(())
    }

    /// Encodes the enabled views of `batch` and classifies them.
    pub fn forward(&self, g: &mut Graph, batch: &[&EncodedArticle], stoch: Stochastic) -> Result<Forward> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        for a in batch {
            self.check_views(a)?;
        }
        let cfg = &self.config;
        let enc = self.encoder_config();
        let (b, d) = (batch.len(), cfg.dim);
        let Stochastic { dropout, mut noise } = stoch;

        let title = if cfg.views.title {
            let titles: Vec<&[usize]> = batch.iter().map(|a| a.title.as_slice()).collect();
            let tb = TitleBatch::new(&titles, enc.max_window())?;
            let mode = match dropout {
                Some(rng) => Mode::Train(rng),
                None => Mode::Eval,
            };
            Some(title_forward(g, &enc, &tb, mode)?)
        } else {
            None
        };
        let network = if cfg.views.network {
            let data = batch.iter().flat_map(|a| a.network.iter().copied()).collect();
            Some(g.constant(Tensor::matrix(b, d, data)?))
        } else {
            None
        };
        let content = if cfg.views.content {
            let sents: Vec<&[Vec<usize>]> = batch.iter().map(|a| a.sentences.as_slice()).collect();
            let cb = ContentBatch::new(&sents, cfg.max_sentences, cfg.max_words)?;
            let latent = match noise.as_deref_mut() {
                Some(n) => Latent::Sample(n),
                None => Latent::Mean,
            };
            let out = content_forward(g, &enc, &cb, latent)?;
            Some((out, cb))
        } else {
            None
        };
        let z_content = content.as_ref().map(|(o, _)| o.z);

        let (h, posterior) = match cfg.architecture {
            Architecture::Variational => {
                let concat = concat_views(g, [title, network, z_content], b, d)?;
                let (mu, lv) = posterior_nodes(g, concat)?;
                let h = match noise {
                    Some(n) => {
                        let eps = n.standard_normals(b * d);
                        g.reparam(mu, lv, &eps)?
                    }
                    None => mu,
                };
                (h, Some((mu, lv)))
            }
            Architecture::Direct => {
                let parts: Vec<NodeId> = [title, network, z_content].into_iter().flatten().collect();
                (g.concat_cols(&parts)?, None)
            }
        };
        let logits = discriminator_logits(g, h)?;
        Ok(Forward { logits, posterior, content })
    }

    /// `J = mean NLL + kl_weight * mean KL(q || N(0, I))`.
    pub fn loss_nodes(
        &self,
        g: &mut Graph,
        fwd: &Forward,
        batch: &[&EncodedArticle],
        kl_weight: f64,
    ) -> Result<LossNodes> {
        let b = batch.len();
        let mut onehot = vec![0.0; b * NUM_CLASSES];
        for (i, a) in batch.iter().enumerate() {
            let label = a.label.ok_or_else(|| Error::invalid(format!("article {:?} has no label", a.id)))?;
            onehot[i * NUM_CLASSES + label.index()] = 1.0;
        }
        let logp = g.log_softmax(fwd.logits);
        let y = g.constant(Tensor::matrix(b, NUM_CLASSES, onehot)?);
        let picked = g.mul(logp, y)?;
        let picked = g.sum_all(picked);
        let nll = g.scale(picked, -1.0 / b as f64);
        let kl = match fwd.posterior {
            Some((mu, lv)) => {
                let per_row = kl_to_standard(g, mu, lv)?;
                g.mean_all(per_row)
            }
            None => g.constant(Tensor::scalar(0.0)),
        };
        let weighted = g.scale(kl, kl_weight);
        let total = g.add(nll, weighted)?;
        Ok(LossNodes { total, nll, kl })
    }

    /// Evaluates the objective on a labeled batch, drawing dropout masks and
    /// latent noise from `rng` as in training.
    pub fn loss(&self, batch: &[&EncodedArticle], kl_weight: f64, rng: &mut Rng) -> Result<LossValue> {
        let mut g = Graph::new(&self.store);
        let fwd = self.train_forward(&mut g, batch, rng)?;
        let l = self.loss_nodes(&mut g, &fwd, batch, kl_weight)?;
        Ok(LossValue { total: g.value(l.total).item(), nll: g.value(l.nll).item(), kl: g.value(l.kl).item() })
    }

    fn train_forward(&self, g: &mut Graph, batch: &[&EncodedArticle], rng: &mut Rng) -> Result<Forward> {
        let mut drop_rng = rng.fork();
        let mut noise_rng = rng.fork();
        let noise: Option<&mut dyn NoiseSource> = match self.config.train_latent {
            LatentMode::Sample => Some(&mut noise_rng),
            LatentMode::Mean => None,
        };
        self.forward(g, batch, Stochastic { dropout: Some(&mut drop_rng), noise })
    }

    fn predict_chunk(&self, chunk: &[EncodedArticle]) -> Result<Vec<PredictionRecord>> {
        let refs: Vec<&EncodedArticle> = chunk.iter().collect();
        let mut g = Graph::new(&self.store);
        let fwd = self.forward(&mut g, &refs, Stochastic::default())?;
        let probs = g.softmax(fwd.logits);
        let attn = fwd.content.as_ref().map(|(out, cb)| attention_weights(&g, out, cb));
        let p = g.value(probs);
        Ok(chunk
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let row = p.row_slice(i);
                let distribution = [row[0], row[1], row[2]];
                let predicted = Ideology::from_index(argmax(&distribution)).expect("three classes");
                let attention = attn.as_ref().map(|w| AttentionRecord {
                    article_id: a.id.clone(),
                    sentence_attn: w[i].sentence.clone(),
                    word_attn: w[i].words.clone(),
                    predicted: predicted.as_str().to_string(),
                });
                PredictionRecord {
                    article_id: a.id.clone(),
                    source: a.source.clone(),
                    gold: a.label,
                    distribution,
                    predicted,
                    latent: LatentMode::Mean,
                    attention,
                    calibrated: None,
                }
            })
            .collect())
    }

    /// Mean-mode predictions, computed in parallel over fixed-size chunks;
    /// the result does not depend on the thread count.
    pub fn predict_encoded(&self, articles: &[EncodedArticle]) -> Result<Vec<PredictionRecord>> {
        let parts: Vec<Vec<PredictionRecord>> =
            articles.par_chunks(EVAL_BATCH).map(|c| self.predict_chunk(c)).collect::<Result<_>>()?;
        Ok(parts.into_iter().flatten().collect())
    }

    pub fn predict(&self, article: &Article) -> Result<PredictionRecord> {
        Ok(self.predict_chunk(&[self.encode(article)])?.remove(0))
    }

    pub fn predict_all(&self, articles: &[Article]) -> Result<Vec<PredictionRecord>> {
        self.predict_encoded(&self.encode_all(articles))
    }

    /// Writes the parameters to `path` (MVDM1) and the config, vocabulary and
    /// graph node list to `path` + `.config` / `.vocab` / `.nodes`.
    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(&self.store, path)?;
        self.config.save(&sidecar(path, ".config"))?;
        self.vocab.save(&sidecar(path, ".vocab"))?;
        let nodes: String = self.embeddings.nodes().iter().map(|n| format!("{n}\n")).collect();
        fs::write(EmbeddingMatrix::sidecar_path(path), nodes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let config = TrainingConfig::load(&sidecar(path, ".config"))?;
        let vocab = Vocabulary::load(&sidecar(path, ".vocab"))?;
        let nodes: Vec<String> = fs::read_to_string(EmbeddingMatrix::sidecar_path(path))?
            .lines()
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        let placeholder = EmbeddingMatrix::new(nodes.clone(), Tensor::zeros(&[nodes.len(), config.dim]))?;
        let mut model = Self::new(config, vocab, Some(placeholder))?;
        checkpoint::load_into(&mut model.store, path)?;
        let table = model.store.get(EMBEDDING_KEY).expect("registered in new").clone();
        model.embeddings = EmbeddingMatrix::new(nodes, table)?;
        Ok(model)
    }
}

/// Macro-F1 of mean-mode predictions on labeled articles.
pub fn macro_f1(model: &Model, articles: &[EncodedArticle]) -> Result<f64> {
    let preds = model.predict_encoded(articles)?;
    let gold: Vec<Ideology> = articles
        .iter()
        .map(|a| a.label.ok_or_else(|| Error::invalid(format!("article {:?} has no label", a.id))))
        .collect::<Result<_>>()?;
    let predicted: Vec<Ideology> = preds.iter().map(|p| p.predicted).collect();
    Ok(eval_metrics(&predicted, &gold)?.macro_f1)
}

/// Mini-batch AdaDelta on the objective. After every epoch the validation
/// macro-F1 is measured; the best parameters are kept and training stops after
/// `patience` epochs without improvement. Without a validation split the last
/// parameters are kept.
pub fn train(model: &mut Model, train: &[EncodedArticle], val: &[EncodedArticle]) -> Result<TrainingLog> {
    if train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    if let Some(a) = train.iter().find(|a| a.label.is_none()) {
        return Err(Error::invalid(format!("training article {:?} has no label", a.id)));
    }
    let cfg = model.config.clone();
    let opt = cfg.optimizer();
    let mut rng = Rng::stream(cfg.seed, 1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainingLog::default();
    let mut best: Option<(f64, ParamStore)> = None;
    let mut stale = 0;
    let mut step = 0;
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let (mut loss, mut nll, mut kl) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&EncodedArticle> = chunk.iter().map(|&i| &train[i]).collect();
            let grads = {
                let mut g = Graph::new(&model.store);
                let fwd = model.train_forward(&mut g, &batch, &mut rng)?;
                let l = model.loss_nodes(&mut g, &fwd, &batch, cfg.kl_weight(step))?;
                let w = batch.len() as f64;
                loss += w * g.value(l.total).item();
                nll += w * g.value(l.nll).item();
                kl += w * g.value(l.kl).item();
                g.backward(l.total)?
            };
            opt.step(&mut model.store, &grads)?;
            step += 1;
        }
        let n = train.len() as f64;
        let val_f1 = if val.is_empty() { f64::NAN } else { macro_f1(model, val)? };
        log.epochs.push(EpochRecord { epoch, loss: loss / n, nll: nll / n, kl: kl / n, val_f1 });
        if val.is_empty() {
            log.best_epoch = Some(epoch);
            continue;
        }
        if best.as_ref().is_none_or(|(f, _)| val_f1 > *f) {
            best = Some((val_f1, model.store.values_snapshot()));
            log.best_epoch = Some(epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    if let Some((_, snapshot)) = best {
        for id in model.store.ids().collect::<Vec<_>>() {
            *model.store.value_mut(id) = snapshot.value(id).clone();
        }
    }
    Ok(log)
}

/// Builds a model from the training split and trains it.
pub fn fit(train_split: &Corpus, val_split: &Corpus, config: TrainingConfig) -> Result<(Model, TrainingLog)> {
    let mut model = Model::from_corpus(train_split, config)?;
    let tr = model.encode_all(train_split.articles());
    let va = model.encode_all(val_split.articles());
    let log = train(&mut model, &tr, &va)?;
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{clean_corpus, split, synth_corpus, CleanConfig, SynthSpec};
    use crate::numerics::fd_check;

    fn tiny_corpus(n: usize, seed: u64) -> Corpus {
        let spec = SynthSpec {
            sources_per_block: 2,
            num_articles: n,
            shared_lexicon: 20,
            partisan_lexicon: 4,
            title_len: 5,
            sentences: 2,
            sentence_len: 3,
            links_per_article: 2,
            seed,
            ..SynthSpec::default()
        };
        clean_corpus(&synth_corpus(&spec).unwrap(), &CleanConfig::default())
    }

    fn tiny_config() -> TrainingConfig {
        TrainingConfig {
            dim: 4,
            emb_dim: 3,
            windows: vec![2, 3],
            feature_maps: 2,
            num_walks: 2,
            walk_len: 5,
            sgns_epochs: 1,
            batch_size: 4,
            epochs: 2,
            ..TrainingConfig::default()
        }
    }

    fn tiny_model(cfg: TrainingConfig) -> (Model, Vec<EncodedArticle>) {
        let corpus = tiny_corpus(12, 3);
        let model = Model::from_corpus(&corpus, cfg).unwrap();
        let enc = model.encode_all(corpus.articles());
        (model, enc)
    }

    fn zero_prefix(model: &mut Model, prefix: &str) {
        let store = model.store_mut();
        for id in store.ids().collect::<Vec<_>>() {
            if store.name(id).starts_with(prefix) {
                store.value_mut(id).data_mut().fill(0.0);
            }
        }
    }

    #[test]
    fn zero_epochs_keep_initial_parameters() {
        let (mut model, enc) = tiny_model(TrainingConfig { epochs: 0, ..tiny_config() });
        let before = model.store().clone();
        let log = train(&mut model, &enc, &enc).unwrap();
        assert!(log.epochs.is_empty());
        for ((n1, t1), (n2, t2)) in before.iter().zip(model.store().iter()) {
            assert_eq!((n1, t1), (n2, t2));
        }
    }

    #[test]
    fn zero_kl_weight_gives_nll() {
        let (model, enc) = tiny_model(tiny_config());
        let batch: Vec<&EncodedArticle> = enc.iter().take(5).collect();
        let l = model.loss(&batch, 0.0, &mut Rng::new(1)).unwrap();
        assert_eq!(l.total, l.nll);
        assert!(l.kl > 0.0);
    }

    #[test]
    fn posterior_at_prior_has_zero_kl() {
        let (mut model, enc) = tiny_model(tiny_config());
        zero_prefix(&mut model, "fuse.");
        let batch: Vec<&EncodedArticle> = enc.iter().take(5).collect();
        let l = model.loss(&batch, 1.0, &mut Rng::new(2)).unwrap();
        assert_eq!(l.kl, 0.0);
    }

    #[test]
    fn uniform_prediction_costs_ln3() {
        let (mut model, enc) = tiny_model(tiny_config());
        zero_prefix(&mut model, "disc.");
        let l = model.loss(&[&enc[0]], 0.0, &mut Rng::new(3)).unwrap();
        assert!((l.nll - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn unlabeled_and_empty_inputs_are_errors() {
        let (mut model, enc) = tiny_model(tiny_config());
        let mut unlabeled = enc[0].clone();
        unlabeled.label = None;
        assert!(model.loss(&[&unlabeled], 1.0, &mut Rng::new(4)).is_err());
        assert!(train(&mut model, &[], &enc).is_err());
        assert!(train(&mut model, &[unlabeled], &enc).is_err());
    }

    #[test]
    fn network_view_needs_embeddings() {
        let corpus = tiny_corpus(6, 5);
        let vocab = Vocabulary::build(&corpus, 1, None).unwrap();
        let err = Model::new(tiny_config(), vocab, None).unwrap_err();
        assert!(err.to_string().starts_with("network view"), "{err}");
    }

    #[test]
    fn masked_views_get_no_gradient() {
        for views in ["title,network", "network,content", "title"] {
            let cfg = TrainingConfig { views: views.parse().unwrap(), ..tiny_config() };
            let (model, enc) = tiny_model(cfg.clone());
            let batch: Vec<&EncodedArticle> = enc.iter().take(4).collect();
            let mut g = Graph::new(model.store());
            let mut rng = Rng::new(6);
            let fwd = model.train_forward(&mut g, &batch, &mut rng).unwrap();
            let l = model.loss_nodes(&mut g, &fwd, &batch, 1.0).unwrap();
            let grads = g.backward(l.total).unwrap();
            let mut touched = [false; 2];
            for (name, grad) in grads.iter() {
                let zero = grad.data().iter().all(|&x| x == 0.0);
                if name.starts_with("title.") {
                    assert_eq!(zero, !cfg.views.title, "{views}: {name}");
                    touched[0] = true;
                }
                if name.starts_with("content.") && name != crate::encoders::WORD_EMBEDDING {
                    assert_eq!(zero, !cfg.views.content, "{views}: {name}");
                    touched[1] = true;
                }
            }
            assert_eq!(touched, [true, true]);
        }
    }

    #[test]
    fn masked_view_matches_zero_vector() {
        let cfg = TrainingConfig { views: "title,content".parse().unwrap(), ..tiny_config() };
        let (model, enc) = tiny_model(cfg);
        let mut zeroed = enc[0].clone();
        zeroed.network = vec![0.0; 4];
        let mut other = enc[0].clone();
        other.network = vec![5.0; 4];
        let a = model.predict_encoded(&[zeroed]).unwrap();
        let b = model.predict_encoded(&[other]).unwrap();
        assert_eq!(a[0].distribution, b[0].distribution);
    }

    #[test]
    fn full_loss_gradient_matches_finite_differences() {
        let cfg = TrainingConfig { dropout: 0.0, ..tiny_config() };
        let (model, enc) = tiny_model(cfg);
        let batch: Vec<&EncodedArticle> = enc.iter().take(3).collect();
        let report = fd_check(model.store(), 1e-4, |g| {
            let mut noise = Rng::new(11);
            let fwd = model.forward(g, &batch, Stochastic { dropout: None, noise: Some(&mut noise) })?;
            Ok(model.loss_nodes(g, &fwd, &batch, 0.5)?.total)
        })
        .unwrap();
        assert!(report.passes(1e-4), "{:?} {:?}", report.worst, report.max_rel_error);
    }

    #[test]
    fn predictions_are_distributions_and_deterministic() {
        let (model, enc) = tiny_model(tiny_config());
        let a = model.predict_encoded(&enc).unwrap();
        let b = model.predict_encoded(&enc).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!((p.distribution.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            let attn = p.attention.as_ref().unwrap();
            assert!((attn.sentence_attn.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        // batching does not change a prediction
        assert_eq!(model.predict_encoded(&enc[3..4]).unwrap()[0], a[3]);
    }

    #[test]
    fn bad_article_names_the_view() {
        let (model, enc) = tiny_model(tiny_config());
        let mut a = enc[0].clone();
        a.title.clear();
        let err = model.predict_encoded(&[a]).unwrap_err();
        assert!(err.to_string().starts_with("title view"), "{err}");
        let mut b = enc[0].clone();
        b.sentences = vec![vec![]];
        let err = model.predict_encoded(&[b]).unwrap_err();
        assert!(err.to_string().starts_with("content view"), "{err}");
    }

    #[test]
    fn training_is_deterministic_and_persists() {
        let corpus = tiny_corpus(30, 8);
        let (tr, va, _) = split(&corpus, (0.6, 0.2, 0.2), 1).unwrap();
        let (m1, log1) = fit(&tr, &va, tiny_config()).unwrap();
        let (_, log2) = fit(&tr, &va, tiny_config()).unwrap();
        assert_eq!(log1.to_csv(), log2.to_csv());
        assert_eq!(log1.epochs.len(), 2);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.mvdm");
        m1.save(&path).unwrap();
        let m2 = Model::load(&path).unwrap();
        for ((n1, t1), (n2, t2)) in m1.store().iter().zip(m2.store().iter()) {
            assert_eq!(n1, n2);
            let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(t1), bits(t2), "{n1}");
        }
        assert_eq!(m1.predict_all(corpus.articles()).unwrap(), m2.predict_all(corpus.articles()).unwrap());
    }

    #[test]
    fn log_csv_layout() {
        let log = TrainingLog {
            epochs: vec![EpochRecord { epoch: 1, loss: 1.5, nll: 1.25, kl: 0.25, val_f1: 0.5 }],
            best_epoch: Some(1),
        };
        assert_eq!(log.to_csv(), "epoch,loss,nll,kl,val_f1\n1,1.5,1.25,0.25,0.5\n");
    }

    #[test]
    fn argmax_prefers_first_tie() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[1.0 / 3.0; 3]), 0);
    }
}

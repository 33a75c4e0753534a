//! Synthetic corpora with planted ideology signal in every view.
//!
//! Sources are grouped into three blocks, one per label. Each view carries an
//! independently tunable signal:
//!
//! * title and content tokens are drawn from a mixture of a shared lexicon and
//!   a partisan lexicon, with the view's signal strength as mixing weight;
//!   a partisan token comes from the article's own block lexicon with
//!   probability `lexicon_purity`, otherwise from another block's;
//! * with probability `link_signal` a link follows the homophilous scheme
//!   (intra-block with probability `p_in`, else uniform cross-block),
//!   otherwise it targets a uniformly random other source.

use serde::{Deserialize, Serialize};

use super::article::{Article, Corpus, Ideology};
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub sources_per_block: usize,
    pub num_articles: usize,
    pub shared_lexicon: usize,
    pub partisan_lexicon: usize,
    pub title_len: usize,
    pub sentences: usize,
    pub sentence_len: usize,
    /// Upper bound; each article gets `1..=links_per_article` links.
    pub links_per_article: usize,
    pub title_signal: f64,
    pub content_signal: f64,
    pub link_signal: f64,
    pub p_in: f64,
    pub lexicon_purity: f64,
    /// Adds a per-source footer line and a per-source franchise link to every
    /// article, which cleaning is expected to strip.
    pub boilerplate: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            sources_per_block: 10,
            num_articles: 4000,
            shared_lexicon: 400,
            partisan_lexicon: 40,
            title_len: 8,
            sentences: 4,
            sentence_len: 8,
            links_per_article: 3,
            title_signal: 0.7,
            content_signal: 0.22,
            link_signal: 0.7,
            p_in: 0.9,
            lexicon_purity: 0.6,
            boilerplate: true,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("sources_per_block", self.sources_per_block),
            ("num_articles", self.num_articles),
            ("shared_lexicon", self.shared_lexicon),
            ("partisan_lexicon", self.partisan_lexicon),
            ("title_len", self.title_len),
            ("sentences", self.sentences),
            ("sentence_len", self.sentence_len),
            ("links_per_article", self.links_per_article),
        ];
        for (name, v) in counts {
            if v < 1 {
                return Err(Error::invalid(format!("{name} must be >= 1")));
            }
        }
        if self.sources_per_block < 2 {
            return Err(Error::invalid("sources_per_block must be >= 2 for intra-block links"));
        }
        let probs = [
            ("title_signal", self.title_signal),
            ("content_signal", self.content_signal),
            ("link_signal", self.link_signal),
            ("p_in", self.p_in),
            ("lexicon_purity", self.lexicon_purity),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }

    /// Domain name of source `j` in the block of `label`.
    pub fn source_name(label: Ideology, j: usize) -> String {
        format!("{}{:02}.news", label.as_str(), j)
    }

    /// The planted block of a synthetic source, if the name is one.
    pub fn block_of(source: &str) -> Option<Ideology> {
        Ideology::ALL.into_iter().find(|l| {
            source
                .strip_prefix(l.as_str())
                .and_then(|rest| rest.strip_suffix(".news"))
                .is_some_and(|num| !num.is_empty() && num.chars().all(|c| c.is_ascii_digit()))
        })
    }
}

struct Lexicons {
    shared: Vec<String>,
    partisan: [Vec<String>; 3],
}

impl Lexicons {
    fn new(spec: &SynthSpec) -> Self {
        let shared = (0..spec.shared_lexicon).map(|i| format!("w{i}")).collect();
        let partisan =
            Ideology::ALL.map(|l| (0..spec.partisan_lexicon).map(|i| format!("{}{i}", l.as_str())).collect());
        Self { shared, partisan }
    }

    fn token(&self, rng: &mut Rng, label: Ideology, signal: f64, purity: f64) -> String {
        if rng.bernoulli(signal) {
            let block = if rng.bernoulli(purity) { label.index() } else { (label.index() + 1 + rng.below(2)) % 3 };
            let lex = &self.partisan[block];
            lex[rng.below(lex.len())].clone()
        } else {
            self.shared[rng.below(self.shared.len())].clone()
        }
    }
}

fn around(rng: &mut Rng, center: usize, spread: usize) -> usize {
    let lo = center.saturating_sub(spread).max(1);
    lo + rng.below(center + spread - lo + 1)
}

/// Generates a labeled corpus; byte-identical output for identical specs.
pub fn synth_corpus(spec: &SynthSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let lex = Lexicons::new(spec);
    let blocks: [Vec<String>; 3] =
        Ideology::ALL.map(|l| (0..spec.sources_per_block).map(|j| SynthSpec::source_name(l, j)).collect());

    let mut articles = Vec::with_capacity(spec.num_articles);
    for i in 0..spec.num_articles {
        let label = Ideology::ALL[i % 3];
        let b = label.index();
        let src_idx = rng.below(spec.sources_per_block);
        let source = blocks[b][src_idx].clone();

        let title_len = around(&mut rng, spec.title_len, 2);
        let title =
            (0..title_len).map(|_| lex.token(&mut rng, label, spec.title_signal, spec.lexicon_purity)).collect();

        let n_sent = around(&mut rng, spec.sentences, 1);
        let mut sentences: Vec<Vec<String>> = (0..n_sent)
            .map(|_| {
                let len = around(&mut rng, spec.sentence_len, 3);
                (0..len).map(|_| lex.token(&mut rng, label, spec.content_signal, spec.lexicon_purity)).collect()
            })
            .collect();

        let n_links = 1 + rng.below(spec.links_per_article);
        let mut links = Vec::with_capacity(n_links + 1);
        for _ in 0..n_links {
            let (tb, tj) = if rng.bernoulli(spec.link_signal) {
                if rng.bernoulli(spec.p_in) {
                    let j = (src_idx + 1 + rng.below(spec.sources_per_block - 1)) % spec.sources_per_block;
                    (b, j)
                } else {
                    ((b + 1 + rng.below(2)) % 3, rng.below(spec.sources_per_block))
                }
            } else {
                // any source other than our own
                let total = 3 * spec.sources_per_block;
                let own = b * spec.sources_per_block + src_idx;
                let k = (own + 1 + rng.below(total - 1)) % total;
                (k / spec.sources_per_block, k % spec.sources_per_block)
            };
            links.push(blocks[tb][tj].clone());
        }

        if spec.boilerplate {
            let tag = source.replace('.', "");
            sentences.push(vec!["subscribe".into(), "to".into(), tag.clone(), "here".into()]);
            links.push(format!("{tag}.social"));
        }

        articles.push(Article { id: format!("synth-{i:06}"), source, title, sentences, links, label: Some(label) });
    }
    Corpus::new(articles)
}

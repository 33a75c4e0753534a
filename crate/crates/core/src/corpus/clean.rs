use std::collections::HashMap;

use super::article::{Article, Corpus};
use super::tokenize::normalize_domain;

/// Document-frequency thresholds for boilerplate removal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanConfig {
    /// Links appearing in more than this fraction of a source's articles are dropped.
    pub tau_link: f64,
    /// Lines appearing in more than this fraction of a source's articles are dropped.
    pub tau_line: f64,
    /// A link or line must occur in at least this many articles of the source
    /// before the frequency rules apply.
    pub min_support: usize,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self { tau_link: 0.5, tau_line: 0.3, min_support: 2 }
    }
}

#[derive(Debug, Clone, Default)]
struct SourceCounts {
    articles: usize,
    links: HashMap<String, usize>,
    lines: HashMap<Vec<String>, usize>,
}

/// Per-source document frequencies of link domains and content lines.
#[derive(Debug, Clone, Default)]
pub struct SourceStats {
    per_source: HashMap<String, SourceCounts>,
}

impl SourceStats {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut per_source: HashMap<String, SourceCounts> = HashMap::new();
        for a in corpus.articles() {
            let s = per_source.entry(normalize_domain(&a.source)).or_default();
            s.articles += 1;
            let mut links: Vec<String> = a.links.iter().map(|l| normalize_domain(l)).collect();
            links.sort();
            links.dedup();
            for l in links {
                *s.links.entry(l).or_default() += 1;
            }
            let mut lines: Vec<&Vec<String>> = a.sentences.iter().collect();
            lines.sort();
            lines.dedup();
            for l in lines {
                *s.lines.entry(l.clone()).or_default() += 1;
            }
        }
        Self { per_source }
    }

    /// Fraction of `source`'s articles containing the link, and the raw count.
    pub fn link_frequency(&self, source: &str, link: &str) -> (f64, usize) {
        self.per_source.get(&normalize_domain(source)).map_or((0.0, 0), |s| {
            let n = s.links.get(&normalize_domain(link)).copied().unwrap_or(0);
            (n as f64 / s.articles.max(1) as f64, n)
        })
    }

    pub fn line_frequency(&self, source: &str, line: &[String]) -> (f64, usize) {
        self.per_source.get(&normalize_domain(source)).map_or((0.0, 0), |s| {
            let n = s.lines.get(line).copied().unwrap_or(0);
            (n as f64 / s.articles.max(1) as f64, n)
        })
    }
}

/// Removes self-links, source-systematic links and boilerplate lines.
/// Links come out normalized to bare domains; empty sentences are dropped.
pub fn clean_article(raw: &Article, stats: &SourceStats, cfg: &CleanConfig) -> Article {
    let source = normalize_domain(&raw.source);
    let links = raw
        .links
        .iter()
        .map(|l| normalize_domain(l))
        .filter(|l| !l.is_empty() && *l != source)
        .filter(|l| {
            let (f, n) = stats.link_frequency(&source, l);
            !(n >= cfg.min_support && f > cfg.tau_link)
        })
        .collect();
    let sentences = raw
        .sentences
        .iter()
        .filter(|s| !s.is_empty())
        .filter(|s| {
            let (f, n) = stats.line_frequency(&source, s);
            !(n >= cfg.min_support && f > cfg.tau_line)
        })
        .cloned()
        .collect();
    Article { id: raw.id.clone(), source, title: raw.title.clone(), sentences, links, label: raw.label }
}

/// Computes statistics over the raw corpus and cleans every article.
pub fn clean_corpus(corpus: &Corpus, cfg: &CleanConfig) -> Corpus {
    let stats = SourceStats::from_corpus(corpus);
    let articles = corpus.articles().iter().map(|a| clean_article(a, &stats, cfg)).collect();
    Corpus::new(articles).expect("cleaning keeps ids unique")
}

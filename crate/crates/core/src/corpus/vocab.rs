use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::article::Corpus;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

/// Token to id map. Ids 0 and 1 are reserved for padding and unknown tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    /// Every title and content token seen at least `min_count` times, ordered
    /// by descending frequency then lexicographically. `max_size` caps the
    /// total size including the two reserved ids.
    pub fn build(corpus: &Corpus, min_count: usize, max_size: Option<usize>) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::invalid("cannot build a vocabulary from an empty corpus"));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for a in corpus.articles() {
            for t in a.title.iter().chain(a.sentences.iter().flatten()) {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, n)| n >= min_count.max(1)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        if let Some(m) = max_size {
            ranked.truncate(m.saturating_sub(2));
        }
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        tokens.extend(ranked.into_iter().map(|(t, _)| t.to_string()));
        Ok(Self::from_tokens(tokens))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.get(token).is_some_and(|&i| i > UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.tokens.get(i).cloned().unwrap_or_else(|| UNK_TOKEN.to_string())).collect()
    }

    /// One token per line in id order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let tokens: Vec<String> = text.lines().map(String::from).collect();
        if tokens.len() < 2 || tokens[0] != PAD_TOKEN || tokens[1] != UNK_TOKEN {
            return Err(Error::invalid(format!("{} is not a vocabulary file", path.display())));
        }
        Ok(Self::from_tokens(tokens))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Article;
    use proptest::prelude::*;

    fn corpus_of(words: &[&str]) -> Corpus {
        Corpus::new(vec![Article {
            id: "1".into(),
            source: "s".into(),
            title: vec![],
            sentences: vec![words.iter().map(|w| w.to_string()).collect()],
            links: vec![],
            label: None,
        }])
        .unwrap()
    }

    #[test]
    fn min_count_filters() {
        let c = corpus_of(&["a", "a", "a", "a", "a", "b"]);
        let v = Vocabulary::build(&c, 2, None).unwrap();
        assert!(v.contains("a"));
        assert!(!v.contains("b"));
        assert_eq!(v.id("b"), UNK);
        let all = Vocabulary::build(&c, 1, None).unwrap();
        assert!(all.contains("b"));
    }

    #[test]
    fn ties_are_lexicographic() {
        let c = corpus_of(&["zeta", "alpha", "mid", "zeta", "alpha", "mid", "top", "top", "top"]);
        let v = Vocabulary::build(&c, 1, None).unwrap();
        assert_eq!(v.id("top"), 2);
        assert_eq!(v.id("alpha"), 3);
        assert_eq!(v.id("mid"), 4);
        assert_eq!(v.id("zeta"), 5);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(Vocabulary::build(&Corpus::default(), 1, None).is_err());
    }

    #[test]
    fn file_round_trip() {
        let v = Vocabulary::build(&corpus_of(&["x", "y", "y"]), 1, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        assert_eq!(Vocabulary::load(&p).unwrap(), v);
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(words in proptest::collection::vec("[a-e]{1,3}", 1..30), pick in proptest::collection::vec(0usize..30, 0..20)) {
            let refs: Vec<&str> = words.iter().map(String::as_str).collect();
            let v = Vocabulary::build(&corpus_of(&refs), 1, None).unwrap();
            let seq: Vec<String> = pick.iter().map(|&i| words[i % words.len()].clone()).collect();
            prop_assert_eq!(v.decode(&v.encode(&seq)), seq.clone());
            for id in v.encode(&seq) {
                prop_assert!(id < v.len());
            }
        }
    }
}

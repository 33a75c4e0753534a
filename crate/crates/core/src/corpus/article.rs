use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tokenize::{split_sentences, tokenize};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ideology {
    Left,
    Center,
    Right,
}

impl Ideology {
    pub const ALL: [Ideology; 3] = [Ideology::Left, Ideology::Center, Ideology::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Ideology> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Ideology::Left => "left",
            Ideology::Center => "center",
            Ideology::Right => "right",
        }
    }
}

impl fmt::Display for Ideology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ideology::Left => "Left",
            Ideology::Center => "Center",
            Ideology::Right => "Right",
        })
    }
}

impl FromStr for Ideology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(Ideology::Left),
            "center" | "centre" => Ok(Ideology::Center),
            "right" => Ok(Ideology::Right),
            other => Err(Error::invalid(format!("unknown ideology {other:?}"))),
        }
    }
}

/// One news document with its three views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub source: String,
    pub title: Vec<String>,
    pub sentences: Vec<Vec<String>>,
    pub links: Vec<String>,
    #[serde(default)]
    pub label: Option<Ideology>,
}

#[derive(Debug, Deserialize)]
struct RawArticle {
    id: String,
    source: String,
    title: String,
    body: String,
    #[serde(default)]
    links: Vec<String>,
    #[serde(default)]
    label: Option<Ideology>,
}

impl From<RawArticle> for Article {
    fn from(raw: RawArticle) -> Self {
        Article {
            id: raw.id,
            source: raw.source,
            title: tokenize(&raw.title),
            sentences: split_sentences(&raw.body).iter().map(|s| tokenize(s)).filter(|s| !s.is_empty()).collect(),
            links: raw.links,
            label: raw.label,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    articles: Vec<Article>,
    sources: BTreeSet<String>,
}

impl Corpus {
    /// Fails on duplicate article ids.
    pub fn new(articles: Vec<Article>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(articles.len());
        for a in &articles {
            if !seen.insert(a.id.as_str()) {
                return Err(Error::DuplicateId(a.id.clone()));
            }
        }
        let sources = articles.iter().map(|a| a.source.clone()).collect();
        Ok(Self { articles, sources })
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn into_articles(self) -> Vec<Article> {
        self.articles
    }

    pub fn sources(&self) -> &BTreeSet<String> {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    /// Per-label article counts in `Ideology::ALL` order, plus unlabeled.
    pub fn label_counts(&self) -> ([usize; 3], usize) {
        let mut counts = [0; 3];
        let mut unlabeled = 0;
        for a in &self.articles {
            match a.label {
                Some(l) => counts[l.index()] += 1,
                None => unlabeled += 1,
            }
        }
        (counts, unlabeled)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for a in &self.articles {
            out.push_str(&serde_json::to_string(a).expect("article serializes"));
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical JSONL serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.to_jsonl().as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

const REQUIRED: [&str; 5] = ["id", "source", "title", "sentences", "links"];
const REQUIRED_RAW: [&str; 4] = ["id", "source", "title", "body"];

fn parse_record(line: &str, lineno: usize, raw: bool) -> Result<Article> {
    let err = |message: String| Error::Parse { line: lineno, message };
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| err(format!("invalid JSON: {e}")))?;
    let obj = value.as_object().ok_or_else(|| err("record is not an object".into()))?;
    let required: &[&str] = if raw { &REQUIRED_RAW } else { &REQUIRED };
    for field in required {
        if !obj.contains_key(*field) {
            return Err(err(format!("missing field {field}")));
        }
    }
    if raw {
        let r: RawArticle = serde_json::from_value(value).map_err(|e| err(format!("invalid record: {e}")))?;
        Ok(r.into())
    } else {
        serde_json::from_value(value).map_err(|e| err(format!("invalid record: {e}")))
    }
}

/// Reads a JSONL corpus. With `raw`, records carry untokenized `title` and
/// `body` strings that go through the tokenizer.
pub fn parse_corpus(text: &str, raw: bool) -> Result<Corpus> {
    let mut articles = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        articles.push(parse_record(line, i + 1, raw)?);
    }
    Corpus::new(articles)
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    load_corpus_with(path, false)
}

pub fn load_corpus_with(path: &Path, raw: bool) -> Result<Corpus> {
    let reader = BufReader::new(File::open(path)?);
    let mut articles = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        articles.push(parse_record(&line, i + 1, raw)?);
    }
    Corpus::new(articles)
}

#[cfg(test)]
mod tests {
    use super::*;

    const REC: &str =
        r#"{"id":"a1","source":"x.com","title":["hi"],"sentences":[["a","b"]],"links":["y.com"],"label":"left"}"#;

    #[test]
    fn three_records() {
        let text =
            format!("{REC}\n{}\n{}\n", REC.replace("a1", "a2"), REC.replace("a1", "a3").replace("\"left\"", "null"));
        let c = parse_corpus(&text, false).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.articles()[2].label, None);
        assert_eq!(c.articles()[1].id, "a2");
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse_corpus("", false).unwrap().len(), 0);
    }

    #[test]
    fn missing_title_names_line() {
        let bad = r#"{"id":"a2","source":"x.com","sentences":[],"links":[],"label":null}"#;
        let err = parse_corpus(&format!("{REC}\n{bad}\n"), false).unwrap_err();
        assert_eq!(err.to_string(), "line 2: missing field title");
    }

    #[test]
    fn malformed_json_names_line() {
        let err = parse_corpus(&format!("{REC}\n{REC}\n{{nope\n"), false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn duplicate_id_rejected() {
        let err = parse_corpus(&format!("{REC}\n{REC}\n"), false).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(_)));
    }

    #[test]
    fn raw_records_are_tokenized() {
        let raw = r#"{"id":"r","source":"s.com","title":"Tax Reform, Now!","body":"First one. Second?\nYou can subscribe here","links":[],"label":"right"}"#;
        let c = parse_corpus(raw, true).unwrap();
        let a = &c.articles()[0];
        assert_eq!(a.title, vec!["tax", "reform", "now"]);
        assert_eq!(a.sentences.len(), 3);
        assert_eq!(a.sentences[2], vec!["you", "can", "subscribe", "here"]);
    }

    #[test]
    fn digest_is_stable_under_reserialization() {
        let c = parse_corpus(REC, false).unwrap();
        let again = parse_corpus(&c.to_jsonl(), false).unwrap();
        assert_eq!(c.digest(), again.digest());
    }
}

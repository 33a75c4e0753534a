//! Article corpora: JSONL ingestion, cleaning, tokenization, vocabularies,
//! stratified splits and synthetic generation.

mod article;
mod clean;
mod split;
mod synth;
mod tokenize;
mod vocab;

pub use article::{load_corpus, load_corpus_with, parse_corpus, Article, Corpus, Ideology};
pub use clean::{clean_article, clean_corpus, CleanConfig, SourceStats};
pub use split::split;
pub use synth::{synth_corpus, SynthSpec};
pub use tokenize::{normalize_domain, split_sentences, tokenize};
pub use vocab::{Vocabulary, PAD, UNK};

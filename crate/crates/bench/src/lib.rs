//! Shared fixtures for the benchmarks.

use mvdam::corpus::{clean_corpus, synth_corpus, CleanConfig, Corpus, SynthSpec};
use mvdam::model::{Profile, TrainingConfig};

/// Cleaned synthetic corpus of `n` articles.
pub fn corpus(n: usize) -> Corpus {
    let spec = SynthSpec { num_articles: n, ..SynthSpec::default() };
    clean_corpus(&synth_corpus(&spec).expect("default spec is valid"), &CleanConfig::default())
}

/// Desk profile with a short walk budget.
pub fn config() -> TrainingConfig {
    let mut c = TrainingConfig::profile(Profile::Desk);
    c.num_walks = 4;
    c.sgns_epochs = 1;
    c
}

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::baselines::{chance_baseline, label_distribution, lr_baseline, LrConfig};
use super::metrics::{eval_metrics, MetricsReport};
use crate::corpus::{split, Corpus, Ideology};
use crate::error::{Error, Result};
use crate::model::{fit, Model, Preset, TrainingConfig};
use crate::numerics::Rng;

/// One row of the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LadderEntry {
    Chance,
    Lr,
    Neural(Preset),
}

impl LadderEntry {
    pub const ALL: [LadderEntry; 8] = [
        LadderEntry::Chance,
        LadderEntry::Lr,
        LadderEntry::Neural(Preset::Cnn),
        LadderEntry::Neural(Preset::Fnn),
        LadderEntry::Neural(Preset::Hdam),
        LadderEntry::Neural(Preset::TitleNetwork),
        LadderEntry::Neural(Preset::TitleContent),
        LadderEntry::Neural(Preset::Full),
    ];

    pub fn name(self) -> &'static str {
        match self {
            LadderEntry::Chance => "Chance",
            LadderEntry::Lr => "LR",
            LadderEntry::Neural(p) => p.name(),
        }
    }
}

impl fmt::Display for LadderEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LadderEntry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chance" => Ok(LadderEntry::Chance),
            "lr" => Ok(LadderEntry::Lr),
            _ => s.parse().map(LadderEntry::Neural),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderOptions {
    pub fractions: (f64, f64, f64),
    pub entries: Vec<LadderEntry>,
    pub lr: LrConfig,
}

impl Default for LadderOptions {
    fn default() -> Self {
        Self { fractions: (0.75, 0.125, 0.125), entries: LadderEntry::ALL.to_vec(), lr: LrConfig::default() }
    }
}

/// Test-split result of one entry on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRun {
    pub entry: LadderEntry,
    pub seed: u64,
    /// Digest of the train/validation/test partition the run used.
    pub split_digest: String,
    pub metrics: MetricsReport,
    pub best_epoch: Option<usize>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub entries: Vec<LadderEntry>,
    pub seeds: Vec<u64>,
    pub runs: Vec<LadderRun>,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

impl LadderReport {
    /// Test macro-F1 per seed, in seed order.
    pub fn scores(&self, entry: LadderEntry) -> Vec<f64> {
        self.runs.iter().filter(|r| r.entry == entry).map(|r| r.metrics.macro_f1).collect()
    }

    pub fn median_f1(&self, entry: LadderEntry) -> f64 {
        median(&self.scores(entry))
    }

    /// Per-seed raw scores, one line per run.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,seed,macro_precision,macro_recall,macro_f1,accuracy\n");
        for r in &self.runs {
            let m = &r.metrics;
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.entry, r.seed, m.macro_precision, m.macro_recall, m.macro_f1, m.accuracy
            ));
        }
        s
    }

    /// Median test scores per entry, then one column per seed.
    pub fn to_table(&self) -> String {
        let width = self.entries.iter().map(|e| e.name().len()).max().unwrap_or(5).max(5);
        let mut s = format!("{:<width$}  {:>7}  {:>7}  {:>7}", "Model", "P", "R", "F1");
        for seed in &self.seeds {
            s.push_str(&format!("  {:>7}", format!("s{seed}")));
        }
        s.push('\n');
        for &e in &self.entries {
            let runs: Vec<&LadderRun> = self.runs.iter().filter(|r| r.entry == e).collect();
            let med = |f: fn(&MetricsReport) -> f64| median(&runs.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>());
            s.push_str(&format!(
                "{:<width$}  {:>7.4}  {:>7.4}  {:>7.4}",
                e.name(),
                med(|m| m.macro_precision),
                med(|m| m.macro_recall),
                med(|m| m.macro_f1)
            ));
            for r in &runs {
                s.push_str(&format!("  {:>7.4}", r.metrics.macro_f1));
            }
            s.push('\n');
        }
        s
    }
}

fn split_digest(parts: &(Corpus, Corpus, Corpus)) -> String {
    let mut h = Sha256::new();
    for c in [&parts.0, &parts.1, &parts.2] {
        h.update(c.digest().as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

fn gold_of(c: &Corpus) -> Result<Vec<Ideology>> {
    c.articles()
        .iter()
        .map(|a| a.label.ok_or_else(|| Error::invalid(format!("article {:?} has no label", a.id))))
        .collect()
}

/// What the progress hook sees after each run.
pub struct LadderStep<'a> {
    pub run: &'a LadderRun,
    /// The trained model of a neural entry.
    pub model: Option<&'a Model>,
    pub validation: &'a Corpus,
    pub test: &'a Corpus,
}

/// Trains and scores every entry on the same per-seed partition.
pub fn run_ladder(corpus: &Corpus, seeds: &[u64], base: &TrainingConfig, opts: &LadderOptions) -> Result<LadderReport> {
    run_ladder_with(corpus, seeds, base, opts, &mut |_| {})
}

/// As [`run_ladder`], calling `progress` after each finished run.
pub fn run_ladder_with(
    corpus: &Corpus,
    seeds: &[u64],
    base: &TrainingConfig,
    opts: &LadderOptions,
    progress: &mut dyn FnMut(&LadderStep),
) -> Result<LadderReport> {
    if seeds.is_empty() {
        return Err(Error::invalid("ladder needs at least one seed"));
    }
    if opts.entries.is_empty() {
        return Err(Error::invalid("ladder needs at least one entry"));
    }
    let mut runs = Vec::new();
    for &seed in seeds {
        let parts = split(corpus, opts.fractions, seed)?;
        let digest = split_digest(&parts);
        let (train, val, test) = &parts;
        let gold = gold_of(test)?;
        for &entry in &opts.entries {
            let start = Instant::now();
            let mut model = None;
            let (metrics, best_epoch) = match entry {
                LadderEntry::Chance => {
                    let mut rng = Rng::stream(seed, 7);
                    let pred = chance_baseline(label_distribution(train.articles()), gold.len(), &mut rng)?;
                    (eval_metrics(&pred, &gold)?, None)
                }
                LadderEntry::Lr => (lr_baseline(train.articles(), test.articles(), &opts.lr)?, None),
                LadderEntry::Neural(preset) => {
                    let mut cfg = preset.apply(base);
                    cfg.seed = seed;
                    let (m, log) = fit(train, val, cfg)?;
                    let pred: Vec<Ideology> = m.predict_all(test.articles())?.iter().map(|p| p.predicted).collect();
                    model = Some(m);
                    (eval_metrics(&pred, &gold)?, log.best_epoch)
                }
            };
            let run = LadderRun {
                entry,
                seed,
                split_digest: digest.clone(),
                metrics,
                best_epoch,
                seconds: start.elapsed().as_secs_f64(),
            };
            progress(&LadderStep { run: &run, model: model.as_ref(), validation: val, test });
            runs.push(run);
        }
    }
    Ok(LadderReport { entries: opts.entries.clone(), seeds: seeds.to_vec(), runs })
}

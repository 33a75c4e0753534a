use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoders::{AttentionKind, EncoderConfig};
use crate::error::{Error, Result};
use crate::graphembed::{SkipGramConfig, WalkConfig};
use crate::numerics::AdaDelta;

/// Which views feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewMask {
    pub title: bool,
    pub network: bool,
    pub content: bool,
}

impl ViewMask {
    pub const ALL: ViewMask = ViewMask { title: true, network: true, content: true };

    pub fn count(&self) -> usize {
        [self.title, self.network, self.content].iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }
}

impl FromStr for ViewMask {
    type Err = Error;

    /// Comma-separated subset of `title`, `network`, `content`.
    fn from_str(s: &str) -> Result<Self> {
        let mut m = ViewMask { title: false, network: false, content: false };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "title" => m.title = true,
                "network" => m.network = true,
                "content" => m.content = true,
                other => return Err(Error::invalid(format!("unknown view {other:?}"))),
            }
        }
        if m.is_empty() {
            return Err(Error::invalid("view mask is empty"));
        }
        Ok(m)
    }
}

impl fmt::Display for ViewMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(self.title, "title"), (self.network, "network"), (self.content, "content")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect();
        f.write_str(&names.join(","))
    }
}

/// `Variational` fuses all views into a Gaussian latent; `Direct` feeds the
/// concatenated view vectors straight into the discriminator (baselines).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Variational,
    Direct,
}

/// How stochastic units are read during training. Evaluation always uses the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentMode {
    Sample,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Desk,
    Paper,
}

/// Named model flavors of the comparison ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    Cnn,
    Fnn,
    Hdam,
    TitleNetwork,
    TitleContent,
    Full,
}

impl Preset {
    pub const ALL: [Preset; 6] =
        [Preset::Cnn, Preset::Fnn, Preset::Hdam, Preset::TitleNetwork, Preset::TitleContent, Preset::Full];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Cnn => "CNN",
            Preset::Fnn => "FNN",
            Preset::Hdam => "HDAM",
            Preset::TitleNetwork => "MVDAM(T+N)",
            Preset::TitleContent => "MVDAM(T+C)",
            Preset::Full => "MVDAM",
        }
    }

    pub fn is_single_view(self) -> bool {
        matches!(self, Preset::Cnn | Preset::Fnn | Preset::Hdam)
    }

    /// Rewrites the view mask, architecture and attention of `base`.
    pub fn apply(self, base: &TrainingConfig) -> TrainingConfig {
        let mut c = base.clone();
        let (views, arch) = match self {
            Preset::Cnn => ("title", Architecture::Direct),
            Preset::Fnn => ("network", Architecture::Direct),
            Preset::Hdam => ("content", Architecture::Direct),
            Preset::TitleNetwork => ("title,network", Architecture::Variational),
            Preset::TitleContent => ("title,content", Architecture::Variational),
            Preset::Full => ("title,network,content", Architecture::Variational),
        };
        c.views = views.parse().expect("preset views");
        c.architecture = arch;
        if self == Preset::Hdam {
            c.attention = AttentionKind::TanhContext;
            c.train_latent = LatentMode::Mean;
        }
        c
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['(', ')', '+', '_', '-'], "");
        Ok(match key.as_str() {
            "cnn" => Preset::Cnn,
            "fnn" => Preset::Fnn,
            "hdam" => Preset::Hdam,
            "mvdamtn" => Preset::TitleNetwork,
            "mvdamtc" => Preset::TitleContent,
            "mvdam" | "full" => Preset::Full,
            _ => return Err(Error::invalid(format!("unknown preset {s:?}"))),
        })
    }
}

/// Everything needed to build and train a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub dim: usize,
    pub emb_dim: usize,
    pub max_vocab: usize,
    pub min_count: usize,
    pub windows: Vec<usize>,
    pub feature_maps: usize,
    pub dropout: f64,
    pub attention: AttentionKind,
    pub max_sentences: usize,
    pub max_words: usize,

    pub architecture: Architecture,
    pub views: ViewMask,
    pub train_latent: LatentMode,
    /// KL weight.
    pub lambda: f64,
    /// The KL weight ramps linearly from 0 over this many steps.
    pub warmup_steps: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub rho: f64,
    pub eps: f64,
    pub lr: f64,

    pub num_walks: usize,
    pub walk_len: usize,
    pub p: f64,
    pub q: f64,
    pub walk_window: usize,
    pub negatives: usize,
    pub sgns_epochs: usize,
    pub sgns_lr: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self::profile(Profile::Desk)
    }
}

impl TrainingConfig {
    pub fn profile(profile: Profile) -> Self {
        let (dim, feature_maps, max_vocab) = match profile {
            Profile::Desk => (32, 32, 5000),
            Profile::Paper => (128, 100, 50000),
        };
        Self {
            dim,
            emb_dim: dim,
            max_vocab,
            min_count: 2,
            windows: vec![3, 4, 5],
            feature_maps,
            dropout: 0.5,
            attention: AttentionKind::Linear,
            max_sentences: 30,
            max_words: 50,
            architecture: Architecture::Variational,
            views: ViewMask::ALL,
            train_latent: LatentMode::Sample,
            lambda: 1e-3,
            warmup_steps: 500,
            batch_size: 32,
            epochs: 20,
            patience: 5,
            seed: 1,
            rho: 0.95,
            eps: 1e-6,
            lr: 1.0,
            num_walks: 10,
            walk_len: 20,
            p: 1.0,
            q: 1.0,
            walk_window: 5,
            negatives: 5,
            sgns_epochs: 5,
            sgns_lr: 0.025,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder(2).validate()?;
        if self.views.is_empty() {
            return Err(Error::invalid("view mask is empty"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda {} must be >= 0", self.lambda)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) || self.eps <= 0.0 || self.lr <= 0.0 {
            return Err(Error::invalid("adadelta needs 0 < rho < 1, eps > 0 and lr > 0"));
        }
        if self.num_walks == 0 || self.walk_len == 0 || self.walk_window == 0 || self.p <= 0.0 || self.q <= 0.0 {
            return Err(Error::invalid("walk settings must be positive"));
        }
        Ok(())
    }

    pub fn encoder(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            vocab_size,
            emb_dim: self.emb_dim,
            dim: self.dim,
            windows: self.windows.clone(),
            feature_maps: self.feature_maps,
            dropout: self.dropout,
            attention: self.attention,
            max_sentences: self.max_sentences,
            max_words: self.max_words,
        }
    }

    pub fn optimizer(&self) -> AdaDelta {
        AdaDelta { rho: self.rho, eps: self.eps, lr: self.lr }
    }

    pub fn walks(&self) -> WalkConfig {
        WalkConfig { num_walks: self.num_walks, walk_len: self.walk_len, p: self.p, q: self.q }
    }

    pub fn skipgram(&self) -> SkipGramConfig {
        SkipGramConfig {
            dim: self.dim,
            window: self.walk_window,
            negatives: self.negatives,
            epochs: self.sgns_epochs,
            lr0: self.sgns_lr,
        }
    }

    /// KL weight after `step` optimizer steps.
    pub fn kl_weight(&self, step: usize) -> f64 {
        if self.warmup_steps == 0 {
            self.lambda
        } else {
            self.lambda * ((step + 1) as f64 / self.warmup_steps as f64).min(1.0)
        }
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::invalid(format!("{key}: cannot parse {v:?}")))
        }
        match key {
            "profile" => {
                let views = self.views;
                let seed = self.seed;
                *self = Self::profile(match value {
                    "desk" => Profile::Desk,
                    "paper" => Profile::Paper,
                    _ => return Err(Error::invalid(format!("unknown profile {value:?}"))),
                });
                self.views = views;
                self.seed = seed;
            }
            "dim" => self.dim = num(key, value)?,
            "emb_dim" => self.emb_dim = num(key, value)?,
            "max_vocab" => self.max_vocab = num(key, value)?,
            "min_count" => self.min_count = num(key, value)?,
            "windows" => {
                self.windows = value.split(',').map(|w| num(key, w.trim())).collect::<Result<_>>()?;
            }
            "feature_maps" => self.feature_maps = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "attention" => {
                self.attention = match value {
                    "linear" => AttentionKind::Linear,
                    "tanh_context" => AttentionKind::TanhContext,
                    _ => return Err(Error::invalid(format!("unknown attention {value:?}"))),
                }
            }
            "max_sentences" => self.max_sentences = num(key, value)?,
            "max_words" => self.max_words = num(key, value)?,
            "architecture" => {
                self.architecture = match value {
                    "variational" => Architecture::Variational,
                    "direct" => Architecture::Direct,
                    _ => return Err(Error::invalid(format!("unknown architecture {value:?}"))),
                }
            }
            "views" => self.views = value.parse()?,
            "train_latent" => {
                self.train_latent = match value {
                    "sample" => LatentMode::Sample,
                    "mean" => LatentMode::Mean,
                    _ => return Err(Error::invalid(format!("unknown latent mode {value:?}"))),
                }
            }
            "lambda" => self.lambda = num(key, value)?,
            "warmup_steps" => self.warmup_steps = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "rho" => self.rho = num(key, value)?,
            "eps" => self.eps = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "num_walks" => self.num_walks = num(key, value)?,
            "walk_len" => self.walk_len = num(key, value)?,
            "p" => self.p = num(key, value)?,
            "q" => self.q = num(key, value)?,
            "walk_window" => self.walk_window = num(key, value)?,
            "negatives" => self.negatives = num(key, value)?,
            "sgns_epochs" => self.sgns_epochs = num(key, value)?,
            "sgns_lr" => self.sgns_lr = num(key, value)?,
            _ => return Err(Error::invalid(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected key = value, got {line:?}") })?;
            self.set(k.trim(), v.trim()).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    /// Every field as `key = value`; reading it back gives an equal config.
    pub fn to_text(&self) -> String {
        let windows: Vec<String> = self.windows.iter().map(usize::to_string).collect();
        let attention = match self.attention {
            AttentionKind::Linear => "linear",
            AttentionKind::TanhContext => "tanh_context",
        };
        let architecture = match self.architecture {
            Architecture::Variational => "variational",
            Architecture::Direct => "direct",
        };
        let latent = match self.train_latent {
            LatentMode::Sample => "sample",
            LatentMode::Mean => "mean",
        };
        let pairs: Vec<(&str, String)> = vec![
            ("dim", self.dim.to_string()),
            ("emb_dim", self.emb_dim.to_string()),
            ("max_vocab", self.max_vocab.to_string()),
            ("min_count", self.min_count.to_string()),
            ("windows", windows.join(",")),
            ("feature_maps", self.feature_maps.to_string()),
            ("dropout", self.dropout.to_string()),
            ("attention", attention.into()),
            ("max_sentences", self.max_sentences.to_string()),
            ("max_words", self.max_words.to_string()),
            ("architecture", architecture.into()),
            ("views", self.views.to_string()),
            ("train_latent", latent.into()),
            ("lambda", self.lambda.to_string()),
            ("warmup_steps", self.warmup_steps.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("seed", self.seed.to_string()),
            ("rho", self.rho.to_string()),
            ("eps", self.eps.to_string()),
            ("lr", self.lr.to_string()),
            ("num_walks", self.num_walks.to_string()),
            ("walk_len", self.walk_len.to_string()),
            ("p", self.p.to_string()),
            ("q", self.q.to_string()),
            ("walk_window", self.walk_window.to_string()),
            ("negatives", self.negatives.to_string()),
            ("sgns_epochs", self.sgns_epochs.to_string()),
            ("sgns_lr", self.sgns_lr.to_string()),
        ];
        pairs.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::MetricsReport;
use crate::error::Result;

/// Record of one run: what went in and what came out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Training configuration in its text form.
    pub config: String,
    pub seeds: Vec<u64>,
    pub corpus_digest: String,
    pub checkpoint: Option<String>,
    pub metrics: Option<MetricsReport>,
    pub wall_clock_secs: f64,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// SHA-256 of the compact JSON form.
    pub fn digest(&self) -> String {
        let compact = serde_json::to_string(self).expect("manifest serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }

    /// Digest of the inputs only (command, config, seeds, corpus), so runs
    /// that differ just in timing or outcome compare equal.
    pub fn input_digest(&self) -> String {
        let key = serde_json::to_string(&(&self.command, &self.config, &self.seeds, &self.corpus_digest))
            .expect("manifest serializes");
        hex::encode(Sha256::digest(key.as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Ideology;
    use crate::eval::eval_metrics;
    use proptest::prelude::*;

    fn manifest(secs: f64, seeds: Vec<u64>) -> RunManifest {
        let gold = [Ideology::Left, Ideology::Right, Ideology::Center];
        RunManifest {
            command: "train".into(),
            config: "dim = 32\n".into(),
            seeds,
            corpus_digest: "ab".repeat(32),
            checkpoint: Some("model.ckpt".into()),
            metrics: Some(eval_metrics(&[Ideology::Left, Ideology::Left, Ideology::Center], &gold).unwrap()),
            wall_clock_secs: secs,
        }
    }

    #[test]
    fn input_digest_ignores_outcome() {
        let a = manifest(1.0, vec![1]);
        let mut b = manifest(2.5, vec![1]);
        b.metrics = None;
        assert_eq!(a.input_digest(), b.input_digest());
        assert_ne!(a.digest(), b.digest());
        assert_ne!(a.input_digest(), manifest(1.0, vec![2]).input_digest());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        let m = manifest(0.125, vec![1, 2]);
        m.save(&path).unwrap();
        assert_eq!(RunManifest::load(&path).unwrap().digest(), m.digest());
    }

    proptest! {
        #[test]
        fn digest_survives_reserialization(secs in 0.0..1e4f64, seeds in prop::collection::vec(any::<u64>(), 0..6)) {
            let m = manifest(secs, seeds);
            let again = RunManifest::from_json(&m.to_json()).unwrap();
            prop_assert_eq!(again.digest(), m.digest());
            let twice = RunManifest::from_json(&again.to_json()).unwrap();
            prop_assert_eq!(twice.to_json(), m.to_json());
        }
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Ideology;
use crate::error::{Error, Result};
use crate::model::{PredictionRecord, NUM_CLASSES};

/// Mean calibrated class scores of each source's articles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceProportions {
    pub sources: BTreeMap<String, SourceEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub proportions: [f64; NUM_CLASSES],
    pub articles: usize,
}

pub fn source_proportions(records: &[PredictionRecord]) -> Result<SourceProportions> {
    if records.is_empty() {
        return Err(Error::invalid("no predictions to aggregate"));
    }
    let mut sums: BTreeMap<String, ([f64; NUM_CLASSES], usize)> = BTreeMap::new();
    for r in records {
        let cal =
            r.calibrated.ok_or_else(|| Error::invalid(format!("prediction {:?} is not calibrated", r.article_id)))?;
        let e = sums.entry(r.source.clone()).or_insert(([0.0; NUM_CLASSES], 0));
        for c in 0..NUM_CLASSES {
            e.0[c] += cal[c];
        }
        e.1 += 1;
    }
    let sources = sums
        .into_iter()
        .map(|(s, (sum, n))| (s, SourceEntry { proportions: sum.map(|v| v / n as f64), articles: n }))
        .collect();
    Ok(SourceProportions { sources })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub source: String,
    pub proportion: f64,
    pub articles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub ideology: Ideology,
    pub entries: Vec<RankEntry>,
    /// Set when fewer sources exist than were asked for.
    pub short: bool,
}

/// Sources by descending proportion of `ideology`, ties broken by name.
pub fn rank_sources(props: &SourceProportions, ideology: Ideology, k: usize) -> Result<Ranking> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let c = ideology.index();
    let mut all: Vec<(&String, &SourceEntry)> = props.sources.iter().collect();
    all.sort_by(|a, b| b.1.proportions[c].total_cmp(&a.1.proportions[c]).then_with(|| a.0.cmp(b.0)));
    let short = k > all.len();
    let entries = all
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (s, e))| RankEntry {
            rank: i + 1,
            source: s.clone(),
            proportion: e.proportions[c],
            articles: e.articles,
        })
        .collect();
    Ok(Ranking { ideology, entries, short })
}

impl Ranking {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rank,source,proportion,article_count\n");
        for e in &self.entries {
            s.push_str(&format!("{},{},{},{}\n", e.rank, e.source, e.proportion, e.articles));
        }
        s
    }

    /// Fixed-width table: rank, source, proportion, article count.
    pub fn to_table(&self) -> String {
        let width = self.entries.iter().map(|e| e.source.len()).max().unwrap_or(0).max("Source".len());
        let mut s = format!("Top {} {}-aligned sources\n", self.entries.len(), self.ideology);
        s.push_str(&format!("{:>4}  {:<width$}  {:>10}  {:>8}\n", "Rank", "Source", "Proportion", "Articles"));
        for e in &self.entries {
            s.push_str(&format!("{:>4}  {:<width$}  {:>10.4}  {:>8}\n", e.rank, e.source, e.proportion, e.articles));
        }
        if self.short {
            s.push_str("(fewer sources than requested)\n");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LatentMode;
    use proptest::prelude::*;

    fn record(id: &str, source: &str, cal: [f64; 3]) -> PredictionRecord {
        PredictionRecord {
            article_id: id.into(),
            source: source.into(),
            gold: None,
            distribution: cal,
            predicted: Ideology::Left,
            latent: LatentMode::Mean,
            attention: None,
            calibrated: Some(cal),
        }
    }

    fn props(pairs: &[(&str, f64)]) -> SourceProportions {
        let recs: Vec<_> = pairs.iter().map(|(s, p)| record(s, s, [*p, (1.0 - p) / 2.0, (1.0 - p) / 2.0])).collect();
        source_proportions(&recs).unwrap()
    }

    #[test]
    fn mean_over_articles() {
        let p = source_proportions(&[record("a", "x", [0.2, 0.5, 0.3]), record("b", "x", [0.4, 0.3, 0.3])]).unwrap();
        let e = p.sources["x"];
        assert!((e.proportions[0] - 0.3).abs() < 1e-15);
        assert_eq!(e.articles, 2);
    }

    #[test]
    fn single_article_is_its_vector() {
        let p = source_proportions(&[record("a", "x", [0.1, 0.2, 0.7])]).unwrap();
        assert_eq!(p.sources["x"].proportions, [0.1, 0.2, 0.7]);
    }

    #[test]
    fn errors() {
        assert!(source_proportions(&[]).is_err());
        let mut r = record("a", "x", [0.1, 0.2, 0.7]);
        r.calibrated = None;
        assert!(source_proportions(&[r]).is_err());
        assert!(rank_sources(&props(&[("a", 0.5)]), Ideology::Left, 0).is_err());
    }

    #[test]
    fn top_one() {
        let r = rank_sources(&props(&[("a", 0.9), ("b", 0.1)]), Ideology::Left, 1).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.entries[0].source, "a");
        assert!(!r.short);
    }

    #[test]
    fn ties_and_short_lists() {
        let r = rank_sources(&props(&[("b", 0.5), ("a", 0.5), ("c", 0.7)]), Ideology::Left, 5).unwrap();
        let names: Vec<&str> = r.entries.iter().map(|e| e.source.as_str()).collect();
        assert_eq!(names, ["c", "a", "b"]);
        assert!(r.short);
        assert!(r.to_table().contains("fewer sources"));
        assert!(r.to_csv().starts_with("rank,source,proportion,article_count\n1,c,0.7,1\n"));
    }

    proptest! {
        #[test]
        fn order_free_aggregation(cals in prop::collection::vec((0usize..4, 0.0..1.0f64), 1..30), seed in 0u64..1000) {
            let recs: Vec<_> = cals.iter().enumerate()
                .map(|(i, (s, p))| record(&i.to_string(), &format!("s{s}"), [*p, 1.0 - p, 0.0]))
                .collect();
            let mut shuffled = recs.clone();
            crate::numerics::Rng::new(seed).shuffle(&mut shuffled);
            let a = source_proportions(&recs).unwrap();
            let b = source_proportions(&shuffled).unwrap();
            for (k, e) in &a.sources {
                for c in 0..3 {
                    prop_assert!((e.proportions[c] - b.sources[k].proportions[c]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn ranking_ignores_positive_affine_maps(vals in prop::collection::vec(0.0..1.0f64, 1..12),
                                                scale in 0.1..10.0f64, shift in -5.0..5.0f64) {
            let names: Vec<String> = (0..vals.len()).map(|i| format!("s{i:02}")).collect();
            let mk = |f: &dyn Fn(f64) -> f64| SourceProportions {
                sources: names.iter().zip(&vals)
                    .map(|(n, v)| (n.clone(), SourceEntry { proportions: [f(*v), 0.0, 0.0], articles: 1 }))
                    .collect(),
            };
            let k = vals.len();
            let a = rank_sources(&mk(&|v| v), Ideology::Left, k).unwrap();
            let b = rank_sources(&mk(&|v| scale * v + shift), Ideology::Left, k).unwrap();
            let order = |r: &Ranking| r.entries.iter().map(|e| e.source.clone()).collect::<Vec<_>>();
            prop_assert_eq!(order(&a), order(&b));
        }
    }
}

use std::collections::HashMap;

use super::metrics::{eval_metrics, MetricsReport};
use crate::corpus::{Article, Ideology};
use crate::error::{Error, Result};
use crate::numerics::{softmax_in_place, Rng};

/// Independent draws from a label distribution.
pub fn chance_baseline(distribution: [f64; 3], n: usize, rng: &mut Rng) -> Result<Vec<Ideology>> {
    if distribution.iter().any(|p| !p.is_finite() || *p < 0.0) || distribution.iter().sum::<f64>() <= 0.0 {
        return Err(Error::invalid(format!("degenerate label distribution {distribution:?}")));
    }
    Ok((0..n).map(|_| Ideology::from_index(rng.weighted(&distribution)).expect("three weights")).collect())
}

/// Label frequencies of labeled articles.
pub fn label_distribution(articles: &[Article]) -> [f64; 3] {
    let mut counts = [0.0; 3];
    for l in articles.iter().filter_map(|a| a.label) {
        counts[l.index()] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    if total > 0.0 {
        counts.map(|c| c / total)
    } else {
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrConfig {
    pub l2: f64,
    /// Stop once the objective changes by less than this between iterations.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for LrConfig {
    fn default() -> Self {
        Self { l2: 1e-4, tolerance: 1e-6, max_iter: 10_000 }
    }
}

/// Multinomial logistic regression on title word counts.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    index: HashMap<String, usize>,
    /// `features x 3`, row-major.
    weights: Vec<f64>,
    bias: [f64; 3],
    pub iterations: usize,
}

type Sparse = Vec<(usize, f64)>;

fn title_counts(index: &HashMap<String, usize>, a: &Article) -> Sparse {
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for t in &a.title {
        if let Some(&i) = index.get(t) {
            *counts.entry(i).or_default() += 1.0;
        }
    }
    let mut v: Sparse = counts.into_iter().collect();
    v.sort_unstable_by_key(|&(i, _)| i);
    v
}

impl LogisticRegression {
    /// Full-batch gradient descent with backtracking line search on mean
    /// cross-entropy plus `l2 / 2 * |W|^2` (the bias is not penalized).
    pub fn fit(train: &[Article], cfg: &LrConfig) -> Result<Self> {
        let labeled: Vec<&Article> = train.iter().filter(|a| a.label.is_some()).collect();
        if labeled.is_empty() {
            return Err(Error::invalid("no labeled training articles"));
        }
        let mut words: Vec<&str> = labeled.iter().flat_map(|a| a.title.iter().map(String::as_str)).collect();
        words.sort_unstable();
        words.dedup();
        if words.is_empty() {
            return Err(Error::invalid("title vocabulary is empty"));
        }
        let index: HashMap<String, usize> = words.iter().enumerate().map(|(i, w)| (w.to_string(), i)).collect();
        let xs: Vec<Sparse> = labeled.iter().map(|a| title_counts(&index, a)).collect();
        let ys: Vec<usize> = labeled.iter().map(|a| a.label.expect("filtered").index()).collect();
        let mut m = Self { index, weights: vec![0.0; words.len() * 3], bias: [0.0; 3], iterations: 0 };

        let mut step = 1.0;
        let (mut loss, mut gw, mut gb) = m.objective(&xs, &ys, cfg.l2, true);
        for it in 0..cfg.max_iter {
            m.iterations = it + 1;
            let norm2: f64 = gw.iter().chain(&gb).map(|g| g * g).sum();
            if norm2 == 0.0 {
                break;
            }
            let (w0, b0) = (m.weights.clone(), m.bias);
            let accepted = loop {
                for (w, (w_old, g)) in m.weights.iter_mut().zip(w0.iter().zip(&gw)) {
                    *w = w_old - step * g;
                }
                for c in 0..3 {
                    m.bias[c] = b0[c] - step * gb[c];
                }
                let (trial, _, _) = m.objective(&xs, &ys, cfg.l2, false);
                if trial <= loss - 0.5 * step * norm2 {
                    break Some(trial);
                }
                step *= 0.5;
                if step < 1e-12 {
                    break None;
                }
            };
            let Some(new_loss) = accepted else {
                m.weights = w0;
                m.bias = b0;
                break;
            };
            let change = loss - new_loss;
            (loss, gw, gb) = m.objective(&xs, &ys, cfg.l2, true);
            step *= 2.0;
            if change < cfg.tolerance {
                break;
            }
        }
        Ok(m)
    }

    fn logits(&self, x: &Sparse) -> [f64; 3] {
        let mut z = self.bias;
        for &(i, v) in x {
            for c in 0..3 {
                z[c] += v * self.weights[i * 3 + c];
            }
        }
        z
    }

    fn objective(&self, xs: &[Sparse], ys: &[usize], l2: f64, with_grad: bool) -> (f64, Vec<f64>, [f64; 3]) {
        let n = xs.len() as f64;
        let mut loss = 0.0;
        let mut gw = if with_grad { vec![0.0; self.weights.len()] } else { Vec::new() };
        let mut gb = [0.0; 3];
        for (x, &y) in xs.iter().zip(ys) {
            let mut p = self.logits(x);
            softmax_in_place(&mut p);
            loss -= p[y].max(1e-300).ln();
            if with_grad {
                for c in 0..3 {
                    let d = (p[c] - if c == y { 1.0 } else { 0.0 }) / n;
                    gb[c] += d;
                    for &(i, v) in x {
                        gw[i * 3 + c] += d * v;
                    }
                }
            }
        }
        loss /= n;
        loss += 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        if with_grad {
            for (g, w) in gw.iter_mut().zip(&self.weights) {
                *g += l2 * w;
            }
        }
        (loss, gw, gb)
    }

    pub fn predict_proba(&self, a: &Article) -> [f64; 3] {
        let mut p = self.logits(&title_counts(&self.index, a));
        softmax_in_place(&mut p);
        p
    }

    pub fn predict(&self, a: &Article) -> Ideology {
        let p = self.predict_proba(a);
        Ideology::from_index(crate::model::argmax(&p)).expect("three classes")
    }
}

/// Fits on `train` titles and scores the labeled `test` articles.
pub fn lr_baseline(train: &[Article], test: &[Article], cfg: &LrConfig) -> Result<MetricsReport> {
    let m = LogisticRegression::fit(train, cfg)?;
    let labeled: Vec<&Article> = test.iter().filter(|a| a.label.is_some()).collect();
    let predicted: Vec<Ideology> = labeled.iter().map(|a| m.predict(a)).collect();
    let gold: Vec<Ideology> = labeled.iter().map(|a| a.label.expect("filtered")).collect();
    eval_metrics(&predicted, &gold)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn article(i: usize, title: &[&str], label: Ideology) -> Article {
        Article {
            id: format!("a{i}"),
            source: "s.news".into(),
            title: title.iter().map(|s| s.to_string()).collect(),
            sentences: vec![vec!["x".into()]],
            links: vec![],
            label: Some(label),
        }
    }

    fn separable(n: usize, rng: &mut Rng) -> Vec<Article> {
        let lex = [["l1", "l2", "l3"], ["c1", "c2", "c3"], ["r1", "r2", "r3"]];
        (0..n)
            .map(|i| {
                let label = Ideology::ALL[i % 3];
                let words: Vec<&str> = (0..3).map(|_| lex[label.index()][rng.below(3)]).collect();
                article(i, &words, label)
            })
            .collect()
    }

    #[test]
    fn point_mass_is_constant() {
        let draws = chance_baseline([0.0, 1.0, 0.0], 50, &mut Rng::new(1)).unwrap();
        assert!(draws.iter().all(|&l| l == Ideology::Center));
    }

    #[test]
    fn uniform_frequencies() {
        let draws = chance_baseline([1.0 / 3.0; 3], 10_000, &mut Rng::new(2)).unwrap();
        for l in Ideology::ALL {
            let f = draws.iter().filter(|&&d| d == l).count() as f64 / 1e4;
            // binomial sd is about 0.0047
            assert!((f - 1.0 / 3.0).abs() < 0.02, "{l}: {f}");
        }
    }

    #[test]
    fn chance_is_seeded() {
        let a = chance_baseline([0.2, 0.3, 0.5], 100, &mut Rng::new(3)).unwrap();
        let b = chance_baseline([0.2, 0.3, 0.5], 100, &mut Rng::new(3)).unwrap();
        assert_eq!(a, b);
        assert!(chance_baseline([0.0; 3], 1, &mut Rng::new(3)).is_err());
    }

    #[test]
    fn chance_macro_f1_near_a_third() {
        let mut rng = Rng::new(4);
        let gold: Vec<Ideology> = (0..1000).map(|i| Ideology::ALL[i % 3]).collect();
        let pred = chance_baseline([1.0 / 3.0; 3], 1000, &mut rng).unwrap();
        let f1 = eval_metrics(&pred, &gold).unwrap().macro_f1;
        assert!((f1 - 1.0 / 3.0).abs() < 0.04, "{f1}");
    }

    #[test]
    fn separable_titles_are_learned() {
        let mut rng = Rng::new(5);
        let train = separable(300, &mut rng);
        let test = separable(90, &mut rng);
        let r = lr_baseline(&train, &test, &LrConfig::default()).unwrap();
        assert_eq!(r.macro_f1, 1.0);
    }

    #[test]
    fn shuffled_labels_give_chance() {
        let mut rng = Rng::new(6);
        let mut train = separable(600, &mut rng);
        let mut test = separable(600, &mut rng);
        for part in [&mut train, &mut test] {
            let mut labels: Vec<_> = part.iter().map(|a| a.label).collect();
            rng.shuffle(&mut labels);
            for (a, l) in part.iter_mut().zip(labels) {
                a.label = l;
            }
        }
        let r = lr_baseline(&train, &test, &LrConfig::default()).unwrap();
        assert!((r.macro_f1 - 1.0 / 3.0).abs() < 0.07, "{}", r.macro_f1);
    }

    #[test]
    fn empty_vocabulary() {
        let train = vec![article(0, &[], Ideology::Left)];
        assert!(LogisticRegression::fit(&train, &LrConfig::default()).is_err());
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let mut rng = Rng::new(7);
        let train = separable(30, &mut rng);
        let mut m = LogisticRegression::fit(&train, &LrConfig { max_iter: 3, ..Default::default() }).unwrap();
        let xs: Vec<Sparse> = train.iter().map(|a| title_counts(&m.index, a)).collect();
        let ys: Vec<usize> = train.iter().map(|a| a.label.unwrap().index()).collect();
        let (_, gw, _) = m.objective(&xs, &ys, 0.1, true);
        let h = 1e-6;
        for k in [0, 4, 11] {
            let w = m.weights[k];
            m.weights[k] = w + h;
            let up = m.objective(&xs, &ys, 0.1, false).0;
            m.weights[k] = w - h;
            let down = m.objective(&xs, &ys, 0.1, false).0;
            m.weights[k] = w;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - gw[k]).abs() < 1e-7, "{k}: {fd} vs {}", gw[k]);
        }
    }
}

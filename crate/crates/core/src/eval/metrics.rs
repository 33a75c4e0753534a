use serde::{Deserialize, Serialize};

use crate::corpus::Ideology;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Per-class and macro-averaged scores. `confusion[gold][predicted]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: [ClassMetrics; 3],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub confusion: [[usize; 3]; 3],
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    pub fn from_confusion(confusion: [[usize; 3]; 3]) -> Self {
        let mut per_class = [ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.0, support: 0 }; 3];
        let mut correct = 0;
        let mut total = 0;
        for c in 0..3 {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = (0..3).map(|g| confusion[g][c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            per_class[c] = ClassMetrics { precision, recall, f1, support };
            correct += tp;
            total += support;
        }
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / 3.0;
        Self {
            macro_precision: mean(|m| m.precision),
            macro_recall: mean(|m| m.recall),
            macro_f1: mean(|m| m.f1),
            accuracy: ratio(correct, total),
            per_class,
            confusion,
        }
    }

    /// `class,precision,recall,f1,support` rows plus a `macro` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,precision,recall,f1,support\n");
        for (l, m) in Ideology::ALL.iter().zip(&self.per_class) {
            s.push_str(&format!("{},{},{},{},{}\n", l.as_str(), m.precision, m.recall, m.f1, m.support));
        }
        let n: usize = self.per_class.iter().map(|m| m.support).sum();
        s.push_str(&format!("macro,{},{},{},{}\n", self.macro_precision, self.macro_recall, self.macro_f1, n));
        s
    }
}

/// Scores predicted labels against gold labels. Undefined ratios count as 0.
pub fn eval_metrics(predicted: &[Ideology], gold: &[Ideology]) -> Result<MetricsReport> {
    if predicted.len() != gold.len() {
        return Err(Error::invalid(format!("{} predictions for {} gold labels", predicted.len(), gold.len())));
    }
    if gold.is_empty() {
        return Err(Error::invalid("no labels to score"));
    }
    let mut confusion = [[0usize; 3]; 3];
    for (p, g) in predicted.iter().zip(gold) {
        confusion[g.index()][p.index()] += 1;
    }
    Ok(MetricsReport::from_confusion(confusion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Ideology::*;

    #[test]
    fn perfect_predictions() {
        let gold = [Left, Center, Right, Left];
        let r = eval_metrics(&gold, &gold).unwrap();
        assert_eq!((r.macro_precision, r.macro_recall, r.macro_f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn all_left_on_balanced_gold() {
        let gold = [Left, Left, Left, Center, Center, Center, Right, Right, Right];
        let r = eval_metrics(&[Left; 9], &gold).unwrap();
        // left: p = 1/3, r = 1, f1 = 0.5; the others score 0
        assert!((r.per_class[0].f1 - 0.5).abs() < 1e-12);
        assert!((r.macro_f1 - 0.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        assert!(eval_metrics(&[Left], &[Left, Right]).is_err());
        assert!(eval_metrics(&[], &[]).is_err());
    }

    fn label() -> impl Strategy<Value = Ideology> {
        (0usize..3).prop_map(|i| Ideology::from_index(i).unwrap())
    }

    proptest! {
        #[test]
        fn confusion_rows_are_gold_counts(pairs in prop::collection::vec((label(), label()), 1..60)) {
            let (p, g): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let r = eval_metrics(&p, &g).unwrap();
            for c in Ideology::ALL {
                let row: usize = r.confusion[c.index()].iter().sum();
                prop_assert_eq!(row, g.iter().filter(|&&x| x == c).count());
            }
            for m in &r.per_class {
                for v in [m.precision, m.recall, m.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
            prop_assert!((0.0..=1.0).contains(&r.macro_f1));
        }
    }
}

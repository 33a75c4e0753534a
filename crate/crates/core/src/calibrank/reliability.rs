use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One equal-width confidence bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub low: f64,
    pub high: f64,
    /// Mean confidence of the members; 0 for an empty bin.
    pub mean_score: f64,
    /// Fraction of members that were correct; 0 for an empty bin.
    pub empirical_freq: f64,
    pub count: usize,
}

/// Bins `confidence` into `bins` equal-width bins over `[0, 1]`; the top
/// bin is closed.
pub fn reliability_bins(confidence: &[f64], correct: &[bool], bins: usize) -> Result<Vec<ReliabilityBin>> {
    if confidence.len() != correct.len() {
        return Err(Error::invalid("confidence and correctness lengths differ"));
    }
    if bins == 0 {
        return Err(Error::invalid("need at least one bin"));
    }
    let mut sum = vec![0.0; bins];
    let mut hits = vec![0usize; bins];
    let mut count = vec![0usize; bins];
    for (&c, &ok) in confidence.iter().zip(correct) {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::invalid(format!("confidence {c} outside [0, 1]")));
        }
        let b = ((c * bins as f64) as usize).min(bins - 1);
        sum[b] += c;
        hits[b] += usize::from(ok);
        count[b] += 1;
    }
    Ok((0..bins)
        .map(|b| {
            let n = count[b];
            let (mean_score, empirical_freq) =
                if n == 0 { (0.0, 0.0) } else { (sum[b] / n as f64, hits[b] as f64 / n as f64) };
            ReliabilityBin {
                low: b as f64 / bins as f64,
                high: (b + 1) as f64 / bins as f64,
                mean_score,
                empirical_freq,
                count: n,
            }
        })
        .collect())
}

/// `sum_b (n_b / n) |accuracy_b - confidence_b|`.
pub fn expected_calibration_error(confidence: &[f64], correct: &[bool], bins: usize) -> Result<f64> {
    if confidence.is_empty() {
        return Err(Error::invalid("no predictions to calibrate"));
    }
    let n = confidence.len() as f64;
    Ok(reliability_bins(confidence, correct, bins)?
        .iter()
        .map(|b| b.count as f64 / n * (b.empirical_freq - b.mean_score).abs())
        .sum())
}

pub fn reliability_csv(bins: &[ReliabilityBin]) -> String {
    let mut s = String::from("bin_low,bin_high,mean_score,empirical_freq,count\n");
    for b in bins {
        s.push_str(&format!("{},{},{},{},{}\n", b.low, b.high, b.mean_score, b.empirical_freq, b.count));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfectly_calibrated_bins() {
        // 0.25 confidence, one of four right; 0.75 confidence, three of four right
        let conf = [0.25, 0.25, 0.25, 0.25, 0.75, 0.75, 0.75, 0.75];
        let ok = [true, false, false, false, true, true, true, false];
        assert!(expected_calibration_error(&conf, &ok, 10).unwrap().abs() < 1e-12);
    }

    #[test]
    fn overconfident_gap() {
        // always 0.9 confident, right half the time
        let ece = expected_calibration_error(&[0.9; 4], &[true, false, true, false], 10).unwrap();
        assert!((ece - 0.4).abs() < 1e-12);
    }

    #[test]
    fn top_edge_goes_to_last_bin() {
        let bins = reliability_bins(&[1.0, 0.0], &[true, false], 10).unwrap();
        assert_eq!(bins[9].count, 1);
        assert_eq!(bins[0].count, 1);
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 2);
    }

    #[test]
    fn csv_layout() {
        let bins = reliability_bins(&[0.55], &[true], 2).unwrap();
        assert_eq!(
            reliability_csv(&bins),
            "bin_low,bin_high,mean_score,empirical_freq,count\n0,0.5,0,0,0\n0.5,1,0.55,1,1\n"
        );
    }

    #[test]
    fn bad_inputs() {
        assert!(reliability_bins(&[0.5], &[], 10).is_err());
        assert!(reliability_bins(&[1.5], &[true], 10).is_err());
        assert!(expected_calibration_error(&[], &[], 10).is_err());
    }
}

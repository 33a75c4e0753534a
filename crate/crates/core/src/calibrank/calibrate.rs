use serde::{Deserialize, Serialize};

use super::isotonic::{fit_isotonic, IsotonicModel};
use crate::error::{Error, Result};
use crate::model::{PredictionRecord, NUM_CLASSES};

/// Floor applied to each calibrated class score before renormalizing.
pub const CALIBRATION_FLOOR: f64 = 1e-9;

/// One-vs-rest isotonic models, one per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    pub models: [IsotonicModel; NUM_CLASSES],
}

/// Applies each class model, floors at [`CALIBRATION_FLOOR`] and renormalizes.
pub fn calibrate(models: &[IsotonicModel; NUM_CLASSES], raw: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let mut out = [0.0; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        out[c] = models[c].predict(raw[c]).max(CALIBRATION_FLOOR);
    }
    let total: f64 = out.iter().sum();
    out.map(|v| v / total)
}

impl Calibrator {
    /// Fits on labeled predictions, normally the validation split.
    pub fn fit(records: &[PredictionRecord]) -> Result<Self> {
        let gold: Vec<usize> = records
            .iter()
            .map(|r| {
                r.gold
                    .map(|g| g.index())
                    .ok_or_else(|| Error::invalid(format!("prediction {:?} has no gold label", r.article_id)))
            })
            .collect::<Result<_>>()?;
        let fit_class = |c: usize| {
            let scores: Vec<f64> = records.iter().map(|r| r.distribution[c]).collect();
            let targets: Vec<f64> = gold.iter().map(|&g| if g == c { 1.0 } else { 0.0 }).collect();
            fit_isotonic(&scores, &targets)
        };
        Ok(Self { models: [fit_class(0)?, fit_class(1)?, fit_class(2)?] })
    }

    pub fn apply(&self, raw: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
        calibrate(&self.models, raw)
    }

    /// Fills in the calibrated distribution of every record.
    pub fn apply_all(&self, records: &mut [PredictionRecord]) {
        for r in records {
            r.calibrated = Some(self.apply(&r.distribution));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity() -> [IsotonicModel; 3] {
        let grid: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
        let m = IsotonicModel::from_points(grid.clone(), grid).unwrap();
        [m.clone(), m.clone(), m]
    }

    #[test]
    fn identity_models_leave_input() {
        let raw = [0.2, 0.3, 0.5];
        let out = calibrate(&identity(), &raw);
        for (a, b) in out.iter().zip(raw) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn floor_keeps_all_zero_output_defined() {
        let zero = IsotonicModel::from_points(vec![0.0], vec![0.0]).unwrap();
        let out = calibrate(&[zero.clone(), zero.clone(), zero], &[0.1, 0.2, 0.7]);
        assert_eq!(out, [1.0 / 3.0; 3]);
    }

    proptest! {
        #[test]
        fn output_is_a_distribution(a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64,
                                    v in prop::collection::vec(0.0..1.0f64, 3)) {
            let mut vals = v.clone();
            vals.sort_by(f64::total_cmp);
            let m = IsotonicModel::from_points(vec![0.2, 0.5, 0.8], vals).unwrap();
            let out = calibrate(&[m.clone(), m.clone(), m], &[a, b, c]);
            prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(out.iter().all(|&x| x > 0.0));
        }
    }
}

//! Isotonic probability calibration and source ranking by ideology.

mod calibrate;
mod isotonic;
mod ranking;
mod reliability;

pub use calibrate::{calibrate, Calibrator, CALIBRATION_FLOOR};
pub use isotonic::{fit_isotonic, IsotonicModel};
pub use ranking::{rank_sources, source_proportions, RankEntry, Ranking, SourceEntry, SourceProportions};
pub use reliability::{expected_calibration_error, reliability_bins, reliability_csv, ReliabilityBin};

use crate::error::Result;
use crate::model::PredictionRecord;

/// Top-label confidence and correctness of labeled records, using the
/// calibrated distribution when `calibrated` is set.
pub fn confidence_and_correct(records: &[PredictionRecord], calibrated: bool) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut conf = Vec::with_capacity(records.len());
    let mut ok = Vec::with_capacity(records.len());
    for r in records {
        let dist = if calibrated {
            r.calibrated
                .ok_or_else(|| crate::Error::invalid(format!("prediction {:?} is not calibrated", r.article_id)))?
        } else {
            r.distribution
        };
        let gold =
            r.gold.ok_or_else(|| crate::Error::invalid(format!("prediction {:?} has no gold label", r.article_id)))?;
        let top = crate::model::argmax(&dist);
        conf.push(dist[top]);
        ok.push(top == gold.index());
    }
    Ok((conf, ok))
}

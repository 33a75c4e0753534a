//! Metrics, baselines and the model ladder.

mod baselines;
mod ladder;
mod manifest;
mod metrics;

pub use baselines::{chance_baseline, label_distribution, lr_baseline, LogisticRegression, LrConfig};
pub use ladder::{
    median, run_ladder, run_ladder_with, LadderEntry, LadderOptions, LadderReport, LadderRun, LadderStep,
};
pub use manifest::RunManifest;
pub use metrics::{eval_metrics, ClassMetrics, MetricsReport};

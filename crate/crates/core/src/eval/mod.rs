//! Measurement protocol: IoU ground truth, metrics, threshold calibration
//! and corpus evaluation.

mod metrics;
mod run;

pub use metrics::{
    auc, calibrate_threshold, iou, label_ground_truth, naive_baseline, select_suspicious, Calibration, Confusion,
    Metrics, MetricsError, Orientation,
};
pub use run::{
    render_report, run_evaluation, truncate_explanation, EvalConfig, EvalError, EvalRecord, EvalReport, MethodRow,
    MetricsTable, SkippedRecord, Split, METHOD_NAIVE, METHOD_TRUST, REPORT_SCHEMA_VERSION,
};

//! Experiment runners, dataset ingestion and file output behind the CLI.

mod commands;
mod data;
mod lazy;
mod output;
mod similarity;
mod train;

pub use commands::{
    cmd_calibrate, cmd_equivalence, cmd_theory_curves, curve_table, require_pass, six_significant, theory_curves, CalibrationRecord,
    CurveSettings, CurveSummary, Curves, EquivalenceReport, EquivalenceTrial,
};
pub use data::{encode_idx, load_csv, load_dataset, load_idx, DataFormat, DatasetSource};
pub use lazy::{lazy_gradients, lazy_region, lazy_table, theta_grid, LazyRow, LazySetting};
pub use output::{format_float, write_atomic, write_json, CsvTable};
pub use similarity::{
    dot_similarity, infer_model, oracle_factors, similarity_default_data, similarity_table, similarity_trace, Similarity, SimilarityRow,
};
pub use train::{cmd_train, metrics_table, run_training, FinalMetrics, PrivacyConfig, RunConfig, RunManifest, StepLog, METRICS_HEADER};

use crate::error::Error;

/// Process exit status for an error: 1 usage, 2 I/O or calibration,
/// 3 numeric abort, 4 failed check.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) | Error::UnsupportedMetric(_) | Error::Domain { .. } | Error::InvalidState(_) => 1,
        Error::Io { .. } | Error::Parse { .. } | Error::Json(_) | Error::CalibrationFailure { .. } => 2,
        Error::NumericAbort { .. } => 3,
        Error::EquivalenceFailure { .. } | Error::AuditFailure(_) => 4,
    }
}

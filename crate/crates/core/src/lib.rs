//! Uncertainty quantification for operator task durations.
//!
//! Error samples (`observed - predicted`) from execution logs are summarized
//! per operator, sequence and season either as a probability box (enough
//! data) or as an epsilon-contamination band around the pooled sequence data
//! (sparse data). A rational-quadratic Gaussian process learns the systematic
//! error as a function of the nominal duration and corrects future estimates.
//! Operators are ranked by the area between their band's bounds.

pub mod contamination;
pub mod distributions;
pub mod error;
pub mod ingest;
pub mod pbox;
pub mod predictor;
pub mod scheduler;
pub mod synth;

pub use contamination::{
    contaminate, lower_prevision, pooled_base, upper_prevision, Contaminant, ContaminationSpec,
};
pub use distributions::{ecdf, eval_cdf, histogram, quantile, MassFunction, SampleSet, StepCdf};
pub use error::{Error, Result};
pub use ingest::{
    compute_error, group_errors, list_sequences, load_snapshot, parse_csv, save_snapshot, ErrorSample,
    GroupKey, Reject, Season, SequenceKey, SequenceListing, Snapshot, TaskRecord,
};
pub use pbox::{area, contains, envelope, PBox};
pub use predictor::{
    corrected_estimate, fit, rq_kernel, train_predictors, CorrectedEstimate, Correction, GprModel,
    ModelSource, Prediction, PredictorConfig, PredictorSet, RqKernelParams,
};
pub use scheduler::{
    analyze, compare_before_after, quantify_group, rank_operators, train, Analysis, AnalysisConfig,
    AnalysisExport, GroupComparison, ModelKind, RankingEntry, SequenceSummary, TrainOutcome,
    UncertaintyModel, WhatIf,
};

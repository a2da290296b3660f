//! Certified abstention thresholds for binary classifiers.
//!
//! A scorer emits a success probability per record. This crate picks a
//! confidence threshold on a labelled calibration set such that, with
//! probability at least `1 - beta` over the calibration draw, the
//! misclassification rate among retained predictions stays below `alpha`.
//! Everything below the threshold is abstained on.
//!
//! The crate is `no_std` (with `alloc`). File formats, the CLI and thread
//! pools live in the `selcert` companion crate.

#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod binom;
pub mod calibrate;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod records;
pub mod rng;
pub mod sim;

mod sum;

pub use binom::{binom_cdf, risk_upper_bound, BinomialTail, RiskBound};
pub use calibrate::{
    apply, certify_threshold, confidence, predicted_label, retain_rate, selective_risk,
    CertificateStatus, Decision, GridPoint, Outcome, RiskConfig, ThresholdCertificate,
};
pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use metrics::{
    bootstrap_significance, f1_accuracy, pr_auc, roc_auc, selective_report, Metric, MetricBlock,
    Scored, SelectiveReport, SignificanceResult,
};
pub use records::{
    carve_fraction, generate_synthetic, temporal_split, Dataset, PredictionRecord, SplitSpec,
    SyntheticScorerSpec,
};
pub use sim::{
    tradeoff_curve, validate_guarantee, GuaranteeSummary, GuaranteeTrial, ScoreSource,
    TradeoffCurve, TradeoffPoint,
};

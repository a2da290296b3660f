//! On-disk forms of certificates, decisions, reports, curves and trials.
//!
//! Field order in every JSON document is fixed by struct declaration order.
//! Probabilities go through [`crate::num::sig12`].

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use selcert_core::sim::GuaranteeSummary;
use selcert_core::{
    CertificateStatus, Decision, GridPoint, GuaranteeTrial, MetricBlock, Outcome, RiskConfig,
    SelectiveReport, SignificanceResult, ThresholdCertificate, TradeoffCurve,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{to_json_bytes, RunManifest};
use crate::num::{fmt12, fmt12_opt, ser12, ser12_opt};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPointDoc {
    #[serde(serialize_with = "ser12")]
    pub lambda: f64,
    pub n: u64,
    pub errors: u64,
    #[serde(serialize_with = "ser12")]
    pub risk_hat: f64,
    #[serde(serialize_with = "ser12")]
    pub risk_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateDoc {
    pub status: String,
    #[serde(serialize_with = "ser12_opt")]
    pub lambda_hat: Option<f64>,
    #[serde(serialize_with = "ser12")]
    pub alpha: f64,
    #[serde(serialize_with = "ser12")]
    pub beta: f64,
    pub calib_size: usize,
    pub grid: Vec<GridPointDoc>,
    /// Smallest retained count a grid point needed to be scanned.
    #[serde(default = "one")]
    pub min_support: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

fn one() -> u64 {
    1
}

impl CertificateDoc {
    pub fn new(cert: &ThresholdCertificate, manifest: Option<RunManifest>) -> Self {
        Self {
            status: cert.status.as_str().to_string(),
            lambda_hat: cert.lambda_hat,
            alpha: cert.config.alpha,
            beta: cert.config.beta,
            calib_size: cert.calib_size,
            grid: cert
                .grid
                .iter()
                .map(|g| GridPointDoc {
                    lambda: g.lambda,
                    n: g.n_at,
                    errors: g.errors_at,
                    risk_hat: g.risk_hat,
                    risk_plus: g.risk_plus,
                })
                .collect(),
            min_support: cert.config.min_support,
            manifest,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        to_json_bytes(self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = crate::io::read_file(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e))
    }

    /// Rebuilds the certificate, checking status and threshold agree.
    pub fn to_certificate(&self, path: &Path) -> Result<ThresholdCertificate> {
        let status = match self.status.as_str() {
            "feasible" => CertificateStatus::Feasible,
            "infeasible" => CertificateStatus::Infeasible,
            other => return Err(Error::format(path, format!("unknown status `{other}`"))),
        };
        match (status, self.lambda_hat) {
            (CertificateStatus::Feasible, None) => {
                return Err(Error::format(
                    path,
                    "feasible certificate without lambda_hat",
                ))
            }
            (CertificateStatus::Infeasible, Some(_)) => {
                return Err(Error::format(
                    path,
                    "infeasible certificate with lambda_hat",
                ))
            }
            _ => {}
        }
        Ok(ThresholdCertificate {
            status,
            lambda_hat: self.lambda_hat,
            grid: self
                .grid
                .iter()
                .map(|g| GridPoint {
                    lambda: g.lambda,
                    n_at: g.n,
                    errors_at: g.errors,
                    risk_hat: g.risk_hat,
                    risk_plus: g.risk_plus,
                })
                .collect(),
            config: RiskConfig::new(self.alpha, self.beta)?.with_min_support(self.min_support),
            calib_size: self.calib_size,
        })
    }
}

pub fn outcome_str(o: Outcome) -> &'static str {
    match o {
        Outcome::Predict(1) => "1",
        Outcome::Predict(_) => "0",
        Outcome::Abstain => "abstain",
    }
}

/// `id,outcome,confidence`, outcome one of `1`, `0`, `abstain`.
pub fn decisions_bytes(decisions: &[Decision]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Usage(format!("csv write failed: {e}"));
    w.write_record(["id", "outcome", "confidence"])
        .map_err(err)?;
    for d in decisions {
        w.write_record([d.id.as_str(), outcome_str(d.outcome), &fmt12(d.confidence)])
            .map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Usage(format!("csv write failed: {}", e.error())))
}

pub fn read_decisions(path: &Path) -> Result<Vec<Decision>> {
    let bytes = crate::io::read_file(path)?;
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let header = rdr.headers().map_err(|e| Error::format(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["id", "outcome", "confidence"] {
        return Err(Error::format(path, "expected header id,outcome,confidence"));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let schema = |column: &str, message: String| Error::Schema {
            path: path.to_path_buf(),
            row,
            column: column.to_string(),
            message,
        };
        let rec = rec.map_err(|e| schema("*", e.to_string()))?;
        let id = rec[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                row,
                id,
            });
        }
        let outcome = match &rec[1] {
            "1" => Outcome::Predict(1),
            "0" => Outcome::Predict(0),
            "abstain" => Outcome::Abstain,
            other => {
                return Err(schema(
                    "outcome",
                    format!("`{other}` is not 1, 0 or abstain"),
                ))
            }
        };
        let confidence: f64 = rec[2]
            .parse()
            .map_err(|_| schema("confidence", format!("`{}` is not a number", &rec[2])))?;
        out.push(Decision {
            id,
            outcome,
            confidence,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsDoc {
    #[serde(serialize_with = "ser12_opt")]
    pub pr_auc: Option<f64>,
    #[serde(serialize_with = "ser12_opt")]
    pub f1: Option<f64>,
    #[serde(serialize_with = "ser12_opt")]
    pub roc_auc: Option<f64>,
    #[serde(serialize_with = "ser12_opt")]
    pub accuracy: Option<f64>,
    #[serde(serialize_with = "ser12")]
    pub retain_rate: f64,
    pub n_total: usize,
    pub n_retained: usize,
}

impl MetricsDoc {
    fn new(m: &MetricBlock, r: &SelectiveReport) -> Self {
        Self {
            pr_auc: m.pr_auc,
            f1: m.f1,
            roc_auc: m.roc_auc,
            accuracy: m.accuracy,
            retain_rate: r.retain_rate,
            n_total: r.n_total,
            n_retained: r.n_retained,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceDoc {
    pub metric: String,
    #[serde(serialize_with = "ser12")]
    pub delta: f64,
    #[serde(serialize_with = "ser12")]
    pub p_value: f64,
    pub resamples: usize,
    /// Which pair was compared.
    pub comparison: String,
}

impl SignificanceDoc {
    pub fn new(s: &SignificanceResult, comparison: &str) -> Self {
        Self {
            metric: s.metric.name().to_string(),
            delta: s.delta,
            p_value: s.p_value,
            resamples: s.resamples,
            comparison: comparison.to_string(),
        }
    }
}

/// Report in the row layout of a phase-level results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportDoc {
    #[serde(flatten)]
    pub overall: MetricsDoc,
    #[serde(serialize_with = "ser12_opt")]
    pub lambda_hat: Option<f64>,
    #[serde(serialize_with = "ser12_opt")]
    pub alpha: Option<f64>,
    #[serde(serialize_with = "ser12_opt")]
    pub beta: Option<f64>,
    pub seed: Option<u64>,
    /// Free-form description of what a replication is, if any.
    pub replication: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<BTreeMap<String, MetricsDoc>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub significance: Vec<SignificanceDoc>,
    pub manifest: RunManifest,
}

impl ReportDoc {
    pub fn new(report: &SelectiveReport, manifest: RunManifest) -> Self {
        Self {
            overall: MetricsDoc::new(&report.metrics, report),
            lambda_hat: None,
            alpha: None,
            beta: None,
            seed: None,
            replication: None,
            groups: report.group_breakdown.as_ref().map(|g| {
                g.iter()
                    .map(|(k, r)| (k.clone(), MetricsDoc::new(&r.metrics, r)))
                    .collect()
            }),
            significance: Vec::new(),
            manifest,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        to_json_bytes(self)
    }

    /// CSV mirror: one row for the whole set, then one per group.
    pub fn csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Usage(format!("csv write failed: {e}"));
        w.write_record([
            "scope",
            "pr_auc",
            "f1",
            "roc_auc",
            "accuracy",
            "retain_rate",
            "n_total",
            "n_retained",
        ])
        .map_err(err)?;
        let row = |scope: &str, m: &MetricsDoc| {
            vec![
                scope.to_string(),
                fmt12_opt(m.pr_auc),
                fmt12_opt(m.f1),
                fmt12_opt(m.roc_auc),
                fmt12_opt(m.accuracy),
                fmt12(m.retain_rate),
                m.n_total.to_string(),
                m.n_retained.to_string(),
            ]
        };
        w.write_record(row("all", &self.overall)).map_err(err)?;
        for (k, m) in self.groups.iter().flatten() {
            w.write_record(row(k, m)).map_err(err)?;
        }
        w.into_inner()
            .map_err(|e| Error::Usage(format!("csv write failed: {}", e.error())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePointDoc {
    #[serde(serialize_with = "ser12")]
    pub lambda: f64,
    #[serde(serialize_with = "ser12")]
    pub fraction_kept: f64,
    #[serde(serialize_with = "ser12_opt")]
    pub selective_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveDoc {
    pub points: Vec<CurvePointDoc>,
    pub manifest: RunManifest,
}

pub fn curve_points(curve: &TradeoffCurve) -> Vec<CurvePointDoc> {
    curve
        .points
        .iter()
        .map(|p| CurvePointDoc {
            lambda: p.lambda,
            fraction_kept: p.fraction_kept,
            selective_accuracy: p.selective_accuracy,
        })
        .collect()
}

/// `lambda,fraction_kept,selective_accuracy`; undefined accuracy is empty.
pub fn curve_csv(curve: &TradeoffCurve) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Usage(format!("csv write failed: {e}"));
    w.write_record(["lambda", "fraction_kept", "selective_accuracy"])
        .map_err(err)?;
    for p in &curve.points {
        w.write_record([
            fmt12(p.lambda),
            fmt12(p.fraction_kept),
            fmt12_opt(p.selective_accuracy),
        ])
        .map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Usage(format!("csv write failed: {}", e.error())))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialDoc {
    pub trial: usize,
    #[serde(serialize_with = "ser12_opt")]
    pub lambda_hat: Option<f64>,
    #[serde(serialize_with = "ser12_opt")]
    pub test_selective_accuracy: Option<f64>,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryDoc {
    pub trials: usize,
    pub feasible: usize,
    pub violations: usize,
    #[serde(serialize_with = "ser12_opt")]
    pub violation_rate: Option<f64>,
}

impl From<&GuaranteeSummary> for SummaryDoc {
    fn from(s: &GuaranteeSummary) -> Self {
        Self {
            trials: s.trials,
            feasible: s.feasible,
            violations: s.violations,
            violation_rate: s.violation_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialsDoc {
    pub trials: Vec<TrialDoc>,
    pub summary: SummaryDoc,
    pub manifest: RunManifest,
}

pub fn trial_docs(trials: &[GuaranteeTrial]) -> Vec<TrialDoc> {
    trials
        .iter()
        .map(|t| TrialDoc {
            trial: t.trial_index,
            lambda_hat: t.lambda_hat,
            test_selective_accuracy: t.test_selective_accuracy,
            violated: t.violated,
        })
        .collect()
}

/// `trial,lambda_hat,test_selective_accuracy,violated`.
pub fn trials_csv(trials: &[GuaranteeTrial]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Usage(format!("csv write failed: {e}"));
    w.write_record(["trial", "lambda_hat", "test_selective_accuracy", "violated"])
        .map_err(err)?;
    for t in trials {
        w.write_record([
            t.trial_index.to_string(),
            fmt12_opt(t.lambda_hat),
            fmt12_opt(t.test_selective_accuracy),
            t.violated.to_string(),
        ])
        .map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Usage(format!("csv write failed: {}", e.error())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use selcert_core::{certify_threshold, Dataset, PredictionRecord};

    fn cert() -> ThresholdCertificate {
        let d = Dataset::new(
            vec![
                PredictionRecord::new("a", 0.95, 1),
                PredictionRecord::new("b", 0.3, 0),
                PredictionRecord::new("c", 0.6, 0),
            ],
            "t",
        )
        .unwrap();
        certify_threshold(&d, RiskConfig::new(0.9, 0.2).unwrap()).unwrap()
    }

    #[test]
    fn certificate_field_order() {
        let bytes = CertificateDoc::new(&cert(), None).to_bytes().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let keys = [
            "\"status\"",
            "\"lambda_hat\"",
            "\"alpha\"",
            "\"beta\"",
            "\"calib_size\"",
            "\"grid\"",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{text}");
        let gk = [
            "\"lambda\"",
            "\"n\"",
            "\"errors\"",
            "\"risk_hat\"",
            "\"risk_plus\"",
        ];
        let gpos: Vec<usize> = gk.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(gpos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn certificate_reads_back() {
        let c = cert();
        let doc = CertificateDoc::new(&c, None);
        let bytes = doc.to_bytes().unwrap();
        let back: CertificateDoc = serde_json::from_slice(&bytes).unwrap();
        let c2 = back.to_certificate(Path::new("mem")).unwrap();
        assert_eq!(c2.status, c.status);
        assert_eq!(c2.lambda_hat, c.lambda_hat);
        for (a, b) in c2.grid.iter().zip(&c.grid) {
            assert!((a.risk_plus - b.risk_plus).abs() < 1e-11);
            assert_eq!(a.n_at, b.n_at);
        }
    }

    #[test]
    fn inconsistent_certificate_rejected() {
        let mut doc = CertificateDoc::new(&cert(), None);
        doc.lambda_hat = None;
        assert!(doc.to_certificate(Path::new("mem")).is_err());
        doc.status = "maybe".into();
        assert!(doc.to_certificate(Path::new("mem")).is_err());
    }

    #[test]
    fn decisions_layout() {
        let d = vec![
            Decision {
                id: "a".into(),
                outcome: Outcome::Predict(1),
                confidence: 0.95,
            },
            Decision {
                id: "b".into(),
                outcome: Outcome::Abstain,
                confidence: 1.0 - 0.287,
            },
        ];
        let text = String::from_utf8(decisions_bytes(&d).unwrap()).unwrap();
        assert_eq!(text, "id,outcome,confidence\na,1,0.95\nb,abstain,0.713\n");
    }
}

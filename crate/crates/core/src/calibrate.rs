//! Threshold certification and predict-or-abstain decisions.
//!
//! The confidence of a score `w` is `max(w, 1 - w)` and the predicted label
//! is `1` iff `w >= 0.5`. For a threshold `lambda`, the retained set is every
//! calibration record with confidence `>= lambda`; its error count gives the
//! empirical selective risk and, through [`risk_upper_bound`], an upper
//! confidence bound on the true selective risk. The certified threshold is
//! the smallest grid value from which every higher grid value has a bound
//! within the risk budget.

use alloc::string::String;
use alloc::vec::Vec;

use crate::binom::{risk_upper_bound, BinomialTail};
use crate::error::{domain, Error, Result};
use crate::records::{Dataset, PredictionRecord};

/// Target selective error `alpha` and failure rate `beta`.
///
/// `min_support` drops grid points retaining fewer calibration records
/// from the scan. With the default of 1 every unique confidence is
/// scanned, so the single most confident record alone has bound
/// `1 - beta` and blocks any `alpha` below that.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskConfig {
    pub alpha: f64,
    pub beta: f64,
    pub min_support: u64,
}

impl RiskConfig {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(domain("alpha must lie strictly between 0 and 1"));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(domain("beta must lie strictly between 0 and 1"));
        }
        Ok(Self {
            alpha,
            beta,
            min_support: 1,
        })
    }

    pub fn with_min_support(mut self, min_support: u64) -> Self {
        self.min_support = min_support.max(1);
        self
    }

    /// Smallest retained count whose zero-error bound `1 - beta^(1/n)`
    /// reaches `alpha`; grid points below it can never be certified.
    pub fn certifiable_support(&self) -> u64 {
        let n = libm::ceil(libm::log(self.beta) / libm::log1p(-self.alpha));
        let mut n = (n as u64).max(1);
        // Guard the float ceiling against landing one short or one over.
        let bound = |n: u64| 1.0 - libm::pow(self.beta, 1.0 / n as f64);
        while bound(n) > self.alpha {
            n += 1;
        }
        while n > 1 && bound(n - 1) <= self.alpha {
            n -= 1;
        }
        n
    }

    /// `with_min_support(certifiable_support())`.
    pub fn with_auto_support(self) -> Self {
        let n = self.certifiable_support();
        self.with_min_support(n)
    }
}

/// One threshold on the scan grid with its retained count, error count and
/// risk estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub lambda: f64,
    pub n_at: u64,
    pub errors_at: u64,
    pub risk_hat: f64,
    pub risk_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateStatus {
    Feasible,
    Infeasible,
}

impl CertificateStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CertificateStatus::Feasible => "feasible",
            CertificateStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCertificate {
    pub status: CertificateStatus,
    /// Present iff the status is feasible.
    pub lambda_hat: Option<f64>,
    /// Ascending in `lambda`.
    pub grid: Vec<GridPoint>,
    pub config: RiskConfig,
    pub calib_size: usize,
}

impl ThresholdCertificate {
    pub fn is_feasible(&self) -> bool {
        self.status == CertificateStatus::Feasible
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Predict(u8),
    Abstain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub id: String,
    pub outcome: Outcome,
    pub confidence: f64,
}

impl Decision {
    pub fn is_retained(&self) -> bool {
        matches!(self.outcome, Outcome::Predict(_))
    }
}

pub fn confidence(score: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&score) {
        return Err(domain("score outside [0, 1]"));
    }
    Ok(score_confidence(score))
}

#[inline]
pub(crate) fn score_confidence(score: f64) -> f64 {
    score.max(1.0 - score)
}

/// Argmax label of a binary score; ties at 0.5 go to the positive class.
#[inline]
pub fn predicted_label(score: f64) -> u8 {
    u8::from(score >= 0.5)
}

#[inline]
pub(crate) fn is_correct(r: &PredictionRecord) -> bool {
    predicted_label(r.score) == r.label
}

fn grid_point(lambda: f64, n_at: u64, errors_at: u64, beta: f64) -> Result<GridPoint> {
    if n_at == 0 {
        return Ok(GridPoint {
            lambda,
            n_at,
            errors_at,
            risk_hat: 1.0,
            risk_plus: 1.0,
        });
    }
    let bound = risk_upper_bound(BinomialTail::new(errors_at, n_at)?, beta)?;
    Ok(GridPoint {
        lambda,
        n_at,
        errors_at,
        risk_hat: errors_at as f64 / n_at as f64,
        risk_plus: bound.value,
    })
}

/// Empirical selective risk and its upper bound at a single threshold.
pub fn selective_risk(calib: &Dataset, lambda: f64, beta: f64) -> Result<GridPoint> {
    if calib.is_empty() {
        return Err(Error::EmptyCalibrationSet);
    }
    if !(0.5..=1.0).contains(&lambda) {
        return Err(domain("lambda must lie in [0.5, 1]"));
    }
    let (n_at, errors_at) = calib
        .records()
        .iter()
        .filter(|r| score_confidence(r.score) >= lambda)
        .fold((0u64, 0u64), |(n, e), r| {
            (n + 1, e + u64::from(!is_correct(r)))
        });
    grid_point(lambda, n_at, errors_at, beta)
}

/// Scans the unique calibration confidences that retain at least
/// `config.min_support` records and certifies `lambda_hat`.
pub fn certify_threshold(calib: &Dataset, config: RiskConfig) -> Result<ThresholdCertificate> {
    if calib.is_empty() {
        return Err(Error::EmptyCalibrationSet);
    }
    let mut scored: Vec<(f64, bool)> = calib
        .records()
        .iter()
        .map(|r| (score_confidence(r.score), is_correct(r)))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    // Sweep from the most confident record down; each unique confidence
    // closes a block and yields one grid point.
    let mut grid = Vec::new();
    let (mut n_at, mut errors_at) = (0u64, 0u64);
    let mut i = 0;
    while i < scored.len() {
        let lambda = scored[i].0;
        while i < scored.len() && scored[i].0 == lambda {
            n_at += 1;
            errors_at += u64::from(!scored[i].1);
            i += 1;
        }
        if n_at >= config.min_support {
            grid.push(grid_point(lambda, n_at, errors_at, config.beta)?);
        }
    }
    grid.reverse();

    let lambda_hat = grid
        .iter()
        .rev()
        .take_while(|g| g.risk_plus <= config.alpha)
        .last()
        .map(|g| g.lambda);

    Ok(ThresholdCertificate {
        status: if lambda_hat.is_some() {
            CertificateStatus::Feasible
        } else {
            CertificateStatus::Infeasible
        },
        lambda_hat,
        grid,
        config,
        calib_size: calib.len(),
    })
}

/// Predicts the argmax label where confidence reaches `lambda_hat`,
/// abstains elsewhere.
pub fn apply(test: &Dataset, cert: &ThresholdCertificate) -> Result<Vec<Decision>> {
    let lambda_hat = match (cert.status, cert.lambda_hat) {
        (CertificateStatus::Feasible, Some(l)) => l,
        _ => return Err(Error::InfeasibleCertificate),
    };
    Ok(test
        .records()
        .iter()
        .map(|r| {
            let confidence = score_confidence(r.score);
            let outcome = if confidence >= lambda_hat {
                Outcome::Predict(predicted_label(r.score))
            } else {
                Outcome::Abstain
            };
            Decision {
                id: r.id.clone(),
                outcome,
                confidence,
            }
        })
        .collect())
}

pub fn retain_rate(decisions: &[Decision]) -> f64 {
    if decisions.is_empty() {
        return 0.0;
    }
    decisions.iter().filter(|d| d.is_retained()).count() as f64 / decisions.len() as f64
}

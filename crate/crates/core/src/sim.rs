//! Accuracy/coverage tradeoff curves and Monte Carlo checks of the
//! selective accuracy guarantee.

use alloc::vec::Vec;

use crate::calibrate::{certify_threshold, is_correct, score_confidence, RiskConfig};
use crate::error::{domain, Error, Result};
use crate::exec::{Executor, Sequential};
use crate::records::{generate_synthetic, Dataset, SyntheticScorerSpec};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffPoint {
    pub lambda: f64,
    pub fraction_kept: f64,
    /// `None` when nothing is retained.
    pub selective_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TradeoffCurve {
    pub points: Vec<TradeoffPoint>,
}

/// Confidences sorted descending, each paired with correctness.
fn ranked(test: &Dataset) -> Vec<(f64, bool)> {
    let mut v: Vec<(f64, bool)> = test
        .records()
        .iter()
        .map(|r| (score_confidence(r.score), is_correct(r)))
        .collect();
    v.sort_by(|a, b| b.0.total_cmp(&a.0));
    v
}

/// Sorted unique confidences of `d`; the natural tradeoff grid.
pub fn confidence_grid(d: &Dataset) -> Vec<f64> {
    let mut v: Vec<f64> = d
        .records()
        .iter()
        .map(|r| score_confidence(r.score))
        .collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

pub fn tradeoff_curve(test: &Dataset, lambdas: &[f64]) -> Result<TradeoffCurve> {
    if test.is_empty() {
        return Err(Error::EmptyInput);
    }
    if lambdas.iter().any(|l| !(0.5..=1.0).contains(l)) {
        return Err(domain("lambdas must lie in [0.5, 1]"));
    }
    if lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::UnsortedLambdas);
    }
    let ranked = ranked(test);
    // Prefix error counts along the descending ranking.
    let mut error_prefix = Vec::with_capacity(ranked.len() + 1);
    error_prefix.push(0usize);
    for &(_, ok) in &ranked {
        let last = *error_prefix.last().unwrap_or(&0);
        error_prefix.push(last + usize::from(!ok));
    }
    let n = ranked.len() as f64;
    let points = lambdas
        .iter()
        .map(|&lambda| {
            let kept = ranked.partition_point(|x| x.0 >= lambda);
            TradeoffPoint {
                lambda,
                fraction_kept: kept as f64 / n,
                selective_accuracy: (kept > 0)
                    .then(|| 1.0 - error_prefix[kept] as f64 / kept as f64),
            }
        })
        .collect();
    Ok(TradeoffCurve { points })
}

/// `1 - risk_hat` over records of `test` with confidence `>= lambda`.
pub fn selective_accuracy(test: &Dataset, lambda: f64) -> Option<f64> {
    let (kept, errors) = test
        .records()
        .iter()
        .filter(|r| score_confidence(r.score) >= lambda)
        .fold((0usize, 0usize), |(k, e), r| {
            (k + 1, e + usize::from(!is_correct(r)))
        });
    (kept > 0).then(|| 1.0 - errors as f64 / kept as f64)
}

/// A labelled score generator that can be redrawn at any size and seed.
pub trait ScoreSource: Sync {
    fn draw(&self, n: usize, seed: u64) -> Result<Dataset>;
}

impl ScoreSource for SyntheticScorerSpec {
    fn draw(&self, n: usize, seed: u64) -> Result<Dataset> {
        generate_synthetic(&SyntheticScorerSpec { n, seed, ..*self })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuaranteeTrial {
    pub trial_index: usize,
    /// `None` when the calibration draw was infeasible.
    pub lambda_hat: Option<f64>,
    /// `None` when infeasible or nothing in the test draw was retained.
    pub test_selective_accuracy: Option<f64>,
    pub violated: bool,
}

impl GuaranteeTrial {
    pub fn is_feasible(&self) -> bool {
        self.lambda_hat.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuaranteeSummary {
    pub trials: usize,
    pub feasible: usize,
    pub violations: usize,
    /// `violations / feasible`; `None` when no trial was feasible.
    pub violation_rate: Option<f64>,
}

impl GuaranteeSummary {
    pub fn from_trials(trials: &[GuaranteeTrial]) -> Self {
        let feasible = trials.iter().filter(|t| t.is_feasible()).count();
        let violations = trials.iter().filter(|t| t.violated).count();
        Self {
            trials: trials.len(),
            feasible,
            violations,
            violation_rate: (feasible > 0).then(|| violations as f64 / feasible as f64),
        }
    }
}

/// Seeds of the calibration and test draws of one trial.
pub fn trial_seeds(seed: u64, trial_index: usize) -> (u64, u64) {
    let calib = rng::substream_seed(seed, trial_index as u64);
    (calib, rng::mix64(calib ^ 0xA5A5_A5A5_A5A5_A5A5))
}

/// Violation flag for a certified threshold measured on a test draw.
pub fn is_violation(lambda_hat: Option<f64>, test_accuracy: Option<f64>, alpha: f64) -> bool {
    match (lambda_hat, test_accuracy) {
        (Some(_), Some(acc)) => acc < 1.0 - alpha,
        _ => false,
    }
}

pub fn run_trial<S: ScoreSource + ?Sized>(
    source: &S,
    config: RiskConfig,
    n_calib: usize,
    n_test: usize,
    seed: u64,
    trial_index: usize,
) -> Result<GuaranteeTrial> {
    let (calib_seed, test_seed) = trial_seeds(seed, trial_index);
    let calib = source.draw(n_calib, calib_seed)?;
    let cert = certify_threshold(&calib, config)?;
    let (lambda_hat, acc) = match cert.lambda_hat {
        Some(l) => {
            let test = source.draw(n_test, test_seed)?;
            (Some(l), selective_accuracy(&test, l))
        }
        None => (None, None),
    };
    Ok(GuaranteeTrial {
        trial_index,
        lambda_hat,
        test_selective_accuracy: acc,
        violated: is_violation(lambda_hat, acc, config.alpha),
    })
}

/// Repeats calibrate-then-test on fresh draws. Trial `i` depends only on
/// `(seed, i)`.
pub fn validate_guarantee<S: ScoreSource + ?Sized>(
    source: &S,
    config: RiskConfig,
    trials: usize,
    n_calib: usize,
    n_test: usize,
    seed: u64,
) -> Result<Vec<GuaranteeTrial>> {
    validate_guarantee_with(&Sequential, source, config, trials, n_calib, n_test, seed)
}

pub fn validate_guarantee_with<E: Executor, S: ScoreSource + ?Sized>(
    exec: &E,
    source: &S,
    config: RiskConfig,
    trials: usize,
    n_calib: usize,
    n_test: usize,
    seed: u64,
) -> Result<Vec<GuaranteeTrial>> {
    if trials == 0 || n_calib == 0 || n_test == 0 {
        return Err(domain("trials, n_calib and n_test must be at least 1"));
    }
    exec.map_indexed(trials, |i| {
        run_trial(source, config, n_calib, n_test, seed, i)
    })
    .into_iter()
    .collect()
}

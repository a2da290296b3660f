//! Evaluation metrics over full or retained prediction sets.
//!
//! Ranking metrics (ROC-AUC, PR-AUC) use raw scores; F1 and accuracy use the
//! argmax label (`score >= 0.5`). Metrics that are undefined on a given set
//! (single-class ROC-AUC, PR-AUC without positives, anything on an empty set)
//! are reported as `None`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::calibrate::{predicted_label, Decision};
use crate::error::{domain, Error, Result};
use crate::exec::{Executor, Sequential};
use crate::records::{Dataset, PredictionRecord};
use crate::rng;

/// Anything with a probability score and a binary label.
pub trait Scored {
    fn score(&self) -> f64;
    fn label(&self) -> u8;
}

impl Scored for PredictionRecord {
    fn score(&self) -> f64 {
        self.score
    }
    fn label(&self) -> u8 {
        self.label
    }
}

impl Scored for (f64, u8) {
    fn score(&self) -> f64 {
        self.0
    }
    fn label(&self) -> u8 {
        self.1
    }
}

impl<T: Scored> Scored for &T {
    fn score(&self) -> f64 {
        (*self).score()
    }
    fn label(&self) -> u8 {
        (*self).label()
    }
}

/// ROC-AUC as the Mann-Whitney statistic with midrank ties.
///
/// Concordant and tied positive/negative pairs are counted exactly in
/// integers; the only rounding is the final division.
pub fn roc_auc<S: Scored>(items: &[S]) -> Result<f64> {
    let mut v: Vec<(f64, u8)> = items.iter().map(|s| (s.score(), s.label())).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let positives = v.iter().filter(|x| x.1 == 1).count() as u128;
    let negatives = v.len() as u128 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels("roc_auc needs both classes"));
    }

    let (mut twice_wins, mut neg_below) = (0u128, 0u128);
    for block in v.chunk_by(|a, b| a.0 == b.0) {
        let pos = block.iter().filter(|x| x.1 == 1).count() as u128;
        let neg = block.len() as u128 - pos;
        twice_wins += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
    }
    Ok(twice_wins as f64 / (2 * positives * negatives) as f64)
}

/// Average precision: recall increments weighted by the precision at each
/// descending score level, equal scores treated as one block.
pub fn pr_auc<S: Scored>(items: &[S]) -> Result<f64> {
    let mut v: Vec<(f64, u8)> = items.iter().map(|s| (s.score(), s.label())).collect();
    v.sort_by(|a, b| b.0.total_cmp(&a.0));
    let positives = v.iter().filter(|x| x.1 == 1).count();
    if positives == 0 {
        return Err(Error::DegenerateLabels(
            "pr_auc needs at least one positive",
        ));
    }

    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0f64);
    for block in v.chunk_by(|a, b| a.0 == b.0) {
        let pos = block.iter().filter(|x| x.1 == 1).count();
        tp += pos;
        seen += block.len();
        if pos > 0 {
            ap += (pos as f64 / positives as f64) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap.clamp(0.0, 1.0))
}

/// F1 and accuracy of the argmax labels. F1 is 0 when precision and recall
/// are both undefined or zero.
pub fn f1_accuracy<S: Scored>(items: &[S]) -> Result<(f64, f64)> {
    if items.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mut tp, mut fp, mut fn_, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for s in items {
        let pred = predicted_label(s.score());
        match (pred, s.label()) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fn_ += 1,
            _ => {}
        }
        if pred == s.label() {
            correct += 1;
        }
    }
    // 2PR/(P+R) == 2TP/(2TP+FP+FN)
    let denom = 2 * tp + fp + fn_;
    let f1 = if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    };
    Ok((f1, correct as f64 / items.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    PrAuc,
    F1,
    RocAuc,
    Accuracy,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::PrAuc, Metric::F1, Metric::RocAuc, Metric::Accuracy];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::PrAuc => "pr_auc",
            Metric::F1 => "f1",
            Metric::RocAuc => "roc_auc",
            Metric::Accuracy => "accuracy",
        }
    }

    /// `None` where the metric is undefined on `items`.
    pub fn evaluate<S: Scored>(&self, items: &[S]) -> Option<f64> {
        match self {
            Metric::PrAuc => pr_auc(items).ok(),
            Metric::RocAuc => roc_auc(items).ok(),
            Metric::F1 => f1_accuracy(items).ok().map(|x| x.0),
            Metric::Accuracy => f1_accuracy(items).ok().map(|x| x.1),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| domain(alloc::format!("unknown metric `{s}`")))
    }
}

/// The four headline metrics; `None` marks an undefined value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricBlock {
    pub pr_auc: Option<f64>,
    pub f1: Option<f64>,
    pub roc_auc: Option<f64>,
    pub accuracy: Option<f64>,
}

impl MetricBlock {
    pub fn compute<S: Scored>(items: &[S]) -> Self {
        let (f1, accuracy) = f1_accuracy(items).ok().unzip();
        Self {
            pr_auc: pr_auc(items).ok(),
            f1,
            roc_auc: roc_auc(items).ok(),
            accuracy,
        }
    }

    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::PrAuc => self.pr_auc,
            Metric::F1 => self.f1,
            Metric::RocAuc => self.roc_auc,
            Metric::Accuracy => self.accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceResult {
    pub metric: Metric,
    /// Observed `metric(a) - metric(b)`.
    pub delta: f64,
    /// Fraction of resamples with `metric(a*) <= metric(b*)`.
    pub p_value: f64,
    pub resamples: usize,
}

/// Metrics over retained predictions plus coverage accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectiveReport {
    pub metrics: MetricBlock,
    pub retain_rate: f64,
    pub n_total: usize,
    pub n_retained: usize,
    /// Same block per group; records without a group fall under
    /// [`UNGROUPED`]. Nested reports carry no breakdown of their own.
    pub group_breakdown: Option<BTreeMap<String, SelectiveReport>>,
    pub significance: Vec<SignificanceResult>,
}

pub const UNGROUPED: &str = "(none)";

fn block_report(all: &[(&PredictionRecord, bool)]) -> SelectiveReport {
    let retained: Vec<&PredictionRecord> = all.iter().filter(|x| x.1).map(|x| x.0).collect();
    let n_total = all.len();
    let n_retained = retained.len();
    SelectiveReport {
        metrics: MetricBlock::compute(&retained),
        retain_rate: if n_total == 0 {
            0.0
        } else {
            n_retained as f64 / n_total as f64
        },
        n_total,
        n_retained,
        group_breakdown: None,
        significance: Vec::new(),
    }
}

fn retained_flags<'a>(
    test: &'a Dataset,
    decisions: &[Decision],
) -> Result<Vec<(&'a PredictionRecord, bool)>> {
    let mut by_id: BTreeMap<&str, bool> = BTreeMap::new();
    for d in decisions {
        if by_id.insert(d.id.as_str(), d.is_retained()).is_some() {
            return Err(Error::IdMismatch(alloc::format!(
                "duplicate decision for `{}`",
                d.id
            )));
        }
    }
    if by_id.len() != test.len() {
        return Err(Error::IdMismatch(alloc::format!(
            "{} decisions for {} records",
            by_id.len(),
            test.len()
        )));
    }
    test.records()
        .iter()
        .map(|r| {
            by_id
                .get(r.id.as_str())
                .map(|&keep| (r, keep))
                .ok_or_else(|| Error::IdMismatch(alloc::format!("no decision for `{}`", r.id)))
        })
        .collect()
}

/// Metrics over the retained records of `test`, with a per-group
/// breakdown when any record carries a group tag.
pub fn selective_report(test: &Dataset, decisions: &[Decision]) -> Result<SelectiveReport> {
    let flags = retained_flags(test, decisions)?;
    let mut report = block_report(&flags);
    if test.records().iter().any(|r| r.group.is_some()) {
        let mut groups: BTreeMap<String, Vec<(&PredictionRecord, bool)>> = BTreeMap::new();
        for &(r, keep) in &flags {
            let key = r.group.clone().unwrap_or_else(|| UNGROUPED.to_string());
            groups.entry(key).or_default().push((r, keep));
        }
        report.group_breakdown = Some(
            groups
                .into_iter()
                .map(|(k, v)| (k, block_report(&v)))
                .collect(),
        );
    }
    Ok(report)
}

/// Redraw cap for a single resample whose metric is undefined.
pub const MAX_REDRAWS: usize = 100;

fn paired_bootstrap<E, F>(
    exec: &E,
    n: usize,
    metric: Metric,
    resamples: usize,
    seed: u64,
    eval: F,
) -> Result<f64>
where
    E: Executor,
    F: Fn(&[usize]) -> Option<(f64, f64)> + Sync + Send,
{
    if resamples < 100 {
        return Err(domain("bootstrap needs at least 100 resamples"));
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let outcomes = exec.map_indexed(resamples, |r| {
        let base = rng::substream_seed(seed, r as u64);
        for attempt in 0..MAX_REDRAWS {
            let mut g = rng::stream(rng::substream_seed(base, attempt as u64));
            let idx: Vec<usize> = (0..n).map(|_| g.random_range(0..n)).collect();
            if let Some((a, b)) = eval(&idx) {
                return Ok(a <= b);
            }
        }
        Err(Error::MetricUndefined {
            metric: metric.name(),
            resample: r,
            attempts: MAX_REDRAWS,
        })
    });
    let mut not_better = 0usize;
    for o in outcomes {
        not_better += usize::from(o?);
    }
    Ok(not_better as f64 / resamples as f64)
}

/// Paired bootstrap test of `metric(a) > metric(b)` over shared ids.
pub fn bootstrap_significance(
    a: &Dataset,
    b: &Dataset,
    metric: Metric,
    resamples: usize,
    seed: u64,
) -> Result<SignificanceResult> {
    bootstrap_significance_with(&Sequential, a, b, metric, resamples, seed)
}

pub fn bootstrap_significance_with<E: Executor>(
    exec: &E,
    a: &Dataset,
    b: &Dataset,
    metric: Metric,
    resamples: usize,
    seed: u64,
) -> Result<SignificanceResult> {
    if a.len() != b.len() {
        return Err(Error::UnpairedIds);
    }
    let b_by_id: BTreeMap<&str, &PredictionRecord> =
        b.records().iter().map(|r| (r.id.as_str(), r)).collect();
    let pairs: Vec<(&PredictionRecord, &PredictionRecord)> = a
        .records()
        .iter()
        .map(|ra| b_by_id.get(ra.id.as_str()).map(|rb| (ra, *rb)))
        .collect::<Option<_>>()
        .ok_or(Error::UnpairedIds)?;

    let undefined = || Error::DegenerateLabels("metric undefined on the full paired sets");
    let delta = metric.evaluate(a.records()).ok_or_else(undefined)?
        - metric.evaluate(b.records()).ok_or_else(undefined)?;

    let p_value = paired_bootstrap(exec, pairs.len(), metric, resamples, seed, |idx| {
        let sa: Vec<&PredictionRecord> = idx.iter().map(|&i| pairs[i].0).collect();
        let sb: Vec<&PredictionRecord> = idx.iter().map(|&i| pairs[i].1).collect();
        Some((metric.evaluate(&sa)?, metric.evaluate(&sb)?))
    })?;
    Ok(SignificanceResult {
        metric,
        delta,
        p_value,
        resamples,
    })
}

/// Paired bootstrap of retained-set metric against the full-set metric on
/// the same resample of `test`. `delta` is retained minus full.
pub fn selective_significance_with<E: Executor>(
    exec: &E,
    test: &Dataset,
    decisions: &[Decision],
    metric: Metric,
    resamples: usize,
    seed: u64,
) -> Result<SignificanceResult> {
    let flags = retained_flags(test, decisions)?;
    let undefined = || Error::DegenerateLabels("metric undefined on the observed sets");
    let retained: Vec<&PredictionRecord> = flags.iter().filter(|x| x.1).map(|x| x.0).collect();
    let delta = metric.evaluate(&retained).ok_or_else(undefined)?
        - metric.evaluate(test.records()).ok_or_else(undefined)?;

    let p_value = paired_bootstrap(exec, flags.len(), metric, resamples, seed, |idx| {
        let full: Vec<&PredictionRecord> = idx.iter().map(|&i| flags[i].0).collect();
        let kept: Vec<&PredictionRecord> = idx
            .iter()
            .filter(|&&i| flags[i].1)
            .map(|&i| flags[i].0)
            .collect();
        Some((metric.evaluate(&kept)?, metric.evaluate(&full)?))
    })?;
    Ok(SignificanceResult {
        metric,
        delta,
        p_value,
        resamples,
    })
}

//! Score records, datasets, temporal splits and the synthetic scorer.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::NaiveDate;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{domain, Error, Result};
use crate::rng;

/// One scored item: predicted success probability and observed outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub id: String,
    pub score: f64,
    pub label: u8,
    pub date: Option<NaiveDate>,
    pub group: Option<String>,
}

impl PredictionRecord {
    pub fn new(id: impl Into<String>, score: f64, label: u8) -> Self {
        Self {
            id: id.into(),
            score,
            label,
            date: None,
            group: None,
        }
    }

    pub fn with_date(mut self, date: NaiveDate) -> Self {
        self.date = Some(date);
        self
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }

    /// Checks the per-record invariants, reporting the offending field.
    pub fn validate(&self) -> core::result::Result<(), (&'static str, String)> {
        if self.id.is_empty() {
            return Err(("id", "empty id".to_string()));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(("score", format!("{} is outside [0, 1]", self.score)));
        }
        if self.label > 1 {
            return Err(("label", format!("{} is not 0 or 1", self.label)));
        }
        Ok(())
    }
}

/// Ordered, id-unique collection of records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<PredictionRecord>,
    provenance: String,
}

impl Dataset {
    pub fn new(records: Vec<PredictionRecord>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (index, r) in records.iter().enumerate() {
            r.validate()
                .map_err(|(field, reason)| Error::InvalidRecord {
                    index,
                    field,
                    reason,
                })?;
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self {
            records,
            provenance: provenance.into(),
        })
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.records.iter().filter(|r| r.label == 1).count()
    }

    pub fn into_records(self) -> Vec<PredictionRecord> {
        self.records
    }

    // Subsets of a valid dataset stay valid.
    fn subset(&self, keep: impl Fn(usize, &PredictionRecord) -> bool, tag: &str) -> Dataset {
        Dataset {
            records: self
                .records
                .iter()
                .enumerate()
                .filter(|(i, r)| keep(*i, r))
                .map(|(_, r)| r.clone())
                .collect(),
            provenance: format!("{}#{}", self.provenance, tag),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub split_date: NaiveDate,
}

/// Train gets records dated strictly before the split date, test the rest.
pub fn temporal_split(d: &Dataset, s: SplitSpec) -> Result<(Dataset, Dataset)> {
    let missing: Vec<String> = d
        .records
        .iter()
        .filter(|r| r.date.is_none())
        .map(|r| r.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingDate(missing));
    }
    let before = |_: usize, r: &PredictionRecord| r.date.is_some_and(|x| x < s.split_date);
    let train = d.subset(before, "train");
    let test = d.subset(|i, r| !before(i, r), "test");
    Ok((train, test))
}

/// Splits off a seeded random `fraction` of `d` as a calibration set.
///
/// Returns `(rest, calib)`; both keep the original record order. The
/// calibration part gets `round(fraction * n)` records, at least one.
pub fn carve_fraction(d: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(domain("calibration fraction must lie in (0, 1]"));
    }
    if d.is_empty() {
        return Err(Error::EmptyCalibrationSet);
    }
    let n = d.len();
    let take = (libm::round(fraction * n as f64) as usize).clamp(1, n);
    let mut rng = rng::stream(seed);
    let mut picked = alloc::vec![false; n];
    for i in index::sample(&mut rng, n, take) {
        picked[i] = true;
    }
    let rest = d.subset(|i, _| !picked[i], "rest");
    let calib = d.subset(|i, _| picked[i], "calib");
    Ok((rest, calib))
}

/// Label-conditional beta score model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticScorerSpec {
    pub n: usize,
    pub prevalence: f64,
    pub pos_shape: (f64, f64),
    pub neg_shape: (f64, f64),
    pub seed: u64,
}

impl SyntheticScorerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(domain("synthetic sample count must be at least 1"));
        }
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return Err(domain("prevalence must lie strictly between 0 and 1"));
        }
        let positive = |(a, b): (f64, f64)| a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite();
        if !positive(self.pos_shape) || !positive(self.neg_shape) {
            return Err(domain("beta shape parameters must be positive and finite"));
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticScorerSpec) -> Result<Dataset> {
    spec.validate()?;
    let pos = Beta::new(spec.pos_shape.0, spec.pos_shape.1)
        .map_err(|_| domain("invalid positive beta shape"))?;
    let neg = Beta::new(spec.neg_shape.0, spec.neg_shape.1)
        .map_err(|_| domain("invalid negative beta shape"))?;
    let mut rng = rng::stream(spec.seed);
    let records = (0..spec.n)
        .map(|i| {
            let label = u8::from(rng.random::<f64>() < spec.prevalence);
            let score: f64 = if label == 1 {
                pos.sample(&mut rng)
            } else {
                neg.sample(&mut rng)
            };
            PredictionRecord::new(format!("syn-{i}"), score.clamp(0.0, 1.0), label)
        })
        .collect();
    Dataset::new(
        records,
        format!(
            "synthetic(n={},prevalence={},pos=({},{}),neg=({},{}),seed={})",
            spec.n,
            spec.prevalence,
            spec.pos_shape.0,
            spec.pos_shape.1,
            spec.neg_shape.0,
            spec.neg_shape.1,
            spec.seed
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn spec(n: usize, seed: u64) -> SyntheticScorerSpec {
        SyntheticScorerSpec {
            n,
            prevalence: 0.5,
            pos_shape: (8.0, 2.0),
            neg_shape: (2.0, 8.0),
            seed,
        }
    }

    #[test]
    fn rejects_invalid_records() {
        let bad = Dataset::new(vec![PredictionRecord::new("a", 1.3, 1)], "t");
        assert!(matches!(
            bad,
            Err(Error::InvalidRecord {
                index: 0,
                field: "score",
                ..
            })
        ));
        let bad = Dataset::new(vec![PredictionRecord::new("a", 0.3, 2)], "t");
        assert!(matches!(
            bad,
            Err(Error::InvalidRecord { field: "label", .. })
        ));
        let bad = Dataset::new(vec![PredictionRecord::new("", 0.3, 1)], "t");
        assert!(matches!(bad, Err(Error::InvalidRecord { field: "id", .. })));
        let dup = Dataset::new(
            vec![
                PredictionRecord::new("a", 0.3, 1),
                PredictionRecord::new("a", 0.4, 0),
            ],
            "t",
        );
        assert_eq!(dup, Err(Error::DuplicateId("a".into())));
    }

    #[test]
    fn split_is_strict_on_train_side() {
        let d = Dataset::new(
            vec![
                PredictionRecord::new("a", 0.9, 1).with_date(date(2013, 1, 1)),
                PredictionRecord::new("b", 0.2, 0).with_date(date(2015, 1, 1)),
                PredictionRecord::new("c", 0.4, 0).with_date(date(2014, 8, 13)),
            ],
            "t",
        )
        .unwrap();
        let (train, test) = temporal_split(
            &d,
            SplitSpec {
                split_date: date(2014, 8, 13),
            },
        )
        .unwrap();
        let ids = |d: &Dataset| d.records().iter().map(|r| r.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&train), vec!["a"]);
        assert_eq!(ids(&test), vec!["b", "c"]);
    }

    #[test]
    fn split_all_after() {
        let d = Dataset::new(
            vec![
                PredictionRecord::new("a", 0.9, 1).with_date(date(2016, 1, 1)),
                PredictionRecord::new("b", 0.2, 0).with_date(date(2017, 1, 1)),
            ],
            "t",
        )
        .unwrap();
        let (train, test) = temporal_split(
            &d,
            SplitSpec {
                split_date: date(2014, 8, 13),
            },
        )
        .unwrap();
        assert!(train.is_empty());
        assert_eq!(test.records(), d.records());
    }

    #[test]
    fn split_reports_missing_dates() {
        let d = Dataset::new(
            vec![
                PredictionRecord::new("a", 0.9, 1).with_date(date(2016, 1, 1)),
                PredictionRecord::new("b", 0.2, 0),
            ],
            "t",
        )
        .unwrap();
        let err = temporal_split(
            &d,
            SplitSpec {
                split_date: date(2014, 8, 13),
            },
        )
        .unwrap_err();
        assert_eq!(err, Error::MissingDate(vec!["b".into()]));
    }

    #[test]
    fn synthetic_is_deterministic() {
        assert_eq!(
            generate_synthetic(&spec(500, 9)).unwrap(),
            generate_synthetic(&spec(500, 9)).unwrap()
        );
        assert_ne!(
            generate_synthetic(&spec(500, 9)).unwrap(),
            generate_synthetic(&spec(500, 10)).unwrap()
        );
    }

    #[test]
    fn synthetic_separates_classes() {
        let d = generate_synthetic(&spec(10_000, 3)).unwrap();
        let mean = |label: u8| {
            let xs: Vec<f64> = d
                .records()
                .iter()
                .filter(|r| r.label == label)
                .map(|r| r.score)
                .collect();
            xs.iter().sum::<f64>() / xs.len() as f64
        };
        // Beta(8,2) has mean 0.8, Beta(2,8) has mean 0.2.
        assert!(mean(1) > mean(0));
        assert!(libm::fabs(mean(1) - 0.8) < 0.01);
        assert!(libm::fabs(mean(0) - 0.2) < 0.01);
        let frac = d.positives() as f64 / d.len() as f64;
        assert!(libm::fabs(frac - 0.5) <= 0.02);
        assert!(d.records().iter().all(|r| r.id.starts_with("syn-")));
    }

    #[test]
    fn synthetic_rejects_bad_spec() {
        let mut s = spec(10, 1);
        s.prevalence = 1.0;
        assert!(generate_synthetic(&s).is_err());
        let mut s = spec(10, 1);
        s.pos_shape = (0.0, 1.0);
        assert!(generate_synthetic(&s).is_err());
        assert!(generate_synthetic(&spec(0, 1)).is_err());
    }

    #[test]
    fn carve_keeps_order_and_partitions() {
        let d = generate_synthetic(&spec(101, 4)).unwrap();
        let (rest, calib) = carve_fraction(&d, 0.2, 11).unwrap();
        assert_eq!(calib.len(), 20);
        assert_eq!(rest.len() + calib.len(), d.len());
        let pos = |id: &str| d.records().iter().position(|r| r.id == id).unwrap();
        for part in [&rest, &calib] {
            let idx: Vec<usize> = part.records().iter().map(|r| pos(&r.id)).collect();
            assert!(idx.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(carve_fraction(&d, 0.2, 11).unwrap(), (rest, calib));
        assert!(carve_fraction(&d, 0.0, 1).is_err());
    }
}

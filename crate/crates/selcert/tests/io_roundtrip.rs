use chrono::NaiveDate;
use proptest::prelude::*;
use selcert::io::{dataset_bytes, load_dataset, write_dataset, Format, ReadOptions};
use selcert_core::{Dataset, PredictionRecord};

fn record() -> impl Strategy<Value = (f64, u8, Option<i64>, Option<String>)> {
    (
        0.0f64..=1.0,
        0u8..=1,
        proptest::option::of(0i64..20_000),
        proptest::option::of("[a-z ,\"]{1,8}"),
    )
}

fn build(rows: Vec<(f64, u8, Option<i64>, Option<String>)>, dated: bool, grouped: bool) -> Dataset {
    let epoch = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
    let recs = rows
        .into_iter()
        .enumerate()
        .map(|(i, (score, label, day, group))| {
            let mut r = PredictionRecord::new(format!("id-{i}"), score, label);
            if dated {
                r = r.with_date(epoch + chrono::Days::new(day.unwrap_or(0) as u64));
            }
            if grouped {
                r = r.with_group(group.unwrap_or_else(|| "g".into()));
            }
            r
        })
        .collect();
    Dataset::new(recs, "prop").unwrap()
}

proptest! {
    #[test]
    fn write_then_load_is_identity(rows in proptest::collection::vec(record(), 1..40),
                                   dated in any::<bool>(), grouped in any::<bool>(),
                                   json in any::<bool>()) {
        let d = build(rows, dated, grouped);
        let fmt = if json { Format::Json } else { Format::Csv };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(if json { "d.json" } else { "d.csv" });
        write_dataset(&d, &path, fmt).unwrap();
        let back = load_dataset(&path, fmt, &ReadOptions::default()).unwrap();
        prop_assert_eq!(back.records(), d.records());
        prop_assert_eq!(dataset_bytes(&back, fmt).unwrap(), dataset_bytes(&d, fmt).unwrap());
    }
}

//! Score-record files.
//!
//! CSV needs a header naming `id,score,label` and optionally `date` and
//! `group`, in any order. JSON is an array of objects with the same keys.
//! A file is rejected as a whole on the first bad row; rows are numbered
//! from 1, not counting the header.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use selcert_core::{Dataset, PredictionRecord};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const ISO_DATE: &str = "%Y-%m-%d";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// `.json` means JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// How to read the `date` column.
#[derive(Debug, Clone)]
pub struct ReadOptions {
    pub date_format: String,
}

impl Default for ReadOptions {
    fn default() -> Self {
        Self {
            date_format: ISO_DATE.to_string(),
        }
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path, format: Format, opts: &ReadOptions) -> Result<Dataset> {
    let bytes = read_file(path)?;
    parse_dataset(&bytes, path, format, opts)
}

pub fn parse_dataset(
    bytes: &[u8],
    path: &Path,
    format: Format,
    opts: &ReadOptions,
) -> Result<Dataset> {
    let records = match format {
        Format::Csv => parse_csv(bytes, path, opts)?,
        Format::Json => parse_json(bytes, path, opts)?,
    };
    let mut seen = HashSet::new();
    for (i, r) in records.iter().enumerate() {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                row: i + 1,
                id: r.id.clone(),
            });
        }
    }
    Ok(Dataset::new(records, path.display().to_string())?)
}

struct RowCtx<'a> {
    path: &'a Path,
    row: usize,
}

impl RowCtx<'_> {
    fn err(&self, column: &str, message: impl Into<String>) -> Error {
        Error::Schema {
            path: self.path.to_path_buf(),
            row: self.row,
            column: column.to_string(),
            message: message.into(),
        }
    }

    fn id(&self, raw: &str) -> Result<String> {
        if raw.is_empty() {
            return Err(self.err("id", "empty id"));
        }
        Ok(raw.to_string())
    }

    fn score(&self, raw: &str) -> Result<f64> {
        let v: f64 = raw
            .trim()
            .parse()
            .map_err(|_| self.err("score", format!("`{raw}` is not a number")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(self.err("score", format!("{raw} is outside [0, 1]")));
        }
        Ok(v)
    }

    fn label(&self, raw: &str) -> Result<u8> {
        match raw.trim() {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(self.err("label", format!("`{other}` is not 0 or 1"))),
        }
    }

    fn date(&self, raw: &str, fmt: &str) -> Result<Option<NaiveDate>> {
        let raw = raw.trim();
        if raw.is_empty() {
            return Ok(None);
        }
        NaiveDate::parse_from_str(raw, fmt)
            .map(Some)
            .map_err(|e| self.err("date", format!("`{raw}` does not match `{fmt}`: {e}")))
    }
}

const COLUMNS: [&str; 5] = ["id", "score", "label", "date", "group"];

fn parse_csv(bytes: &[u8], path: &Path, opts: &ReadOptions) -> Result<Vec<PredictionRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    let header = rdr.headers().map_err(|e| Error::format(path, e))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::format(path, "missing header row"));
    }
    let mut pos = [None; 5];
    for (i, name) in header.iter().enumerate() {
        let name = name.trim();
        let slot = COLUMNS
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::Schema {
                path: path.to_path_buf(),
                row: 0,
                column: name.to_string(),
                message: "unknown column".into(),
            })?;
        if pos[slot].replace(i).is_some() {
            return Err(Error::format(
                path,
                format!("column `{name}` appears twice"),
            ));
        }
    }
    for required in 0..3 {
        if pos[required].is_none() {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                row: 0,
                column: COLUMNS[required].to_string(),
                message: "required column missing from header".into(),
            });
        }
    }

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let ctx = RowCtx { path, row: i + 1 };
        let rec = rec.map_err(|e| ctx.err("*", e.to_string()))?;
        let cell = |slot: usize| pos[slot].and_then(|p| rec.get(p)).unwrap_or("");
        let mut r =
            PredictionRecord::new(ctx.id(cell(0))?, ctx.score(cell(1))?, ctx.label(cell(2))?);
        r.date = ctx.date(cell(3), &opts.date_format)?;
        let group = cell(4);
        if !group.is_empty() {
            r.group = Some(group.to_string());
        }
        out.push(r);
    }
    Ok(out)
}

fn parse_json(bytes: &[u8], path: &Path, opts: &ReadOptions) -> Result<Vec<PredictionRecord>> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| Error::format(path, e))?;
    let rows = value
        .as_array()
        .ok_or_else(|| Error::format(path, "expected a JSON array of records"))?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let ctx = RowCtx { path, row: i + 1 };
            let obj = row
                .as_object()
                .ok_or_else(|| ctx.err("*", "row is not an object"))?;
            json_record(obj, &ctx, opts)
        })
        .collect()
}

fn json_record(
    obj: &Map<String, Value>,
    ctx: &RowCtx<'_>,
    opts: &ReadOptions,
) -> Result<PredictionRecord> {
    if let Some(k) = obj.keys().find(|k| !COLUMNS.contains(&k.as_str())) {
        return Err(ctx.err(k, "unknown key"));
    }
    let string = |key: &str| -> Result<Option<&str>> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(ctx.err(key, "expected a string")),
        }
    };
    let id = string("id")?.ok_or_else(|| ctx.err("id", "missing"))?;
    let score = match obj.get("score") {
        Some(Value::Number(n)) => ctx.score(&n.to_string())?,
        Some(_) => return Err(ctx.err("score", "expected a number")),
        None => return Err(ctx.err("score", "missing")),
    };
    let label = match obj.get("label") {
        Some(Value::Number(n)) => ctx.label(&n.to_string())?,
        Some(_) => return Err(ctx.err("label", "expected 0 or 1")),
        None => return Err(ctx.err("label", "missing")),
    };
    let mut r = PredictionRecord::new(ctx.id(id)?, score, label);
    if let Some(d) = string("date")? {
        r.date = ctx.date(d, &opts.date_format)?;
    }
    r.group = string("group")?
        .filter(|g| !g.is_empty())
        .map(str::to_string);
    Ok(r)
}

/// Serializes `d` in `format`. Scores use the shortest round-trip decimal,
/// so reading the output back reproduces every field exactly. Dates are
/// written in ISO form.
pub fn dataset_bytes(d: &Dataset, format: Format) -> Result<Vec<u8>> {
    let has_date = d.records().iter().any(|r| r.date.is_some());
    let has_group = d.records().iter().any(|r| r.group.is_some());
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["id", "score", "label"];
            if has_date {
                header.push("date");
            }
            if has_group {
                header.push("group");
            }
            let to_err = |e: csv::Error| Error::format(PathBuf::from(d.provenance()), e);
            w.write_record(&header).map_err(to_err)?;
            for r in d.records() {
                let mut row = vec![r.id.clone(), r.score.to_string(), r.label.to_string()];
                if has_date {
                    row.push(
                        r.date
                            .map(|x| x.format(ISO_DATE).to_string())
                            .unwrap_or_default(),
                    );
                }
                if has_group {
                    row.push(r.group.clone().unwrap_or_default());
                }
                w.write_record(&row).map_err(to_err)?;
            }
            w.into_inner()
                .map_err(|e| Error::format(PathBuf::from(d.provenance()), e.error()))
        }
        Format::Json => {
            let rows: Vec<Value> = d
                .records()
                .iter()
                .map(|r| {
                    let mut m = Map::new();
                    m.insert("id".into(), Value::from(r.id.clone()));
                    m.insert("score".into(), Value::from(r.score));
                    m.insert("label".into(), Value::from(r.label));
                    if let Some(x) = r.date {
                        m.insert("date".into(), Value::from(x.format(ISO_DATE).to_string()));
                    }
                    if let Some(g) = &r.group {
                        m.insert("group".into(), Value::from(g.clone()));
                    }
                    Value::Object(m)
                })
                .collect();
            let mut out = serde_json::to_vec_pretty(&rows)
                .map_err(|e| Error::format(PathBuf::from(d.provenance()), e))?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

pub fn write_dataset(d: &Dataset, path: &Path, format: Format) -> Result<()> {
    write_file(path, &dataset_bytes(d, format)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, format: Format) -> Result<Dataset> {
        parse_dataset(
            text.as_bytes(),
            Path::new("mem"),
            format,
            &ReadOptions::default(),
        )
    }

    #[test]
    fn csv_in_file_order() {
        let d = parse("id,score,label\nt1,0.9,1\nt2,0.2,0\n", Format::Csv).unwrap();
        let ids: Vec<&str> = d.records().iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["t1", "t2"]);
        assert_eq!(d.records()[0].score, 0.9);
        assert_eq!(d.records()[1].label, 0);
    }

    #[test]
    fn csv_out_of_range_score_names_row_and_column() {
        match parse("id,score,label\nt1,1.3,1\n", Format::Csv) {
            Err(Error::Schema { row, column, .. }) => {
                assert_eq!((row, column.as_str()), (1, "score"))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            parse("id,score,label\nt1,0.3,2\n", Format::Csv),
            Err(Error::Schema { row: 1, .. })
        ));
        assert!(matches!(
            parse("id,score,label\nt1,0.3,1\nt1,0.2,0\n", Format::Csv),
            Err(Error::DuplicateId { row: 2, .. })
        ));
        assert!(matches!(
            parse("id,score\nt1,0.3\n", Format::Csv),
            Err(Error::Schema { row: 0, .. })
        ));
        assert!(matches!(
            parse("id,score,label,extra\nt1,0.3,1,x\n", Format::Csv),
            Err(Error::Schema { row: 0, .. })
        ));
        assert!(matches!(
            parse("id,score,label,date\nt1,0.3,1,08/13/2014\n", Format::Csv),
            Err(Error::Schema { row: 1, .. })
        ));
        assert!(parse("", Format::Csv).is_err());
        assert_eq!(parse("id,score,label\n", Format::Csv).unwrap().len(), 0);
    }

    #[test]
    fn csv_optional_columns_and_date_override() {
        let text = "group,id,label,score,date\nNeoplasm,t1,1,0.9,08/13/2014\n,t2,0,0.1,\n";
        let opts = ReadOptions {
            date_format: "%m/%d/%Y".into(),
        };
        let d = parse_dataset(text.as_bytes(), Path::new("mem"), Format::Csv, &opts).unwrap();
        assert_eq!(d.records()[0].date, NaiveDate::from_ymd_opt(2014, 8, 13));
        assert_eq!(d.records()[0].group.as_deref(), Some("Neoplasm"));
        assert_eq!(d.records()[1].date, None);
        assert_eq!(d.records()[1].group, None);
    }

    #[test]
    fn json_records() {
        let d = parse(
            r#"[{"id":"a","score":0.25,"label":0,"date":"2015-01-02"},{"id":"b","score":1,"label":1,"group":"g"}]"#,
            Format::Json,
        )
        .unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.records()[1].score, 1.0);
        assert!(matches!(
            parse(r#"[{"id":"a","score":0.25}]"#, Format::Json),
            Err(Error::Schema { row: 1, .. })
        ));
        assert!(matches!(
            parse(r#"[{"id":"a","score":1.5,"label":1}]"#, Format::Json),
            Err(Error::Schema { row: 1, .. })
        ));
        assert!(parse(r#"{"id":"a"}"#, Format::Json).is_err());
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(Format::from_path(Path::new("x.JSON")), Format::Json);
        assert_eq!(Format::from_path(Path::new("x.csv")), Format::Csv);
        assert_eq!(Format::from_path(Path::new("x")), Format::Csv);
    }
}

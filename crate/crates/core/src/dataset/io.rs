//! CSV formats for member records and labelled datasets.
//!
//! Monthly file: `member_id,month,attr,value`. Static file:
//! `member_id,attr,value`, where the reserved attributes `account_open_month`
//! and `account_close_month` carry the account lifetime. Dataset file:
//! `member_id,<feature...>,label` with nominal features written as category
//! names.

use std::collections::HashMap;
use std::io::{Read, Write};

use ndarray::Array2;

use super::{FeatureKind, FeatureSpec, LabeledDataset, MemberRecord};
use crate::error::{Error, Result};

const OPEN_ATTR: &str = "account_open_month";
const CLOSE_ATTR: &str = "account_close_month";

pub(super) fn write_dataset<W: Write>(ds: &LabeledDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["member_id".to_string()];
    header.extend(ds.specs().iter().map(|s| s.name.clone()));
    header.push("label".to_string());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for (i, values) in ds.features().outer_iter().enumerate() {
        row.clear();
        row.push(ds.member_ids()[i].clone());
        for (spec, v) in ds.specs().iter().zip(values.iter()) {
            row.push(match &spec.kind {
                FeatureKind::Numeric => format!("{v}"),
                FeatureKind::Nominal { categories } => categories
                    .get(*v as usize)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("bad category code {v} in `{}`", spec.name)))?,
            });
        }
        row.push(ds.labels()[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns whose every value parses as a float are numeric; any other column
/// is nominal with lexicographically ordered categories.
pub(super) fn read_dataset<R: Read>(reader: R) -> Result<LabeledDataset> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 || header[0] != "member_id" || header.last().map(String::as_str) != Some("label") {
        return Err(Error::invalid("dataset CSV header must be member_id,...,label"));
    }
    let names = &header[1..header.len() - 1];
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::invalid(format!("row with {} fields, expected {}", rec.len(), header.len())));
        }
        ids.push(rec[0].to_string());
        let label: u8 = rec[rec.len() - 1]
            .parse()
            .map_err(|_| Error::invalid(format!("bad label `{}`", &rec[rec.len() - 1])))?;
        labels.push(label);
        for (j, col) in cells.iter_mut().enumerate() {
            col.push(rec[j + 1].to_string());
        }
    }
    let n = ids.len();
    let mut features = Array2::<f64>::zeros((n, names.len()));
    let mut specs = Vec::with_capacity(names.len());
    for (j, (name, col)) in names.iter().zip(&cells).enumerate() {
        let parsed: Option<Vec<f64>> = col.iter().map(|c| c.parse::<f64>().ok()).collect();
        match parsed {
            Some(values) => {
                for (i, v) in values.into_iter().enumerate() {
                    features[[i, j]] = v;
                }
                specs.push(FeatureSpec::numeric(name.clone()));
            }
            None => {
                let mut cats: Vec<String> = col.clone();
                cats.sort();
                cats.dedup();
                for (i, c) in col.iter().enumerate() {
                    features[[i, j]] = cats.binary_search(c).expect("collected") as f64;
                }
                specs.push(FeatureSpec::nominal(name.clone(), cats));
            }
        }
    }
    LabeledDataset::new(features, labels, specs, ids)
}

/// Writes the monthly and static record files.
pub fn write_records<W1: Write, W2: Write>(
    records: &[MemberRecord],
    monthly: W1,
    statics: W2,
) -> Result<()> {
    let mut m = csv::Writer::from_writer(monthly);
    m.write_record(["member_id", "month", "attr", "value"])?;
    let mut s = csv::Writer::from_writer(statics);
    s.write_record(["member_id", "attr", "value"])?;
    for r in records {
        s.write_record([r.member_id.as_str(), OPEN_ATTR, &r.account_open_month.to_string()])?;
        if let Some(c) = r.account_close_month {
            s.write_record([r.member_id.as_str(), CLOSE_ATTR, &c.to_string()])?;
        }
        for (attr, value) in &r.static_attributes {
            s.write_record([r.member_id.as_str(), attr, value])?;
        }
        for (month, attrs) in &r.monthly_attributes {
            for (attr, value) in attrs {
                m.write_record([r.member_id.as_str(), &month.to_string(), attr, &format!("{value}")])?;
            }
        }
    }
    m.flush()?;
    s.flush()?;
    Ok(())
}

/// Reads records back; member order follows first appearance in the static file.
pub fn read_records<R1: Read, R2: Read>(monthly: R1, statics: R2) -> Result<Vec<MemberRecord>> {
    struct Partial {
        id: String,
        open: Option<i64>,
        close: Option<i64>,
        statics: Vec<(String, String)>,
    }
    let mut order: Vec<Partial> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();

    let mut s = csv::Reader::from_reader(statics);
    check_header(s.headers()?, &["member_id", "attr", "value"])?;
    for rec in s.records() {
        let rec = rec?;
        let id = rec[0].to_string();
        let k = *index.entry(id.clone()).or_insert_with(|| {
            order.push(Partial {
                id,
                open: None,
                close: None,
                statics: Vec::new(),
            });
            order.len() - 1
        });
        let p = &mut order[k];
        match &rec[1] {
            OPEN_ATTR => p.open = Some(parse_month(&rec[2])?),
            CLOSE_ATTR => p.close = Some(parse_month(&rec[2])?),
            attr => p.statics.push((attr.to_string(), rec[2].to_string())),
        }
    }

    let mut records = order
        .into_iter()
        .map(|p| {
            let open = p
                .open
                .ok_or_else(|| Error::invalid(format!("member {}: missing {OPEN_ATTR}", p.id)))?;
            let mut r = MemberRecord::new(p.id, open, p.close)?;
            for (a, v) in p.statics {
                r.set_static(&a, v);
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut m = csv::Reader::from_reader(monthly);
    check_header(m.headers()?, &["member_id", "month", "attr", "value"])?;
    for rec in m.records() {
        let rec = rec?;
        let k = *index
            .get(&rec[0])
            .ok_or_else(|| Error::invalid(format!("monthly row for unknown member {}", &rec[0])))?;
        let value: f64 = rec[3]
            .parse()
            .map_err(|_| Error::invalid(format!("bad value `{}`", &rec[3])))?;
        records[k].set_monthly(parse_month(&rec[1])?, &rec[2], value)?;
    }
    Ok(records)
}

fn parse_month(s: &str) -> Result<i64> {
    s.parse().map_err(|_| Error::invalid(format!("bad month `{s}`")))
}

fn check_header(h: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if h.iter().eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("expected CSV header {}", expected.join(","))))
    }
}

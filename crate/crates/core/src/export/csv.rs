//! CSV rendering and parsing of flow records.
//!
//! The column set is the enabled features in catalog order, plus an
//! optional trailing `label` column carrying the malicious flag. Values
//! are decimal unsigned integers except the two address columns, which
//! render as dotted quads (and parse from either form).

use std::fmt::Write;
use std::net::Ipv4Addr;

use thiserror::Error;

use crate::catalog::{FeatureId, FeatureMask};
use crate::flowtable::FlowRecord;

pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("empty input: missing header line")]
    MissingHeader,
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("duplicate column {0:?}")]
    DuplicateColumn(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    RowWidth { line: usize, expected: usize, found: usize },
    #[error("line {line}, column {column}: bad value {value:?}")]
    BadValue { line: usize, column: String, value: String },
}

fn is_addr(f: FeatureId) -> bool {
    matches!(f, FeatureId::Ipv4SrcAddr | FeatureId::Ipv4DstAddr)
}

fn push_value(out: &mut String, rec: &FlowRecord, f: FeatureId) {
    let v = rec.feature(f);
    if is_addr(f) {
        let _ = write!(out, "{}", Ipv4Addr::from(v as u32));
    } else {
        let _ = write!(out, "{v}");
    }
}

/// Render records as CSV. Rows are ordered by (first_ts, slot index).
/// With `include_label`, a trailing `label` column carries each record's
/// malicious flag.
pub fn render_csv(records: &[FlowRecord], mask: FeatureMask, include_label: bool) -> String {
    let mut order: Vec<&FlowRecord> = records.iter().collect();
    order.sort_by_key(|r| (r.first_ts, r.slot));

    let mut out = String::new();
    let mut first = true;
    for f in mask.iter() {
        if !first {
            out.push(',');
        }
        out.push_str(f.name());
        first = false;
    }
    if include_label {
        if !first {
            out.push(',');
        }
        out.push_str(LABEL_COLUMN);
    }
    out.push('\n');

    for rec in order {
        let mut first = true;
        for f in mask.iter() {
            if !first {
                out.push(',');
            }
            push_value(&mut out, rec, f);
            first = false;
        }
        if include_label {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{}", rec.malicious_flag);
        }
        out.push('\n');
    }
    out
}

/// Render records as CSV with the enabled feature columns only.
pub fn to_csv(records: &[FlowRecord], mask: FeatureMask) -> String {
    render_csv(records, mask, false)
}

/// Parsed CSV content: reconstructed records, the column mask, and labels
/// when the input carried a `label` column.
pub struct CsvFlows {
    pub records: Vec<FlowRecord>,
    pub mask: FeatureMask,
    pub labels: Option<Vec<u8>>,
}

enum Column {
    Feature(FeatureId),
    Label,
}

fn parse_value(raw: &str, f: FeatureId, line: usize) -> Result<u64, CsvError> {
    let bad = || CsvError::BadValue {
        line,
        column: f.name().to_string(),
        value: raw.to_string(),
    };
    let value = if is_addr(f) && raw.contains('.') {
        u64::from(u32::from(raw.parse::<Ipv4Addr>().map_err(|_| bad())?))
    } else {
        raw.parse::<u64>().map_err(|_| bad())?
    };
    if value > f.max_value() {
        return Err(bad());
    }
    Ok(value)
}

/// Parse CSV text produced by [`render_csv`] (or hand-written in the same
/// shape). Column order is free; unknown columns are rejected.
pub fn read_records_csv(text: &str) -> Result<CsvFlows, CsvError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(CsvError::MissingHeader)?;
    if header.trim().is_empty() {
        return Err(CsvError::MissingHeader);
    }

    let mut columns = Vec::new();
    let mut mask = FeatureMask::empty();
    let mut has_label = false;
    for name in header.split(',') {
        let name = name.trim();
        if name == LABEL_COLUMN {
            if has_label {
                return Err(CsvError::DuplicateColumn(name.to_string()));
            }
            has_label = true;
            columns.push(Column::Label);
            continue;
        }
        let f = FeatureId::from_name(name)
            .ok_or_else(|| CsvError::UnknownColumn(name.to_string()))?;
        if mask.contains(f) {
            return Err(CsvError::DuplicateColumn(name.to_string()));
        }
        mask.insert(f);
        columns.push(Column::Feature(f));
    }

    let mut records = Vec::new();
    let mut labels = Vec::new();
    for (idx, row) in lines {
        let line = idx + 1;
        if row.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != columns.len() {
            return Err(CsvError::RowWidth {
                line,
                expected: columns.len(),
                found: cells.len(),
            });
        }
        let mut rec = FlowRecord::blank();
        for (col, raw) in columns.iter().zip(&cells) {
            let raw = raw.trim();
            match col {
                Column::Feature(f) => {
                    rec.set_feature(*f, parse_value(raw, *f, line)?);
                }
                Column::Label => {
                    let v: u64 = raw.parse().map_err(|_| CsvError::BadValue {
                        line,
                        column: LABEL_COLUMN.to_string(),
                        value: raw.to_string(),
                    })?;
                    if v > 1 {
                        return Err(CsvError::BadValue {
                            line,
                            column: LABEL_COLUMN.to_string(),
                            value: raw.to_string(),
                        });
                    }
                    rec.malicious_flag = v as u8;
                    labels.push(v as u8);
                }
            }
        }
        records.push(rec);
    }

    Ok(CsvFlows {
        records,
        mask,
        labels: has_label.then_some(labels),
    })
}

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::time::parse_timestamp;
use super::{activity_label, EventLog, RawEvent, RawTrace};
use crate::error::{Error, Result};

/// Column mapping for CSV event logs.
///
/// `timestamp_fmt` is a chrono `strftime` pattern, or `"rfc3339"` / absent for
/// ISO-8601 timestamps. Date-only patterns (e.g. `%d/%m/%Y`) read as midnight UTC.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub case_col: String,
    pub activity_col: String,
    pub timestamp_col: String,
    #[serde(default)]
    pub timestamp_fmt: Option<String>,
    #[serde(default)]
    pub attr_cols: Vec<String>,
    #[serde(default)]
    pub lifecycle_col: Option<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

impl ColumnMap {
    pub fn new(case_col: &str, activity_col: &str, timestamp_col: &str) -> Self {
        Self {
            case_col: case_col.into(),
            activity_col: activity_col.into(),
            timestamp_col: timestamp_col.into(),
            timestamp_fmt: None,
            attr_cols: Vec::new(),
            lifecycle_col: None,
            delimiter: ',',
        }
    }
}

pub fn parse_csv(bytes: &[u8], map: &ColumnMap) -> Result<EventLog> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(map.delimiter as u8)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader.headers()?.clone();
    let mut position = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        if position.insert(h.to_owned(), i).is_some() {
            return Err(Error::Invalid(format!("duplicate CSV column {h:?}")));
        }
    }
    let col = |name: &str| {
        position
            .get(name)
            .copied()
            .ok_or_else(|| Error::Invalid(format!("unknown CSV column {name:?}")))
    };
    let case_i = col(&map.case_col)?;
    let act_i = col(&map.activity_col)?;
    let ts_i = col(&map.timestamp_col)?;
    let life_i = map.lifecycle_col.as_deref().map(col).transpose()?;
    let attr_i = map
        .attr_cols
        .iter()
        .map(|c| col(c))
        .collect::<Result<Vec<_>>>()?;

    let mut order: Vec<String> = Vec::new();
    let mut cases: HashMap<String, Vec<RawEvent>> = HashMap::new();
    for (row_idx, record) in reader.records().enumerate() {
        // header is line 1
        let row = row_idx + 2;
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let case = field(case_i).to_owned();
        let ts_raw = field(ts_i);
        let timestamp = parse_timestamp(ts_raw, map.timestamp_fmt.as_deref()).ok_or_else(|| {
            Error::CsvRow {
                row,
                message: format!("unparseable timestamp {ts_raw:?}"),
            }
        })?;
        let lifecycle = life_i.map(field);
        let event = RawEvent {
            activity: activity_label(field(act_i), lifecycle),
            timestamp,
            attrs: attr_i
                .iter()
                .map(|&i| Some(field(i)).filter(|s| !s.is_empty()).map(str::to_owned))
                .collect(),
        };
        cases
            .entry(case.clone())
            .or_insert_with(|| {
                order.push(case);
                Vec::new()
            })
            .push(event);
    }
    let traces = order
        .into_iter()
        .map(|case_id| {
            let events = cases.remove(&case_id).unwrap_or_default();
            RawTrace { case_id, events }
        })
        .collect();
    Ok(EventLog::from_raw(traces, map.attr_cols.clone()))
}

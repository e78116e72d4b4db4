use std::collections::BTreeMap;
use std::path::Path;

use ndarray::s;
use serde::{Deserialize, Serialize};

use crate::encoding::{normalize, to_place_graph, Encoder};
use crate::error::{Error, Result};
use crate::eventlog::{parse_timestamp, EventLog, RawEvent, RawTrace};
use crate::model::{adjacency_as, load_checkpoint, Model};
use crate::petrinet::PetriNet;

/// One event of a running case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseEvent {
    pub activity: String,
    /// RFC 3339 or ISO-8601 date-time.
    pub timestamp: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub activity: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub prefix_len: usize,
    /// The `top_k` most likely next activities, most likely first.
    pub top: Vec<Ranked>,
    /// Every class in class order.
    pub probabilities: Vec<Ranked>,
}

/// Accepts `{"events": [...]}` or a bare array of events.
pub fn parse_case_json(bytes: &[u8]) -> Result<Vec<CaseEvent>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Doc {
        Wrapped { events: Vec<CaseEvent> },
        Bare(Vec<CaseEvent>),
    }
    Ok(match serde_json::from_slice(bytes)? {
        Doc::Wrapped { events } | Doc::Bare(events) => events,
    })
}

/// CSV with `activity` and `timestamp` columns; every other column is an
/// attribute of that name.
pub fn parse_case_csv(bytes: &[u8]) -> Result<Vec<CaseEvent>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Invalid(format!("case CSV has no {name:?} column")))
    };
    let (act, ts) = (find("activity")?, find("timestamp")?);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let attributes = headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != act && i != ts)
            .map(|(i, h)| (h.to_owned(), record.get(i).unwrap_or("").to_owned()))
            .collect();
        out.push(CaseEvent {
            activity: record.get(act).unwrap_or("").to_owned(),
            timestamp: record.get(ts).unwrap_or("").to_owned(),
            attributes,
        });
    }
    Ok(out)
}

/// Probabilities of the next activity after the given events.
pub fn predict(
    model: &Model<f32>,
    encoder: &Encoder,
    net: &PetriNet,
    case: &[CaseEvent],
    top_k: usize,
) -> Result<PredictionReport> {
    if case.is_empty() {
        return Err(Error::Invalid("a case needs at least one event".into()));
    }
    let mut events = Vec::with_capacity(case.len());
    for (i, e) in case.iter().enumerate() {
        if encoder.activity_vocab.get(&e.activity).is_none() {
            log::warn!("activity {:?} was not seen in training", e.activity);
        }
        let timestamp = parse_timestamp(&e.timestamp, None)
            .ok_or_else(|| Error::Invalid(format!("event {i}: unparseable timestamp {:?}", e.timestamp)))?;
        events.push(RawEvent {
            activity: e.activity.clone(),
            timestamp,
            attrs: encoder.attr_names.iter().map(|n| e.attributes.get(n).cloned()).collect(),
        });
    }
    let log = EventLog::from_raw(
        vec![RawTrace {
            case_id: String::new(),
            events,
        }],
        encoder.attr_names.clone(),
    );
    let trace = encoder
        .encode_log(net, &log)?
        .pop()
        .ok_or_else(|| Error::Invalid("case has no events".into()))?;
    let k = trace.len();
    let start = k.saturating_sub(encoder.max_len.max(1));
    let a_hat = adjacency_as::<f32>(&normalize(&to_place_graph(net).adjacency));
    let probs = model.probabilities(
        &a_hat,
        trace.nodes.slice(s![start.., .., ..]),
        trace.attrs.slice(s![start.., ..]),
    )?;
    let last = probs.row(probs.nrows() - 1);
    let probabilities: Vec<Ranked> = last
        .iter()
        .enumerate()
        .map(|(c, &p)| Ranked {
            activity: encoder.class_label(c).unwrap_or_default().to_owned(),
            probability: f64::from(p),
        })
        .collect();
    let mut top = probabilities.clone();
    top.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    top.truncate(top_k);
    Ok(PredictionReport {
        prefix_len: k,
        top,
        probabilities,
    })
}

pub fn predict_from_checkpoint(dir: &Path, case: &[CaseEvent], top_k: usize) -> Result<PredictionReport> {
    let (model, encoder, net) = load_checkpoint(dir, None)?;
    predict(&model, &encoder, &net, case, top_k)
}

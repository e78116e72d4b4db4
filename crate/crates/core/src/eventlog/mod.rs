//! Event logs: parsing, vocabularies, prefixes and time features.
//!
//! A log is a set of traces, each a non-empty, time-ordered sequence of
//! events sharing a case id. Activities and categorical attributes are stored
//! as indices into per-log [`Vocabulary`] tables. When an event carries a
//! `lifecycle:transition` value it is folded into the activity label as
//! `"<activity>+<lifecycle>"`, so the same activity at different lifecycle
//! stages counts as two activities.

mod csv;
mod time;
mod vocab;
mod xes;

pub use self::csv::{parse_csv, ColumnMap};
pub(crate) use self::time::parse_timestamp;
pub use self::time::{bucketize, fit_buckets, time_deltas, BucketStrategy, TimeBuckets, TimeFeature};
pub use self::vocab::Vocabulary;
pub use self::xes::{parse_xes, XesOptions};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// One recorded activity execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub activity: u32,
    pub timestamp: i64,
    pub attrs: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub case_id: String,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub traces: Vec<Trace>,
    pub activity_vocab: Vocabulary,
    pub attr_names: Vec<String>,
    pub attr_vocabs: Vec<Vocabulary>,
    pub max_trace_len: usize,
}

/// Label used for an attribute that an event does not carry.
pub const MISSING_ATTR: &str = "";

/// Joins an activity name with its lifecycle transition, if any.
pub fn activity_label(name: &str, lifecycle: Option<&str>) -> String {
    match lifecycle {
        Some(lc) if !lc.is_empty() => format!("{name}+{lc}"),
        _ => name.to_owned(),
    }
}

/// A trace before vocabulary assignment.
#[derive(Debug, Clone)]
pub(crate) struct RawTrace {
    pub case_id: String,
    pub events: Vec<RawEvent>,
}

#[derive(Debug, Clone)]
pub(crate) struct RawEvent {
    pub activity: String,
    pub timestamp: i64,
    pub attrs: Vec<Option<String>>,
}

impl EventLog {
    pub(crate) fn from_raw(raw: Vec<RawTrace>, attr_names: Vec<String>) -> Self {
        let mut activity_vocab = Vocabulary::new();
        let mut attr_vocabs = vec![Vocabulary::new(); attr_names.len()];
        let mut traces = Vec::with_capacity(raw.len());
        for mut rt in raw {
            if rt.events.is_empty() {
                log::warn!("dropping empty trace {:?}", rt.case_id);
                continue;
            }
            rt.events.sort_by_key(|e| e.timestamp);
            let events = rt
                .events
                .into_iter()
                .map(|e| Event {
                    activity: activity_vocab.insert(&e.activity),
                    timestamp: e.timestamp,
                    attrs: e
                        .attrs
                        .iter()
                        .zip(attr_vocabs.iter_mut())
                        .map(|(v, vocab)| vocab.insert(v.as_deref().unwrap_or(MISSING_ATTR)))
                        .collect(),
                })
                .collect();
            traces.push(Trace {
                case_id: rt.case_id,
                events,
            });
        }
        let max_trace_len = traces.iter().map(Trace::len).max().unwrap_or(0);
        EventLog {
            traces,
            activity_vocab,
            attr_names,
            attr_vocabs,
            max_trace_len,
        }
    }

    pub fn num_events(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    /// Sub-log holding the traces at `indices`, sharing this log's vocabularies.
    pub fn select(&self, indices: &[usize]) -> EventLog {
        let traces: Vec<Trace> = indices.iter().map(|&i| self.traces[i].clone()).collect();
        let max_trace_len = traces.iter().map(Trace::len).max().unwrap_or(0);
        EventLog {
            traces,
            activity_vocab: self.activity_vocab.clone(),
            attr_names: self.attr_names.clone(),
            attr_vocabs: self.attr_vocabs.clone(),
            max_trace_len,
        }
    }

    /// Vocabularies refitted on the labels this log's traces actually use,
    /// in first-occurrence order.
    pub fn fitted_vocabs(&self) -> (Vocabulary, Vec<Vocabulary>) {
        let mut acts = Vocabulary::new();
        let mut attrs = vec![Vocabulary::new(); self.attr_names.len()];
        for ev in self.traces.iter().flat_map(|t| &t.events) {
            if let Some(l) = self.activity_vocab.label(ev.activity) {
                acts.insert(l);
            }
            for ((&a, src), dst) in ev.attrs.iter().zip(&self.attr_vocabs).zip(attrs.iter_mut()) {
                if let Some(l) = src.label(a) {
                    dst.insert(l);
                }
            }
        }
        (acts, attrs)
    }

    /// Re-expresses every event in the given vocabularies; labels absent from
    /// them become [`Vocabulary::UNK`].
    pub fn reindex(&self, activity_vocab: &Vocabulary, attr_vocabs: &[Vocabulary]) -> EventLog {
        let act_map = remap(&self.activity_vocab, activity_vocab);
        let attr_maps: Vec<_> = self
            .attr_vocabs
            .iter()
            .zip(attr_vocabs)
            .map(|(src, dst)| remap(src, dst))
            .collect();
        let traces = self
            .traces
            .iter()
            .map(|t| Trace {
                case_id: t.case_id.clone(),
                events: t
                    .events
                    .iter()
                    .map(|e| Event {
                        activity: act_map(e.activity),
                        timestamp: e.timestamp,
                        attrs: e
                            .attrs
                            .iter()
                            .zip(&attr_maps)
                            .map(|(&a, m)| m(a))
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        EventLog {
            traces,
            activity_vocab: activity_vocab.clone(),
            attr_names: self.attr_names.clone(),
            attr_vocabs: attr_vocabs.to_vec(),
            max_trace_len: self.max_trace_len,
        }
    }
}

fn remap<'a>(src: &'a Vocabulary, dst: &'a Vocabulary) -> impl Fn(u32) -> u32 + 'a {
    let table: HashMap<u32, u32> = src
        .labels()
        .iter()
        .map(|l| (src.get(l).unwrap(), dst.lookup(l)))
        .collect();
    move |idx| table.get(&idx).copied().unwrap_or(idx.min(Vocabulary::UNK))
}

/// What a prefix asks the predictor to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    /// Activity vocabulary index of the next event.
    Activity(u32),
    EndOfCase,
}

impl Target {
    /// Class index in `0..=num_labels`: real labels first, end-of-case last.
    /// `None` for an unknown next activity, which no class represents.
    pub fn class(self, num_labels: usize) -> Option<usize> {
        match self {
            Target::Activity(idx) if idx >= Vocabulary::FIRST => {
                let c = (idx - Vocabulary::FIRST) as usize;
                (c < num_labels).then_some(c)
            }
            Target::Activity(_) => None,
            Target::EndOfCase => Some(num_labels),
        }
    }
}

/// The first `len` events of trace `trace`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prefix {
    pub trace: usize,
    pub len: usize,
    pub target: Target,
}

impl Prefix {
    pub fn events<'a>(&self, log: &'a EventLog) -> &'a [Event] {
        &log.traces[self.trace].events[..self.len]
    }
}

/// All prefixes of every trace, with an end-of-case target for full traces.
pub fn extract_prefixes(log: &EventLog) -> Vec<Prefix> {
    extract_prefixes_with(log, true)
}

pub fn extract_prefixes_with(log: &EventLog, end_of_case: bool) -> Vec<Prefix> {
    let mut out = Vec::with_capacity(log.num_events());
    for (ti, trace) in log.traces.iter().enumerate() {
        out.extend(trace_prefixes(ti, trace, end_of_case));
    }
    out
}

pub(crate) fn trace_prefixes(
    ti: usize,
    trace: &Trace,
    end_of_case: bool,
) -> impl Iterator<Item = Prefix> + '_ {
    let n = trace.len();
    (1..=n).filter_map(move |k| {
        let target = if k < n {
            Target::Activity(trace.events[k].activity)
        } else if end_of_case {
            Target::EndOfCase
        } else {
            return None;
        };
        Some(Prefix {
            trace: ti,
            len: k,
            target,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(case: &str, acts: &[(&str, i64)]) -> RawTrace {
        RawTrace {
            case_id: case.into(),
            events: acts
                .iter()
                .map(|&(a, t)| RawEvent {
                    activity: a.into(),
                    timestamp: t,
                    attrs: vec![],
                })
                .collect(),
        }
    }

    #[test]
    fn prefix_targets_follow_trace() {
        let log = EventLog::from_raw(vec![raw("1", &[("a", 0), ("b", 1), ("c", 2)])], vec![]);
        let p = extract_prefixes(&log);
        assert_eq!(p.len(), 3);
        assert_eq!(p[0].target, Target::Activity(log.activity_vocab.get("b").unwrap()));
        assert_eq!(p[1].target, Target::Activity(log.activity_vocab.get("c").unwrap()));
        assert_eq!(p[2].target, Target::EndOfCase);
        assert_eq!(extract_prefixes_with(&log, false).len(), 2);
    }

    #[test]
    fn single_event_trace_has_end_of_case_prefix() {
        let log = EventLog::from_raw(vec![raw("1", &[("a", 0)])], vec![]);
        assert_eq!(log.max_trace_len, 1);
        let p = extract_prefixes(&log);
        assert_eq!(p, vec![Prefix { trace: 0, len: 1, target: Target::EndOfCase }]);
    }

    #[test]
    fn prefix_count_is_sum_of_lengths() {
        let lens = [1usize, 4, 2, 7, 3];
        let traces = lens
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let evs: Vec<(&str, i64)> = (0..n).map(|j| ("x", j as i64)).collect();
                raw(&i.to_string(), &evs)
            })
            .collect();
        let log = EventLog::from_raw(traces, vec![]);
        // enumerate (trace, k) pairs directly
        let mut expected = 0;
        for t in &log.traces {
            for _k in 1..=t.len() {
                expected += 1;
            }
        }
        assert_eq!(extract_prefixes(&log).len(), expected);
        assert_eq!(expected, 17);
    }

    #[test]
    fn target_classes() {
        assert_eq!(Target::Activity(2).class(3), Some(0));
        assert_eq!(Target::Activity(4).class(3), Some(2));
        assert_eq!(Target::Activity(Vocabulary::UNK).class(3), None);
        assert_eq!(Target::EndOfCase.class(3), Some(3));
    }

    #[test]
    fn reindex_maps_unseen_to_unk() {
        let log = EventLog::from_raw(vec![raw("1", &[("a", 0), ("b", 1)])], vec![]);
        let narrow = Vocabulary::fit(["b"]);
        let re = log.reindex(&narrow, &[]);
        assert_eq!(re.traces[0].events[0].activity, Vocabulary::UNK);
        assert_eq!(re.traces[0].events[1].activity, 2);
    }
}

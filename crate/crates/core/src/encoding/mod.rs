//! Turns replayed prefixes into model inputs.
//!
//! An [`Encoder`] is fitted on training traces (vocabularies, time buckets,
//! maximum length) and then encodes any log over the same net. Each trace is
//! replayed once; the snapshot after event `j` is the input for the prefix
//! of length `j`, so one encoded trace carries all of its prefixes.

mod batch;
mod dataset;
mod features;
mod graph;

pub use batch::{batch, unbatch, Batch, Sequence, StepLabel};
pub use dataset::{load_dataset, save_dataset, DatasetManifest, DATASET_VERSION};
pub use features::{
    attribute_width, encode_attributes, encode_nodes, NodeLayout, SOURCE_ACTIVITY, SOURCE_NONE,
    SOURCE_REPAIR, SOURCE_SILENT,
};
pub use graph::{normalize, to_place_graph, PlaceGraph};

use ndarray::{s, Array2, Array3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eventlog::{
    fit_buckets, time_deltas, BucketStrategy, EventLog, Target, TimeBuckets, TimeFeature, Vocabulary,
};
use crate::petrinet::{replay_prefix, LabelIndex, PetriNet, ReplayOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub time_buckets: usize,
    pub bucket_strategy: BucketStrategy,
    pub replay: ReplayOptions,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            time_buckets: 10,
            bucket_strategy: BucketStrategy::EqualWidth,
            replay: ReplayOptions::default(),
        }
    }
}

/// Everything fitted on training traces that encoding depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub activity_vocab: Vocabulary,
    pub attr_names: Vec<String>,
    pub attr_vocabs: Vec<Vocabulary>,
    pub since_prev: TimeBuckets,
    pub since_start: TimeBuckets,
    /// Longest training trace; longer inputs keep their most recent steps.
    pub max_len: usize,
    pub layout: NodeLayout,
    pub replay: ReplayOptions,
}

impl Encoder {
    pub fn fit(net: &PetriNet, train: &EventLog, config: &EncoderConfig) -> Result<Self> {
        if train.traces.is_empty() {
            return Err(Error::TooFewTraces { needed: 1, got: 0 });
        }
        let (activity_vocab, attr_vocabs) = train.fitted_vocabs();
        let mut prev = Vec::new();
        let mut start = Vec::new();
        for t in &train.traces {
            let (p, s) = time_deltas(&t.events);
            prev.extend(p.into_iter().map(|v| v as f64));
            start.extend(s.into_iter().map(|v| v as f64));
        }
        let fit = |feature, values: &[f64]| {
            fit_buckets(feature, values, config.time_buckets, config.bucket_strategy)
        };
        Ok(Encoder {
            layout: NodeLayout::new(net, &activity_vocab),
            since_prev: fit(TimeFeature::SincePrevious, &prev)?,
            since_start: fit(TimeFeature::SinceCaseStart, &start)?,
            activity_vocab,
            attr_names: train.attr_names.clone(),
            attr_vocabs,
            max_len: train.max_trace_len,
            replay: config.replay,
        })
    }

    /// Classes: one per activity label, then end-of-case.
    pub fn num_classes(&self) -> usize {
        self.activity_vocab.num_labels() + 1
    }

    /// Index-space size of each attribute column, padding included.
    pub fn attr_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![
            self.activity_vocab.index_space(),
            self.since_prev.count + 1,
            self.since_start.count + 1,
        ];
        sizes.extend(self.attr_vocabs.iter().map(Vocabulary::index_space));
        sizes
    }

    /// Hash over every vocabulary; inputs and checkpoints must agree on it.
    pub fn vocab_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.activity_vocab.fingerprint());
        for (name, v) in self.attr_names.iter().zip(&self.attr_vocabs) {
            h.update(b"\0");
            h.update(name.as_bytes());
            h.update(b"\0");
            h.update(v.fingerprint());
        }
        hex::encode(h.finalize())
    }

    pub fn vocab_key(&self) -> u64 {
        let hash = self.vocab_hash();
        u64::from_str_radix(&hash[..16], 16).expect("hex digest")
    }

    pub fn class_label(&self, class: usize) -> Option<&str> {
        if class == self.activity_vocab.num_labels() {
            Some(END_OF_CASE)
        } else {
            self.activity_vocab.label(class as u32 + Vocabulary::FIRST)
        }
    }

    /// Replays and encodes every trace of `log`, whatever vocabularies it uses.
    pub fn encode_log(&self, net: &PetriNet, log: &EventLog) -> Result<Vec<EncodedTrace>> {
        if log.attr_names != self.attr_names {
            return Err(Error::Invalid(format!(
                "log attributes {:?} differ from the fitted {:?}",
                log.attr_names, self.attr_names
            )));
        }
        let index = LabelIndex::new(net, &log.activity_vocab);
        let local = log.reindex(&self.activity_vocab, &self.attr_vocabs);
        let num_labels = self.activity_vocab.num_labels();
        log.traces
            .iter()
            .zip(&local.traces)
            .map(|(orig, t)| {
                let acts: Vec<u32> = orig.events.iter().map(|e| e.activity).collect();
                let steps = replay_prefix(net, &index, &acts, &self.replay)?;
                let labels = (1..=t.len())
                    .map(|k| {
                        let target = if k < t.len() {
                            Target::Activity(t.events[k].activity)
                        } else {
                            Target::EndOfCase
                        };
                        target
                            .class(num_labels)
                            .map_or(StepLabel::Unknown, |c| StepLabel::Class(c as u32))
                    })
                    .collect();
                Ok(EncodedTrace {
                    case_id: t.case_id.clone(),
                    nodes: encode_nodes(&self.layout, net, &steps),
                    attrs: encode_attributes(&t.events, &self.since_prev, &self.since_start),
                    labels,
                })
            })
            .collect()
    }
}

/// Label used for the end-of-case class in reports and predictions.
pub const END_OF_CASE: &str = "[end]";

/// All prefixes of one trace: step `j` is the input for the prefix of length
/// `j + 1` and `labels[j]` its target.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTrace {
    pub case_id: String,
    pub nodes: Array3<u32>,
    pub attrs: Array2<u32>,
    pub labels: Vec<StepLabel>,
}

impl EncodedTrace {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Steps `start..end` of a trace, scored from `scored_from` on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub trace: usize,
    pub start: usize,
    pub end: usize,
    pub scored_from: usize,
}

/// Windows of at most `max_len` steps that together score every prefix once.
/// Prefixes within `max_len` share a window from the trace start; each
/// longer prefix gets its own window over its last `max_len` steps.
pub fn windows(traces: &[EncodedTrace], max_len: usize) -> Vec<Window> {
    let mut out = Vec::new();
    for (ti, t) in traces.iter().enumerate() {
        let k = t.len();
        if k == 0 || max_len == 0 {
            continue;
        }
        out.push(Window {
            trace: ti,
            start: 0,
            end: k.min(max_len),
            scored_from: 0,
        });
        for end in max_len + 1..=k {
            out.push(Window {
                trace: ti,
                start: end - max_len,
                end,
                scored_from: end - 1,
            });
        }
    }
    out
}

/// An encoded log with its place graph, ready for training or evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub encoder: Encoder,
    pub adjacency: Array2<u8>,
    pub normalized: Array2<f64>,
    pub traces: Vec<EncodedTrace>,
}

impl Dataset {
    pub fn build(net: &PetriNet, encoder: Encoder, log: &EventLog) -> Result<Self> {
        let traces = encoder.encode_log(net, log)?;
        let graph = to_place_graph(net);
        Ok(Dataset {
            normalized: normalize(&graph.adjacency),
            adjacency: graph.adjacency,
            encoder,
            traces,
        })
    }

    pub fn num_prefixes(&self) -> usize {
        self.traces.iter().map(EncodedTrace::len).sum()
    }

    pub fn windows(&self) -> Vec<Window> {
        windows(&self.traces, self.encoder.max_len)
    }

    pub fn sequence(&self, w: &Window) -> Sequence {
        let t = &self.traces[w.trace];
        let labels = (w.start..w.end)
            .map(|j| if j >= w.scored_from { t.labels[j] } else { StepLabel::Skip })
            .collect();
        Sequence {
            nodes: t.nodes.slice(s![w.start..w.end, .., ..]).to_owned(),
            attrs: t.attrs.slice(s![w.start..w.end, ..]).to_owned(),
            labels,
            vocab_key: self.encoder.vocab_key(),
        }
    }

    /// Subset of the traces, sharing encoder and graph.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            encoder: self.encoder.clone(),
            adjacency: self.adjacency.clone(),
            normalized: self.normalized.clone(),
            traces: indices.iter().map(|&i| self.traces[i].clone()).collect(),
        }
    }
}

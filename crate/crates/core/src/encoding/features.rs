use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::eventlog::{bucketize, time_deltas, Event, TimeBuckets, Vocabulary};
use crate::petrinet::{PetriNet, ReplayStep};

/// Firing-source index written into a node slot that has not fired yet.
pub const SOURCE_NONE: u32 = 0;
/// Slot filled by a silent transition.
pub const SOURCE_SILENT: u32 = 1;
/// Slot filled by a token injected during replay repair.
pub const SOURCE_REPAIR: u32 = 2;
/// Activity vocabulary index `i` becomes firing source `SOURCE_ACTIVITY + i`.
pub const SOURCE_ACTIVITY: u32 = 3;

/// Where each firing lands in the node feature matrix.
///
/// Every place owns `slots` columns, one per input transition in ascending
/// transition order; spare columns (places with fewer inputs than the
/// widest place) take repair tokens. The last column is the token column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLayout {
    pub places: usize,
    pub slots: usize,
    /// `slot_of[p]` lists `(transition, slot)` pairs for the inputs of `p`.
    slot_of: Vec<Vec<(usize, usize)>>,
    /// Firing source of each transition.
    sources: Vec<u32>,
    pub source_space: usize,
}

impl NodeLayout {
    pub fn new(net: &PetriNet, activity_vocab: &Vocabulary) -> Self {
        let slot_of: Vec<Vec<(usize, usize)>> = (0..net.num_places())
            .map(|p| {
                let mut ts = net.place_preset(p).to_vec();
                ts.sort_unstable();
                ts.into_iter().enumerate().map(|(slot, t)| (t, slot)).collect()
            })
            .collect();
        let slots = slot_of.iter().map(Vec::len).max().unwrap_or(0);
        let sources = net
            .transitions()
            .iter()
            .map(|t| match &t.label {
                None => SOURCE_SILENT,
                Some(l) => SOURCE_ACTIVITY + activity_vocab.lookup(l),
            })
            .collect();
        NodeLayout {
            places: net.num_places(),
            slots,
            slot_of,
            sources,
            source_space: SOURCE_ACTIVITY as usize + activity_vocab.index_space(),
        }
    }

    /// Columns per node: the slots plus the token column.
    pub fn width(&self) -> usize {
        self.slots + 1
    }

    fn slot(&self, p: usize, t: usize) -> usize {
        self.slot_of[p]
            .iter()
            .find(|&&(tt, _)| tt == t)
            .map(|&(_, s)| s)
            .expect("transition is an input of the place")
    }

    fn deposit(&self, x: &mut Array2<u32>, net: &PetriNet, t: usize) {
        for &p in net.postset(t) {
            x[[p, self.slot(p, t)]] = self.sources[t];
        }
    }
}

/// One `places x width` snapshot per replay step. Each snapshot extends the
/// previous one: slots record which inputs have ever fired, the token column
/// holds `place + 1` for currently marked places.
pub fn encode_nodes(layout: &NodeLayout, net: &PetriNet, steps: &[ReplayStep]) -> Array3<u32> {
    let n = layout.places;
    let w = layout.width();
    let mut out = Array3::zeros((steps.len(), n, w));
    let mut x = Array2::<u32>::zeros((n, w));
    for (k, step) in steps.iter().enumerate() {
        for &s in &step.silent {
            layout.deposit(&mut x, net, s);
        }
        for &p in &step.repairs {
            // first spare slot, if the place has one
            let spare = layout.slot_of[p].len();
            if spare < layout.slots {
                x[[p, spare]] = SOURCE_REPAIR;
            }
        }
        if let Some(t) = step.fired {
            layout.deposit(&mut x, net, t);
        }
        for p in 0..n {
            x[[p, layout.slots]] = if step.marking.marked(p) { p as u32 + 1 } else { 0 };
        }
        out.index_axis_mut(ndarray::Axis(0), k).assign(&x);
    }
    out
}

/// Number of columns in an attribute row for `attrs` extra attributes.
pub fn attribute_width(attrs: usize) -> usize {
    3 + attrs
}

/// Rows `[activity, since-previous bucket + 1, since-start bucket + 1, attrs..]`.
/// Index 0 is padding in every column, so bucket indices are shifted by one.
pub fn encode_attributes(events: &[Event], since_prev: &TimeBuckets, since_start: &TimeBuckets) -> Array2<u32> {
    let attrs = events.first().map_or(0, |e| e.attrs.len());
    let (prev, start) = time_deltas(events);
    let mut out = Array2::zeros((events.len(), attribute_width(attrs)));
    for (i, e) in events.iter().enumerate() {
        out[[i, 0]] = e.activity;
        out[[i, 1]] = bucketize(prev[i] as f64, since_prev) as u32 + 1;
        out[[i, 2]] = bucketize(start[i] as f64, since_start) as u32 + 1;
        for (j, &a) in e.attrs.iter().enumerate() {
            out[[i, 3 + j]] = a;
        }
    }
    out
}

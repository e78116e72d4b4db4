use ndarray::{s, Array2, Array3, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Supervision attached to one step of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepLabel {
    /// No prediction is scored at this step.
    Skip,
    /// The next activity is outside the class set; any prediction is wrong.
    Unknown,
    Class(u32),
}

impl StepLabel {
    pub fn is_scored(self) -> bool {
        self != StepLabel::Skip
    }

    pub fn class(self) -> Option<usize> {
        match self {
            StepLabel::Class(c) => Some(c as usize),
            _ => None,
        }
    }
}

/// One model input: `k` node snapshots, `k` attribute rows and a label per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub nodes: Array3<u32>,
    pub attrs: Array2<u32>,
    pub labels: Vec<StepLabel>,
    /// Identifies the vocabularies the indices refer to.
    pub vocab_key: u64,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Sequences padded to a common length. Padding is index 0 with mask 0 and
/// label [`StepLabel::Skip`].
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// `(batch, max_len, places, width)`
    pub nodes: Array4<u32>,
    /// `(batch, max_len, attribute columns)`
    pub attrs: Array3<u32>,
    /// `(batch, max_len)`, 1 on real steps.
    pub mask: Array2<u8>,
    pub labels: Vec<Vec<StepLabel>>,
    pub lengths: Vec<usize>,
    pub vocab_key: u64,
}

pub fn batch(seqs: &[Sequence], max_len: usize) -> Result<Batch> {
    let first = seqs
        .first()
        .ok_or_else(|| Error::Invalid("cannot batch zero sequences".into()))?;
    let (_, n, w) = first.nodes.dim();
    let m = first.attrs.ncols();
    let mut nodes = Array4::zeros((seqs.len(), max_len, n, w));
    let mut attrs = Array3::zeros((seqs.len(), max_len, m));
    let mut mask = Array2::zeros((seqs.len(), max_len));
    let mut labels = Vec::with_capacity(seqs.len());
    let mut lengths = Vec::with_capacity(seqs.len());
    for (b, seq) in seqs.iter().enumerate() {
        if seq.vocab_key != first.vocab_key {
            return Err(Error::VocabMismatch(format!(
                "sequence {b} was encoded with different vocabularies"
            )));
        }
        let k = seq.len();
        if k > max_len {
            return Err(Error::Shape(format!("sequence {b} has {k} steps, limit is {max_len}")));
        }
        if seq.nodes.dim() != (k, n, w) || seq.attrs.dim() != (k, m) {
            return Err(Error::Shape(format!(
                "sequence {b}: nodes {:?}, attrs {:?}, expected ({k}, {n}, {w}) and ({k}, {m})",
                seq.nodes.dim(),
                seq.attrs.dim()
            )));
        }
        nodes.slice_mut(s![b, ..k, .., ..]).assign(&seq.nodes);
        attrs.slice_mut(s![b, ..k, ..]).assign(&seq.attrs);
        mask.slice_mut(s![b, ..k]).fill(1);
        let mut l = seq.labels.clone();
        l.resize(max_len, StepLabel::Skip);
        labels.push(l);
        lengths.push(k);
    }
    Ok(Batch {
        nodes,
        attrs,
        mask,
        labels,
        lengths,
        vocab_key: first.vocab_key,
    })
}

pub fn unbatch(batch: &Batch) -> Vec<Sequence> {
    batch
        .lengths
        .iter()
        .enumerate()
        .map(|(b, &k)| Sequence {
            nodes: batch.nodes.slice(s![b, ..k, .., ..]).to_owned(),
            attrs: batch.attrs.slice(s![b, ..k, ..]).to_owned(),
            labels: batch.labels[b][..k].to_vec(),
            vocab_key: batch.vocab_key,
        })
        .collect()
}

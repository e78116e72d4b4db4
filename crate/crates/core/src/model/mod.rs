//! Next-activity network: node and attribute embeddings, a stack of graph
//! recurrent cells over the place graph, a max readout per step, an LSTM over
//! attribute embeddings joined with the readout, and a softmax classifier on
//! the readout joined with the LSTM state. Gradients are computed by hand.
//!
//! One forward pass over a sequence of `k` steps yields `k` rows of logits;
//! row `j` only depends on steps `..=j`, so it is the prediction for the
//! prefix of length `j + 1`.

mod checkpoint;
pub mod grnn;
pub mod lstm;
pub mod ops;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, CHECKPOINT_VERSION};
pub use grnn::GrnnCell;
pub use lstm::LstmLayer;
pub use ops::{cross_entropy, gcn_forward, readout, sigmoid, softmax};

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{s, Array2, ArrayView2, ArrayView3, Axis, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{Batch, Encoder, Sequence, StepLabel};
use crate::error::{Error, Result};

/// Floating-point element type: `f64` for gradient checks, `f32` for training.
pub trait Scalar:
    LinalgScalar
    + ScalarOperand
    + Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Send
    + Sync
    + Default
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("representable constant")
}

pub(crate) fn uniform<T: Scalar>(shape: (usize, usize), fan_in: usize, rng: &mut impl Rng) -> Array2<T> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Array2::from_shape_simple_fn(shape, || lit(rng.gen_range(-bound..bound)))
}

pub(crate) fn check_finite<T: Scalar>(a: &Array2<T>, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embed_dim: usize,
    /// Width of each stacked graph recurrent cell.
    pub grnn_hidden: Vec<usize>,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            grnn_hidden: vec![256, 256],
            lstm_hidden: 256,
            lstm_layers: 2,
        }
    }
}

/// Every shape the parameters depend on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub config: ModelConfig,
    pub places: usize,
    /// Transition slots per node; each node has one more column for tokens.
    pub slots: usize,
    pub source_space: usize,
    /// Index-space size of each attribute column.
    pub attr_sizes: Vec<usize>,
    pub num_classes: usize,
}

impl Architecture {
    pub fn new(config: ModelConfig, encoder: &Encoder) -> Self {
        Architecture {
            config,
            places: encoder.layout.places,
            slots: encoder.layout.slots,
            source_space: encoder.layout.source_space,
            attr_sizes: encoder.attr_sizes(),
            num_classes: encoder.num_classes(),
        }
    }

    pub fn node_width(&self) -> usize {
        self.config.embed_dim * (self.slots + 1)
    }

    fn readout_width(&self) -> usize {
        *self.config.grnn_hidden.last().expect("at least one graph cell")
    }

    fn lstm_input(&self) -> usize {
        self.config.embed_dim * self.attr_sizes.len() + self.readout_width()
    }

    fn classifier_input(&self) -> usize {
        self.readout_width() + self.config.lstm_hidden
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        if c.embed_dim == 0 || c.grnn_hidden.is_empty() || c.grnn_hidden.contains(&0) || c.lstm_hidden == 0 || c.lstm_layers == 0 {
            return Err(Error::Invalid(format!("model widths must be positive: {c:?}")));
        }
        if self.places == 0 || self.num_classes == 0 {
            return Err(Error::Invalid("model needs at least one place and one class".into()));
        }
        Ok(())
    }
}

/// Parameters of the network. The same type holds gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub arch: Architecture,
    /// Embedding of firing sources, shared by all transition slots.
    pub node_emb: Array2<T>,
    /// Embedding of the token column (`places + 1` rows).
    pub token_emb: Array2<T>,
    pub attr_emb: Vec<Array2<T>>,
    pub grnn: Vec<GrnnCell<T>>,
    pub lstm: Vec<LstmLayer<T>>,
    /// `(readout + lstm) x classes`
    pub out_w: Array2<T>,
    pub out_b: Array2<T>,
}

/// Intermediate values kept from a forward pass for the backward pass.
pub struct ModelCache<T> {
    nodes: ndarray::Array3<u32>,
    attrs: Array2<u32>,
    grnn: grnn::StackCache<T>,
    argmax: Vec<Vec<usize>>,
    lstm: lstm::EncoderCache<T>,
    cls_in: Array2<T>,
}

impl<T: Scalar> Model<T> {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero. Embedding rows
    /// have fan-in one.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = arch.config.embed_dim;
        let node_emb = uniform((arch.source_space, d), 1, &mut rng);
        let token_emb = uniform((arch.places + 1, d), 1, &mut rng);
        let attr_emb = arch.attr_sizes.iter().map(|&n| uniform((n, d), 1, &mut rng)).collect();
        let mut grnn = Vec::new();
        let mut input = arch.node_width();
        for &h in &arch.config.grnn_hidden {
            grnn.push(GrnnCell::init(input, h, &mut rng));
            input = h;
        }
        let mut lstm = Vec::new();
        let mut input = arch.lstm_input();
        for _ in 0..arch.config.lstm_layers {
            lstm.push(LstmLayer::init(input, arch.config.lstm_hidden, &mut rng));
            input = arch.config.lstm_hidden;
        }
        let ci = arch.classifier_input();
        Ok(Model {
            out_w: uniform((ci, arch.num_classes), ci, &mut rng),
            out_b: Array2::zeros((1, arch.num_classes)),
            node_emb,
            token_emb,
            attr_emb,
            grnn,
            lstm,
            arch,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(T::zero());
        }
        z
    }

    /// Parameter blocks in their fixed order, with names.
    pub fn tensors(&self) -> Vec<(String, &Array2<T>)> {
        let mut out = vec![("node_embedding".to_owned(), &self.node_emb), ("token_embedding".to_owned(), &self.token_emb)];
        for (j, e) in self.attr_emb.iter().enumerate() {
            out.push((format!("attr_embedding.{j}"), e));
        }
        for (l, c) in self.grnn.iter().enumerate() {
            out.push((format!("grnn.{l}.wx"), &c.wx));
            out.push((format!("grnn.{l}.wh"), &c.wh));
            out.push((format!("grnn.{l}.b"), &c.b));
        }
        for (l, c) in self.lstm.iter().enumerate() {
            out.push((format!("lstm.{l}.wx"), &c.wx));
            out.push((format!("lstm.{l}.wh"), &c.wh));
            out.push((format!("lstm.{l}.b"), &c.b));
        }
        out.push(("classifier.w".to_owned(), &self.out_w));
        out.push(("classifier.b".to_owned(), &self.out_b));
        out
    }

    /// Same order as [`Model::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<T>> {
        let mut out = vec![&mut self.node_emb, &mut self.token_emb];
        out.extend(self.attr_emb.iter_mut());
        for c in &mut self.grnn {
            out.extend([&mut c.wx, &mut c.wh, &mut c.b]);
        }
        for c in &mut self.lstm {
            out.extend([&mut c.wx, &mut c.wh, &mut c.b]);
        }
        out.extend([&mut self.out_w, &mut self.out_b]);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        let conv = |a: &Array2<T>| a.mapv(|v| lit::<U>(v.to_f64().unwrap_or(f64::NAN)));
        Model {
            arch: self.arch.clone(),
            node_emb: conv(&self.node_emb),
            token_emb: conv(&self.token_emb),
            attr_emb: self.attr_emb.iter().map(conv).collect(),
            grnn: self
                .grnn
                .iter()
                .map(|c| GrnnCell { wx: conv(&c.wx), wh: conv(&c.wh), b: conv(&c.b) })
                .collect(),
            lstm: self
                .lstm
                .iter()
                .map(|c| LstmLayer { wx: conv(&c.wx), wh: conv(&c.wh), b: conv(&c.b) })
                .collect(),
            out_w: conv(&self.out_w),
            out_b: conv(&self.out_b),
        }
    }

    fn check_inputs(&self, a_hat: &Array2<T>, nodes: &ArrayView3<'_, u32>, attrs: &ArrayView2<'_, u32>) -> Result<()> {
        let a = &self.arch;
        let (k, n, w) = nodes.dim();
        if a_hat.dim() != (a.places, a.places) || n != a.places || w != a.slots + 1 {
            return Err(Error::Shape(format!(
                "inputs with {n} places and {w} columns, adjacency {:?}; model expects {} places and {} columns",
                a_hat.dim(),
                a.places,
                a.slots + 1
            )));
        }
        if attrs.dim() != (k, a.attr_sizes.len()) {
            return Err(Error::Shape(format!(
                "attribute rows {:?}, expected ({k}, {})",
                attrs.dim(),
                a.attr_sizes.len()
            )));
        }
        for row in nodes.rows() {
            let (slots, token) = (row.slice(s![..a.slots]), row[a.slots]);
            if slots.iter().any(|&v| v as usize >= a.source_space) || token as usize > a.places {
                return Err(Error::Shape("node feature index out of range".into()));
            }
        }
        for row in attrs.rows() {
            if row.iter().zip(&a.attr_sizes).any(|(&v, &size)| v as usize >= size) {
                return Err(Error::Shape("attribute index out of range".into()));
            }
        }
        Ok(())
    }

    fn embed_nodes(&self, x: ArrayView2<'_, u32>) -> Array2<T> {
        let d = self.arch.config.embed_dim;
        let slots = self.arch.slots;
        let mut out = Array2::zeros((x.nrows(), d * (slots + 1)));
        for (p, row) in x.rows().into_iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let table = if j < slots { &self.node_emb } else { &self.token_emb };
                out.slice_mut(s![p, j * d..(j + 1) * d]).assign(&table.row(v as usize));
            }
        }
        out
    }

    /// Logits (`steps x classes`) for every prefix of the sequence.
    pub fn forward(
        &self,
        a_hat: &Array2<T>,
        nodes: ArrayView3<'_, u32>,
        attrs: ArrayView2<'_, u32>,
    ) -> Result<(Array2<T>, ModelCache<T>)> {
        self.check_inputs(a_hat, &nodes, &attrs)?;
        let k = nodes.dim().0;
        let d = self.arch.config.embed_dim;
        let xs: Vec<Array2<T>> = nodes.outer_iter().map(|x| self.embed_nodes(x)).collect();
        let (states, grnn_cache) = grnn::stack_forward(&self.grnn, a_hat, &xs, &vec![true; k])?;

        let hr = self.arch.readout_width();
        let m = self.arch.attr_sizes.len();
        let mut lstm_in = Array2::zeros((k, self.arch.lstm_input()));
        let mut argmax = Vec::with_capacity(k);
        for (t, h) in states.iter().enumerate() {
            let (r, arg) = readout(h.view())?;
            for (j, &v) in attrs.row(t).iter().enumerate() {
                lstm_in.slice_mut(s![t, j * d..(j + 1) * d]).assign(&self.attr_emb[j].row(v as usize));
            }
            lstm_in.slice_mut(s![t, m * d..]).assign(&r);
            argmax.push(arg);
        }
        let (top, lstm_cache) = lstm::encoder_forward(&self.lstm, &lstm_in)?;
        let mut cls_in = Array2::zeros((k, self.arch.classifier_input()));
        cls_in.slice_mut(s![.., ..hr]).assign(&lstm_in.slice(s![.., m * d..]));
        cls_in.slice_mut(s![.., hr..]).assign(&top);
        let logits = cls_in.dot(&self.out_w) + &self.out_b;
        check_finite(&logits, "logits")?;
        let cache = ModelCache {
            nodes: nodes.to_owned(),
            attrs: attrs.to_owned(),
            grnn: grnn_cache,
            argmax,
            lstm: lstm_cache,
            cls_in,
        };
        Ok((logits, cache))
    }

    /// Accumulates into `grad` the gradient of `sum(dlogits ∘ logits)`.
    pub fn backward(&self, a_hat: &Array2<T>, cache: &ModelCache<T>, dlogits: &Array2<T>, grad: &mut Model<T>) {
        let d = self.arch.config.embed_dim;
        let hr = self.arch.readout_width();
        let m = self.arch.attr_sizes.len();
        let k = dlogits.nrows();

        grad.out_w += &cache.cls_in.t().dot(dlogits);
        grad.out_b += &dlogits.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dcls = dlogits.dot(&self.out_w.t());
        let dtop = dcls.slice(s![.., hr..]).to_owned();
        let dlstm_in = lstm::encoder_backward(&self.lstm, &cache.lstm, &dtop, &mut grad.lstm);
        let dr = &dcls.slice(s![.., ..hr]) + &dlstm_in.slice(s![.., m * d..]);

        for (t, row) in cache.attrs.rows().into_iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let mut g = grad.attr_emb[j].row_mut(v as usize);
                g += &dlstm_in.slice(s![t, j * d..(j + 1) * d]);
            }
        }

        let n = self.arch.places;
        let d_states: Vec<Array2<T>> = (0..k)
            .map(|t| {
                let mut ds = Array2::zeros((n, hr));
                for (j, &p) in cache.argmax[t].iter().enumerate() {
                    ds[[p, j]] = dr[[t, j]];
                }
                ds
            })
            .collect();
        let dxs = grnn::stack_backward(&self.grnn, a_hat, &cache.grnn, &d_states, &mut grad.grnn);

        let slots = self.arch.slots;
        for (t, dx) in dxs.iter().enumerate() {
            for p in 0..n {
                for j in 0..=slots {
                    let v = cache.nodes[[t, p, j]] as usize;
                    let table = if j < slots { &mut grad.node_emb } else { &mut grad.token_emb };
                    let mut g = table.row_mut(v);
                    g += &dx.slice(s![p, j * d..(j + 1) * d]);
                }
            }
        }
    }

    /// Class probabilities for every prefix of the sequence.
    pub fn probabilities(&self, a_hat: &Array2<T>, nodes: ArrayView3<'_, u32>, attrs: ArrayView2<'_, u32>) -> Result<Array2<T>> {
        let (mut logits, _) = self.forward(a_hat, nodes, attrs)?;
        for mut row in logits.rows_mut() {
            let p = softmax(row.view());
            row.assign(&p);
        }
        Ok(logits)
    }

    /// Probabilities for the real steps of each batch item. Padded steps are
    /// never read.
    pub fn batch_probabilities(&self, a_hat: &Array2<T>, batch: &Batch) -> Result<Vec<Array2<T>>> {
        (0..batch.mask.nrows())
            .map(|b| {
                let k = batch.mask.row(b).iter().take_while(|&&m| m == 1).count();
                self.probabilities(a_hat, batch.nodes.slice(s![b, ..k, .., ..]), batch.attrs.slice(s![b, ..k, ..]))
            })
            .collect()
    }

    /// Summed cross-entropy over the steps labelled with a class, and their
    /// count. With `grad`, also accumulates the gradient of that sum.
    pub fn sequence_loss(&self, a_hat: &Array2<T>, seq: &Sequence, grad: Option<&mut Model<T>>) -> Result<(T, usize)> {
        let (logits, cache) = self.forward(a_hat, seq.nodes.view(), seq.attrs.view())?;
        let mut dlogits = Array2::zeros(logits.dim());
        let mut loss = T::zero();
        let mut count = 0;
        for (t, label) in seq.labels.iter().enumerate() {
            if let StepLabel::Class(c) = *label {
                let p = softmax(logits.row(t));
                loss += cross_entropy(p.view(), c as usize);
                let mut row = dlogits.row_mut(t);
                row.assign(&p);
                row[c as usize] -= T::one();
                count += 1;
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        if let Some(g) = grad {
            if count > 0 {
                self.backward(a_hat, &cache, &dlogits, g);
            }
        }
        Ok((loss, count))
    }
}

/// Normalized adjacency in the model's element type.
pub fn adjacency_as<T: Scalar>(a: &Array2<f64>) -> Array2<T> {
    a.mapv(lit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{Dataset, EncoderConfig};
    use crate::synth::{deterministic_chain, simulate_log, SimOptions};

    fn small() -> (Model<f64>, Dataset) {
        let net = deterministic_chain();
        let log = simulate_log(&net, 4, 1, &SimOptions::default());
        let enc = Encoder::fit(&net, &log, &EncoderConfig::default()).unwrap();
        let ds = Dataset::build(&net, enc, &log).unwrap();
        let cfg = ModelConfig {
            embed_dim: 3,
            grnn_hidden: vec![4, 4],
            lstm_hidden: 4,
            lstm_layers: 2,
        };
        (Model::new(Architecture::new(cfg, &ds.encoder), 7).unwrap(), ds)
    }

    #[test]
    fn tensor_order_is_stable() {
        let (m, _) = small();
        let names: Vec<_> = m.tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names[0], "node_embedding");
        assert_eq!(names.last().unwrap(), "classifier.b");
        assert_eq!(m.clone().tensors_mut().len(), names.len());
    }

    #[test]
    fn same_seed_same_parameters() {
        let (a, ds) = small();
        let b = Model::<f64>::new(a.arch.clone(), 7).unwrap();
        assert_eq!(a, b);
        let c = Model::<f64>::new(Architecture::new(a.arch.config.clone(), &ds.encoder), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let (m, ds) = small();
        let a = adjacency_as(&ds.normalized);
        let t = &ds.traces[0];
        let p = m.probabilities(&a, t.nodes.view(), t.attrs.view()).unwrap();
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn prefix_outputs_match_full_sequence() {
        let (m, ds) = small();
        let a = adjacency_as(&ds.normalized);
        let t = &ds.traces[0];
        let (full, _) = m.forward(&a, t.nodes.view(), t.attrs.view()).unwrap();
        let (part, _) = m
            .forward(&a, t.nodes.slice(s![..3, .., ..]), t.attrs.slice(s![..3, ..]))
            .unwrap();
        assert_eq!(full.slice(s![..3, ..]), part);
    }

    #[test]
    fn bad_shapes_are_rejected() {
        let (m, ds) = small();
        let a = adjacency_as::<f64>(&ds.normalized);
        let t = &ds.traces[0];
        assert!(m.forward(&a, t.nodes.view(), t.attrs.slice(s![.., ..2])).is_err());
        let mut bad = t.attrs.clone();
        bad[[0, 0]] = 999;
        assert!(m.forward(&a, t.nodes.view(), bad.view()).is_err());
    }
}

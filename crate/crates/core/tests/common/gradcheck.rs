//! Central finite-difference checks of the hand-written backward passes,
//! all at 64-bit.

use ndarray::{Array1, Array2};
use procnet::encoding::{Dataset, Encoder, EncoderConfig, Sequence, StepLabel};
use procnet::model::grnn::{stack_backward, stack_forward};
use procnet::model::lstm::{encoder_backward, encoder_forward};
use procnet::model::{adjacency_as, cross_entropy, softmax, Architecture, GrnnCell, LstmLayer, Model, ModelConfig};
use procnet::petrinet::NetBuilder;
use procnet::synth::{simulate_log, SimOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

/// Largest element-wise relative error between `analytic` and the central
/// difference of `f` over every element of `params`.
pub fn max_rel_error(params: &mut [Array2<f64>], analytic: &[Array2<f64>], f: &dyn Fn(&[Array2<f64>]) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        for idx in 0..params[i].len() {
            let (r, c) = (idx / params[i].ncols(), idx % params[i].ncols());
            let orig = params[i][[r, c]];
            params[i][[r, c]] = orig + STEP;
            let up = f(params);
            params[i][[r, c]] = orig - STEP;
            let down = f(params);
            params[i][[r, c]] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max(super::rel_err(analytic[i][[r, c]], numeric));
        }
    }
    worst
}

fn random(rng: &mut ChaCha8Rng, shape: (usize, usize), scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.gen_range(-scale..scale))
}

/// Row-stochastic `D⁻¹(A + I)` of a random directed graph.
pub fn random_adjacency(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    let a = Array2::from_shape_simple_fn((n, n), || u8::from(rng.gen_bool(0.3)));
    procnet::encoding::normalize(&a)
}

fn randomize_biases(cell_b: &mut Array2<f64>, rng: &mut ChaCha8Rng) {
    cell_b.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
}

/// One graph recurrent step; loss `sum(h)`. Checks weights, input and state.
pub fn grnn_cell(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, f, h) = (4, 3, 5);
    let a = random_adjacency(&mut rng, n);
    let mut cell = GrnnCell::<f64>::init(f, h, &mut rng);
    randomize_biases(&mut cell.b, &mut rng);
    let x = random(&mut rng, (n, f), 1.0);
    let h0 = random(&mut rng, (n, h), 1.0);
    let loss = |p: &[Array2<f64>]| {
        let cell = GrnnCell { wx: p[0].clone(), wh: p[1].clone(), b: p[2].clone() };
        cell.step(&a, &p[3], &p[4]).unwrap().0.sum()
    };
    let (out, cache) = cell.step(&a, &x, &h0).unwrap();
    let mut grad = GrnnCell::zeros(f, h);
    let (dx, dh0) = cell.backward(&a, &cache, &Array2::ones(out.dim()), &mut grad);
    let mut params = vec![cell.wx, cell.wh, cell.b, x, h0];
    max_rel_error(&mut params, &[grad.wx, grad.wh, grad.b, dx, dh0], &loss)
}

/// Two stacked cells over three steps; loss is a weighted sum of top states.
pub fn grnn_stack(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, f, h, k) = (4, 3, 5, 3);
    let a = random_adjacency(&mut rng, n);
    let mut cells = vec![GrnnCell::<f64>::init(f, h, &mut rng), GrnnCell::init(h, h, &mut rng)];
    for c in &mut cells {
        randomize_biases(&mut c.b, &mut rng);
    }
    let xs: Vec<_> = (0..k).map(|_| random(&mut rng, (n, f), 1.0)).collect();
    let weights: Vec<_> = (0..k).map(|_| random(&mut rng, (n, h), 1.0)).collect();
    let unpack = |p: &[Array2<f64>]| {
        let cells: Vec<_> = (0..2)
            .map(|l| GrnnCell { wx: p[3 * l].clone(), wh: p[3 * l + 1].clone(), b: p[3 * l + 2].clone() })
            .collect();
        (cells, p[6..].to_vec())
    };
    let loss = |p: &[Array2<f64>]| {
        let (cells, xs) = unpack(p);
        let (out, _) = stack_forward(&cells, &a, &xs, &vec![true; k]).unwrap();
        out.iter().zip(&weights).map(|(o, w)| (o * w).sum()).sum()
    };
    let (_, cache) = stack_forward(&cells, &a, &xs, &vec![true; k]).unwrap();
    let mut grads = vec![GrnnCell::zeros(f, h), GrnnCell::zeros(h, h)];
    let dxs = stack_backward(&cells, &a, &cache, &weights, &mut grads);
    let mut params = Vec::new();
    let mut analytic = Vec::new();
    for (c, g) in cells.into_iter().zip(grads) {
        params.extend([c.wx, c.wh, c.b]);
        analytic.extend([g.wx, g.wh, g.b]);
    }
    params.extend(xs);
    analytic.extend(dxs);
    max_rel_error(&mut params, &analytic, &loss)
}

/// Two LSTM layers over four steps; loss is a weighted sum of top states.
pub fn attribute_encoder(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (input, h, k) = (4, 5, 4);
    let mut layers = vec![LstmLayer::<f64>::init(input, h, &mut rng), LstmLayer::init(h, h, &mut rng)];
    for l in &mut layers {
        randomize_biases(&mut l.b, &mut rng);
    }
    let x = random(&mut rng, (k, input), 1.0);
    let w = random(&mut rng, (k, h), 1.0);
    let loss = |p: &[Array2<f64>]| {
        let layers: Vec<_> = (0..2)
            .map(|l| LstmLayer { wx: p[3 * l].clone(), wh: p[3 * l + 1].clone(), b: p[3 * l + 2].clone() })
            .collect();
        (encoder_forward(&layers, &p[6]).unwrap().0 * &w).sum()
    };
    let (_, cache) = encoder_forward(&layers, &x).unwrap();
    let mut grads = vec![LstmLayer::zeros(input, h), LstmLayer::zeros(h, h)];
    let dx = encoder_backward(&layers, &cache, &w, &mut grads);
    let mut params = Vec::new();
    let mut analytic = Vec::new();
    for (l, g) in layers.into_iter().zip(grads) {
        params.extend([l.wx, l.wh, l.b]);
        analytic.extend([g.wx, g.wh, g.b]);
    }
    params.push(x);
    analytic.push(dx);
    max_rel_error(&mut params, &analytic, &loss)
}

/// Softmax cross-entropy: the logit gradient is `p - onehot(target)`.
pub fn classifier(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = 6;
    let target = rng.gen_range(0..k);
    let logits = random(&mut rng, (1, k), 3.0);
    let loss = |p: &[Array2<f64>]| {
        let row: Array1<f64> = p[0].row(0).to_owned();
        cross_entropy(softmax(row.view()).view(), target)
    };
    let mut analytic = softmax(logits.row(0)).insert_axis(ndarray::Axis(0));
    analytic[[0, target]] -= 1.0;
    max_rel_error(&mut [logits], &[analytic], &loss)
}

/// Whole network on a 4-place net, 3 steps, hidden width 5; loss is the
/// summed cross-entropy over all steps. Checks every parameter.
pub fn end_to_end(seed: u64) -> f64 {
    let mut b = NetBuilder::new();
    let p = b.places(4);
    b.transition(Some("A"), &[p[0]], &[p[1]]);
    b.transition(Some("B"), &[p[1]], &[p[2]]);
    b.transition(None, &[p[1]], &[p[2]]);
    b.transition(Some("C"), &[p[2]], &[p[3]]);
    let net = b.build().unwrap();
    let log = simulate_log(&net, 6, seed, &SimOptions::default());
    let enc = Encoder::fit(&net, &log, &EncoderConfig::default()).unwrap();
    let ds = Dataset::build(&net, enc, &log).unwrap();
    let trace = ds.traces.iter().find(|t| t.len() == 3).expect("a three-event trace");
    assert_eq!(ds.adjacency.nrows(), 4);
    let seq = Sequence {
        nodes: trace.nodes.clone(),
        attrs: trace.attrs.clone(),
        labels: trace.labels.clone(),
        vocab_key: ds.encoder.vocab_key(),
    };
    assert!(seq.labels.iter().all(|l| matches!(l, StepLabel::Class(_))));
    let cfg = ModelConfig { embed_dim: 3, grnn_hidden: vec![5, 5], lstm_hidden: 5, lstm_layers: 2 };
    let mut model = Model::<f64>::new(Architecture::new(cfg, &ds.encoder), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    for t in model.tensors_mut() {
        // nonzero biases so every gate path is exercised
        t.mapv_inplace(|v| v + rng.gen_range(-0.3..0.3));
    }
    let a = adjacency_as::<f64>(&ds.normalized);
    let mut grad = model.zeros_like();
    model.sequence_loss(&a, &seq, Some(&mut grad)).unwrap();
    let analytic: Vec<Array2<f64>> = grad.tensors().into_iter().map(|(_, t)| t.clone()).collect();
    let mut params: Vec<Array2<f64>> = model.tensors().into_iter().map(|(_, t)| t.clone()).collect();
    let loss = |p: &[Array2<f64>]| {
        let mut m = model.clone();
        for (dst, src) in m.tensors_mut().into_iter().zip(p) {
            dst.assign(src);
        }
        m.sequence_loss(&a, &seq, None).unwrap().0
    };
    max_rel_error(&mut params, &analytic, &loss)
}

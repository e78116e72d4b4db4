//! Graph-convolutional GRU cell. Every linear map of a GRU is replaced by a
//! graph convolution over the place graph:
//!
//! ```text
//! z = σ(ÂX·Wxz + ÂH·Whz + bz)
//! r = σ(ÂX·Wxr + ÂH·Whr + br)
//! c = tanh(ÂX·Wxc + r ∘ (ÂH·Whc) + bc)
//! h = z ∘ H + (1 - z) ∘ c
//! ```
//!
//! The three gates are stored side by side in `wx`, `wh` and `b`.

use ndarray::{s, Array2, Axis};

use super::ops::sigmoid;
use super::{check_finite, uniform, Scalar};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GrnnCell<T> {
    /// `input x 3H`
    pub wx: Array2<T>,
    /// `H x 3H`
    pub wh: Array2<T>,
    /// `1 x 3H`
    pub b: Array2<T>,
}

#[derive(Debug, Clone)]
pub struct GrnnCache<T> {
    ax: Array2<T>,
    ah: Array2<T>,
    h_prev: Array2<T>,
    /// `ÂH·Whc`, before the reset gate
    hc: Array2<T>,
    z: Array2<T>,
    r: Array2<T>,
    c: Array2<T>,
}

impl<T> GrnnCache<T> {
    /// Update and reset gate activations `(z, r)`.
    pub fn gates(&self) -> (&Array2<T>, &Array2<T>) {
        (&self.z, &self.r)
    }
}

impl<T: Scalar> GrnnCell<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        GrnnCell {
            wx: Array2::zeros((input, 3 * hidden)),
            wh: Array2::zeros((hidden, 3 * hidden)),
            b: Array2::zeros((1, 3 * hidden)),
        }
    }

    pub fn init(input: usize, hidden: usize, rng: &mut impl rand::Rng) -> Self {
        GrnnCell {
            wx: uniform((input, 3 * hidden), input, rng),
            wh: uniform((hidden, 3 * hidden), hidden, rng),
            b: Array2::zeros((1, 3 * hidden)),
        }
    }

    pub fn hidden(&self) -> usize {
        self.wh.nrows()
    }

    pub fn step(&self, a_hat: &Array2<T>, x: &Array2<T>, h_prev: &Array2<T>) -> Result<(Array2<T>, GrnnCache<T>)> {
        let hd = self.hidden();
        let ax = a_hat.dot(x);
        let ah = a_hat.dot(h_prev);
        let gx = ax.dot(&self.wx) + &self.b;
        let gh = ah.dot(&self.wh);
        let z = (&gx.slice(s![.., ..hd]) + &gh.slice(s![.., ..hd])).mapv(sigmoid);
        let r = (&gx.slice(s![.., hd..2 * hd]) + &gh.slice(s![.., hd..2 * hd])).mapv(sigmoid);
        let hc = gh.slice(s![.., 2 * hd..]).to_owned();
        let c = (&gx.slice(s![.., 2 * hd..]) + &(&r * &hc)).mapv(T::tanh);
        let h = &z * h_prev + &(z.mapv(|v| T::one() - v) * &c);
        check_finite(&h, "graph recurrent state")?;
        let cache = GrnnCache {
            ax,
            ah,
            h_prev: h_prev.clone(),
            hc,
            z,
            r,
            c,
        };
        Ok((h, cache))
    }

    /// Accumulates parameter gradients into `grad`; returns the gradients of
    /// the input features and of the previous state.
    pub fn backward(
        &self,
        a_hat: &Array2<T>,
        cache: &GrnnCache<T>,
        dh: &Array2<T>,
        grad: &mut GrnnCell<T>,
    ) -> (Array2<T>, Array2<T>) {
        let one = T::one();
        let GrnnCache { ax, ah, h_prev, hc, z, r, c } = cache;
        let dz = dh * &(h_prev - c);
        let dc = dh * &z.mapv(|v| one - v);
        let dc_pre = dc * &c.mapv(|v| one - v * v);
        let dr = &dc_pre * hc;
        let dr_pre = dr * &r.mapv(|v| v * (one - v));
        let dz_pre = dz * &z.mapv(|v| v * (one - v));

        let n = dh.nrows();
        let hd = self.hidden();
        let mut dgx = Array2::zeros((n, 3 * hd));
        dgx.slice_mut(s![.., ..hd]).assign(&dz_pre);
        dgx.slice_mut(s![.., hd..2 * hd]).assign(&dr_pre);
        dgx.slice_mut(s![.., 2 * hd..]).assign(&dc_pre);
        let mut dgh = dgx.clone();
        dgh.slice_mut(s![.., 2 * hd..]).assign(&(&dc_pre * r));

        grad.b += &dgx.sum_axis(Axis(0)).insert_axis(Axis(0));
        grad.wx += &ax.t().dot(&dgx);
        grad.wh += &ah.t().dot(&dgh);
        let a_t = a_hat.t();
        let dx = a_t.dot(&dgx.dot(&self.wx.t()));
        let dh_prev = dh * z + &a_t.dot(&dgh.dot(&self.wh.t()));
        (dx, dh_prev)
    }
}

/// Stacked cells; cell `l + 1` consumes the states of cell `l`.
#[derive(Debug, Clone)]
pub struct StackCache<T> {
    /// `steps[t][l]`
    steps: Vec<Vec<GrnnCache<T>>>,
}

/// Runs the stack over `xs` from zero states. Steps with `mask[t] == false`
/// carry every state through unchanged. Returns the top-cell state per step.
pub fn stack_forward<T: Scalar>(
    cells: &[GrnnCell<T>],
    a_hat: &Array2<T>,
    xs: &[Array2<T>],
    mask: &[bool],
) -> Result<(Vec<Array2<T>>, StackCache<T>)> {
    let n = a_hat.nrows();
    let mut states: Vec<Array2<T>> = cells.iter().map(|c| Array2::zeros((n, c.hidden()))).collect();
    let mut out = Vec::with_capacity(xs.len());
    let mut caches = Vec::with_capacity(xs.len());
    for (t, x) in xs.iter().enumerate() {
        if !mask.get(t).copied().unwrap_or(true) {
            out.push(states.last().cloned().unwrap_or_else(|| x.clone()));
            caches.push(Vec::new());
            continue;
        }
        let mut input = x.clone();
        let mut step_caches = Vec::with_capacity(cells.len());
        for (cell, state) in cells.iter().zip(states.iter_mut()) {
            let (h, cache) = cell.step(a_hat, &input, state)?;
            *state = h.clone();
            input = h;
            step_caches.push(cache);
        }
        out.push(input);
        caches.push(step_caches);
    }
    Ok((out, StackCache { steps: caches }))
}

/// Backpropagates `d_out[t]` (gradient of each top state) through time.
/// Returns the gradient of each step's input.
pub fn stack_backward<T: Scalar>(
    cells: &[GrnnCell<T>],
    a_hat: &Array2<T>,
    cache: &StackCache<T>,
    d_out: &[Array2<T>],
    grads: &mut [GrnnCell<T>],
) -> Vec<Array2<T>> {
    let n = a_hat.nrows();
    let mut carry: Vec<Array2<T>> = cells.iter().map(|c| Array2::zeros((n, c.hidden()))).collect();
    let mut dxs = vec![Array2::zeros((0, 0)); d_out.len()];
    for t in (0..d_out.len()).rev() {
        let step = &cache.steps[t];
        let top = carry.len() - 1;
        carry[top] += &d_out[t];
        if step.is_empty() {
            // masked step: the state passed straight through
            continue;
        }
        let mut d = carry[top].clone();
        for l in (0..cells.len()).rev() {
            let dh = if l == top { d } else { d + &carry[l] };
            let (dx, dh_prev) = cells[l].backward(a_hat, &step[l], &dh, &mut grads[l]);
            carry[l] = dh_prev;
            d = dx;
        }
        dxs[t] = d;
    }
    dxs
}

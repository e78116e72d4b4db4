//! LSTM layers over row vectors (`1 x width`). Gates are stored side by side
//! in the order input, forget, candidate, output.

use ndarray::{s, Array2, Axis};

use super::ops::sigmoid;
use super::{check_finite, uniform, Scalar};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer<T> {
    /// `input x 4H`
    pub wx: Array2<T>,
    /// `H x 4H`
    pub wh: Array2<T>,
    /// `1 x 4H`
    pub b: Array2<T>,
}

#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    x: Array2<T>,
    h_prev: Array2<T>,
    c_prev: Array2<T>,
    i: Array2<T>,
    f: Array2<T>,
    g: Array2<T>,
    o: Array2<T>,
    tanh_c: Array2<T>,
}

impl<T: Scalar> LstmLayer<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmLayer {
            wx: Array2::zeros((input, 4 * hidden)),
            wh: Array2::zeros((hidden, 4 * hidden)),
            b: Array2::zeros((1, 4 * hidden)),
        }
    }

    pub fn init(input: usize, hidden: usize, rng: &mut impl rand::Rng) -> Self {
        LstmLayer {
            wx: uniform((input, 4 * hidden), input, rng),
            wh: uniform((hidden, 4 * hidden), hidden, rng),
            b: Array2::zeros((1, 4 * hidden)),
        }
    }

    pub fn hidden(&self) -> usize {
        self.wh.nrows()
    }

    pub fn step(&self, x: &Array2<T>, h_prev: &Array2<T>, c_prev: &Array2<T>) -> (Array2<T>, Array2<T>, LstmCache<T>) {
        let hd = self.hidden();
        let pre = x.dot(&self.wx) + h_prev.dot(&self.wh) + &self.b;
        let i = pre.slice(s![.., ..hd]).mapv(sigmoid);
        let f = pre.slice(s![.., hd..2 * hd]).mapv(sigmoid);
        let g = pre.slice(s![.., 2 * hd..3 * hd]).mapv(T::tanh);
        let o = pre.slice(s![.., 3 * hd..]).mapv(sigmoid);
        let c = &f * c_prev + &(&i * &g);
        let tanh_c = c.mapv(T::tanh);
        let h = &o * &tanh_c;
        let cache = LstmCache {
            x: x.clone(),
            h_prev: h_prev.clone(),
            c_prev: c_prev.clone(),
            i,
            f,
            g,
            o,
            tanh_c,
        };
        (h, c, cache)
    }

    /// Returns gradients of the input, previous hidden and previous cell state.
    pub fn backward(
        &self,
        cache: &LstmCache<T>,
        dh: &Array2<T>,
        dc: &Array2<T>,
        grad: &mut LstmLayer<T>,
    ) -> (Array2<T>, Array2<T>, Array2<T>) {
        let one = T::one();
        let LstmCache { x, h_prev, c_prev, i, f, g, o, tanh_c } = cache;
        let hd = self.hidden();
        let d_o = dh * tanh_c;
        let dc = dc + &(dh * o * &tanh_c.mapv(|v| one - v * v));
        let mut dpre = Array2::zeros((dh.nrows(), 4 * hd));
        dpre.slice_mut(s![.., ..hd]).assign(&(&dc * g * &i.mapv(|v| v * (one - v))));
        dpre.slice_mut(s![.., hd..2 * hd]).assign(&(&dc * c_prev * &f.mapv(|v| v * (one - v))));
        dpre.slice_mut(s![.., 2 * hd..3 * hd]).assign(&(&dc * i * &g.mapv(|v| one - v * v)));
        dpre.slice_mut(s![.., 3 * hd..]).assign(&(d_o * &o.mapv(|v| v * (one - v))));
        grad.wx += &x.t().dot(&dpre);
        grad.wh += &h_prev.t().dot(&dpre);
        grad.b += &dpre.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dx = dpre.dot(&self.wx.t());
        let dh_prev = dpre.dot(&self.wh.t());
        let dc_prev = dc * f;
        (dx, dh_prev, dc_prev)
    }
}

pub struct EncoderCache<T> {
    /// `steps[t][l]`
    steps: Vec<Vec<LstmCache<T>>>,
}

/// Runs stacked layers over the rows of `inputs` from zero states and returns
/// the top-layer hidden state per step (`steps x H`).
pub fn encoder_forward<T: Scalar>(layers: &[LstmLayer<T>], inputs: &Array2<T>) -> Result<(Array2<T>, EncoderCache<T>)> {
    let top = layers.last().map_or(inputs.ncols(), LstmLayer::hidden);
    let mut h: Vec<Array2<T>> = layers.iter().map(|l| Array2::zeros((1, l.hidden()))).collect();
    let mut c = h.clone();
    let mut out = Array2::zeros((inputs.nrows(), top));
    let mut steps = Vec::with_capacity(inputs.nrows());
    for (t, row) in inputs.axis_iter(Axis(0)).enumerate() {
        let mut x = row.insert_axis(Axis(0)).to_owned();
        let mut caches = Vec::with_capacity(layers.len());
        for (l, layer) in layers.iter().enumerate() {
            let (hn, cn, cache) = layer.step(&x, &h[l], &c[l]);
            h[l] = hn.clone();
            c[l] = cn;
            caches.push(cache);
            x = hn;
        }
        out.row_mut(t).assign(&x.row(0));
        steps.push(caches);
    }
    check_finite(&out, "attribute encoder state")?;
    Ok((out, EncoderCache { steps }))
}

/// Final top-layer hidden state, the representation of the whole prefix.
pub fn final_hidden<T: Scalar>(layers: &[LstmLayer<T>], inputs: &Array2<T>) -> Result<ndarray::Array1<T>> {
    let (out, _) = encoder_forward(layers, inputs)?;
    let k = out.nrows();
    if k == 0 {
        return Err(crate::Error::Shape("attribute encoder needs at least one step".into()));
    }
    Ok(out.row(k - 1).to_owned())
}

/// Backpropagates `d_out` (`steps x H`) through time; returns the input gradient.
pub fn encoder_backward<T: Scalar>(
    layers: &[LstmLayer<T>],
    cache: &EncoderCache<T>,
    d_out: &Array2<T>,
    grads: &mut [LstmLayer<T>],
) -> Array2<T> {
    let mut dh: Vec<Array2<T>> = layers.iter().map(|l| Array2::zeros((1, l.hidden()))).collect();
    let mut dc = dh.clone();
    let in_width = layers.first().map_or(d_out.ncols(), |l| l.wx.nrows());
    let mut dx_out = Array2::zeros((d_out.nrows(), in_width));
    for t in (0..d_out.nrows()).rev() {
        let mut d = d_out.row(t).insert_axis(Axis(0)).to_owned();
        for l in (0..layers.len()).rev() {
            let dh_total = d + &dh[l];
            let (dx, dh_prev, dc_prev) = layers[l].backward(&cache.steps[t][l], &dh_total, &dc[l], &mut grads[l]);
            dh[l] = dh_prev;
            dc[l] = dc_prev;
            d = dx;
        }
        dx_out.row_mut(t).assign(&d.row(0));
    }
    dx_out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_step_is_one_layer_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = LstmLayer::<f64>::init(3, 2, &mut rng);
        let x = Array2::from_shape_vec((1, 3), vec![0.1, -0.2, 0.3]).unwrap();
        let (h, _, _) = layer.step(&x, &Array2::zeros((1, 2)), &Array2::zeros((1, 2)));
        let fin = final_hidden(std::slice::from_ref(&layer), &x).unwrap();
        assert_eq!(fin, h.row(0));
    }

    #[test]
    fn outputs_are_causal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let layers = vec![LstmLayer::<f64>::init(2, 3, &mut rng), LstmLayer::init(3, 3, &mut rng)];
        let x = Array2::from_shape_fn((4, 2), |(i, j)| (i + j) as f64 * 0.1);
        let (full, _) = encoder_forward(&layers, &x).unwrap();
        let (part, _) = encoder_forward(&layers, &x.slice(s![..2, ..]).to_owned()).unwrap();
        assert_eq!(full.slice(s![..2, ..]), part);
    }
}

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::{lit, Scalar};
use crate::error::{Error, Result};

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Graph convolution `Â X Θ` for a precomputed normalized adjacency `Â`.
pub fn gcn_forward<T: Scalar>(a_hat: &Array2<T>, x: &Array2<T>, theta: &Array2<T>) -> Result<Array2<T>> {
    if a_hat.ncols() != x.nrows() || x.ncols() != theta.nrows() || !a_hat.is_square() {
        return Err(Error::Shape(format!(
            "gcn: adjacency {:?}, features {:?}, weights {:?}",
            a_hat.dim(),
            x.dim(),
            theta.dim()
        )));
    }
    Ok(a_hat.dot(x).dot(theta))
}

/// Coordinate-wise maximum over rows, with the winning row of each column
/// (first on ties).
pub fn readout<T: Scalar>(h: ArrayView2<'_, T>) -> Result<(Array1<T>, Vec<usize>)> {
    if h.nrows() == 0 {
        return Err(Error::Shape("readout over zero nodes".into()));
    }
    let mut best = h.row(0).to_owned();
    let mut arg = vec![0; h.ncols()];
    for (i, row) in h.axis_iter(Axis(0)).enumerate().skip(1) {
        for (j, &v) in row.iter().enumerate() {
            if v > best[j] {
                best[j] = v;
                arg[j] = i;
            }
        }
    }
    Ok((best, arg))
}

pub fn softmax<T: Scalar>(logits: ArrayView1<'_, T>) -> Array1<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut p = logits.mapv(|v| (v - max).exp());
    let sum = p.sum();
    p.mapv_inplace(|v| v / sum);
    p
}

/// Negative log-probability of `target`, floored to keep it finite.
pub fn cross_entropy<T: Scalar>(probs: ArrayView1<'_, T>, target: usize) -> T {
    -probs[target].max(lit(1e-30)).ln()
}

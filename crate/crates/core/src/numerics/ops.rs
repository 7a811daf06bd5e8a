//! Forward definitions of the differentiable operations.
//!
//! Each function is pure and returns a fresh tensor; the tape in
//! [`super::tape`] records them and supplies the matching backward rules.

use super::{Tensor, TensorError};

/// Lower/upper clamp applied to probabilities inside the cross-entropy.
pub const PROB_CLAMP: f64 = 1e-7;

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

/// `c = alpha * op(a) * op(b)` written into `out` (overwritten), where the
/// transposes are expressed through strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    out: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    // a is m x k (or k x m when transposed), b is k x n (or n x k).
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    // SAFETY: all slices are sized for the strides computed above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let (m, k) = a.dims();
    let (k2, n) = b.dims();
    if k != k2 {
        return Err(mismatch("matmul", a, b));
    }
    let mut out = vec![0.0; m * n];
    gemm(m, k, n, a.data(), false, b.data(), false, &mut out);
    Tensor::matrix(m, n, out)?.ensure_finite("matmul")
}

fn zip_with(
    op: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Tensor, TensorError> {
    if a.shape() != b.shape() {
        return Err(mismatch(op, a, b));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
    Tensor::new(a.shape().to_vec(), data)?.ensure_finite(op)
}

fn map(op: &'static str, a: &Tensor, f: impl Fn(f64) -> f64) -> Result<Tensor, TensorError> {
    let data = a.data().iter().map(|x| f(*x)).collect();
    Tensor::new(a.shape().to_vec(), data)?.ensure_finite(op)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    zip_with("add", a, b, |x, y| x + y)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    zip_with("sub", a, b, |x, y| x - y)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    zip_with("mul", a, b, |x, y| x * y)
}

pub fn scale(a: &Tensor, factor: f64) -> Result<Tensor, TensorError> {
    map("scale", a, |x| x * factor)
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(a: &Tensor) -> Result<Tensor, TensorError> {
    map("sigmoid", a, sigmoid_scalar)
}

pub fn tanh(a: &Tensor) -> Result<Tensor, TensorError> {
    map("tanh", a, f64::tanh)
}

/// Adds a bias row to every row of `a`.
pub fn add_bias(a: &Tensor, bias: &Tensor) -> Result<Tensor, TensorError> {
    let (r, c) = a.dims();
    if bias.len() != c {
        return Err(mismatch("add_bias", a, bias));
    }
    let mut data = a.data().to_vec();
    for i in 0..r {
        for (v, b) in data[i * c..(i + 1) * c].iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
    Tensor::matrix(r, c, data)?.ensure_finite("add_bias")
}

pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor, TensorError> {
    let rows = parts.first().map_or(0, |t| t.rows());
    let mut cols = 0;
    for p in parts {
        if p.rows() != rows {
            return Err(mismatch("concat_cols", parts[0], p));
        }
        cols += p.cols();
    }
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for p in parts {
            data.extend_from_slice(p.row(r));
        }
    }
    Tensor::matrix(rows, cols, data)
}

pub fn concat_rows(parts: &[&Tensor]) -> Result<Tensor, TensorError> {
    let cols = parts.first().map_or(0, |t| t.cols());
    let mut rows = 0;
    let mut data = Vec::new();
    for p in parts {
        if p.cols() != cols {
            return Err(mismatch("concat_rows", parts[0], p));
        }
        rows += p.rows();
        data.extend_from_slice(p.data());
    }
    Tensor::matrix(rows, cols, data)
}

/// Numerically stable softmax of every row.
pub fn rowwise_softmax(a: &Tensor) -> Result<Tensor, TensorError> {
    let (r, c) = a.dims();
    let mut data = a.data().to_vec();
    for i in 0..r {
        let row = &mut data[i * c..(i + 1) * c];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Tensor::matrix(r, c, data)?.ensure_finite("rowwise_softmax")
}

/// Sums over rows, producing a `1 x cols` row.
pub fn sum_rows(a: &Tensor) -> Result<Tensor, TensorError> {
    let (r, c) = a.dims();
    let mut out = vec![0.0; c];
    for i in 0..r {
        for (o, v) in out.iter_mut().zip(a.row(i)) {
            *o += v;
        }
    }
    Tensor::matrix(1, c, out)?.ensure_finite("sum_rows")
}

pub fn sum_all(a: &Tensor) -> Result<Tensor, TensorError> {
    Tensor::scalar(a.data().iter().sum()).ensure_finite("sum")
}

pub fn mean_all(a: &Tensor) -> Result<Tensor, TensorError> {
    if a.is_empty() {
        return Err(TensorError::Invalid("mean of empty tensor".into()));
    }
    Tensor::scalar(a.data().iter().sum::<f64>() / a.len() as f64).ensure_finite("mean")
}

pub fn gather_rows(a: &Tensor, index: &[usize]) -> Result<Tensor, TensorError> {
    let (r, c) = a.dims();
    let mut data = Vec::with_capacity(index.len() * c);
    for &i in index {
        if i >= r {
            return Err(TensorError::IndexOutOfRange { index: i, len: r });
        }
        data.extend_from_slice(a.row(i));
    }
    Tensor::matrix(index.len(), c, data)
}

/// Adds row `e` of `a` into output row `segment[e]`.
pub fn segment_sum(a: &Tensor, segment: &[usize], n_segments: usize) -> Result<Tensor, TensorError> {
    let (r, c) = a.dims();
    if segment.len() != r {
        return Err(TensorError::Invalid("segment index length differs from rows".into()));
    }
    let mut out = vec![0.0; n_segments * c];
    for (e, &s) in segment.iter().enumerate() {
        if s >= n_segments {
            return Err(TensorError::IndexOutOfRange { index: s, len: n_segments });
        }
        for (o, v) in out[s * c..(s + 1) * c].iter_mut().zip(a.row(e)) {
            *o += v;
        }
    }
    Tensor::matrix(n_segments, c, out)?.ensure_finite("segment_sum")
}

/// Softmax taken column-wise over the rows sharing a segment id.
pub fn segment_softmax(
    a: &Tensor,
    segment: &[usize],
    n_segments: usize,
) -> Result<Tensor, TensorError> {
    let (r, c) = a.dims();
    if segment.len() != r {
        return Err(TensorError::Invalid("segment index length differs from rows".into()));
    }
    let mut max = vec![f64::NEG_INFINITY; n_segments * c];
    for (e, &s) in segment.iter().enumerate() {
        if s >= n_segments {
            return Err(TensorError::IndexOutOfRange { index: s, len: n_segments });
        }
        for (m, v) in max[s * c..(s + 1) * c].iter_mut().zip(a.row(e)) {
            *m = m.max(*v);
        }
    }
    let mut out = a.data().to_vec();
    let mut sum = vec![0.0; n_segments * c];
    for (e, &s) in segment.iter().enumerate() {
        for j in 0..c {
            let v = (out[e * c + j] - max[s * c + j]).exp();
            out[e * c + j] = v;
            sum[s * c + j] += v;
        }
    }
    for (e, &s) in segment.iter().enumerate() {
        for j in 0..c {
            out[e * c + j] /= sum[s * c + j];
        }
    }
    Tensor::matrix(r, c, out)?.ensure_finite("segment_softmax")
}

/// Sums consecutive column blocks of width `block`: `r x (h*block) -> r x h`.
pub fn block_sum_cols(a: &Tensor, block: usize) -> Result<Tensor, TensorError> {
    let (r, c) = a.dims();
    if block == 0 || c % block != 0 {
        return Err(TensorError::Invalid(format!("{c} columns not divisible by block {block}")));
    }
    let h = c / block;
    let mut out = vec![0.0; r * h];
    for i in 0..r {
        let row = a.row(i);
        for j in 0..h {
            out[i * h + j] = row[j * block..(j + 1) * block].iter().sum();
        }
    }
    Tensor::matrix(r, h, out)?.ensure_finite("block_sum_cols")
}

/// Repeats every column `times` times in place: `r x h -> r x (h*times)`.
pub fn repeat_cols(a: &Tensor, times: usize) -> Result<Tensor, TensorError> {
    let (r, h) = a.dims();
    let mut out = Vec::with_capacity(r * h * times);
    for i in 0..r {
        for v in a.row(i) {
            out.extend(std::iter::repeat(*v).take(times));
        }
    }
    Tensor::matrix(r, h * times, out)
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Mean binary cross-entropy of probabilities against {0,1} targets.
pub fn bce_loss(predictions: &Tensor, targets: &Tensor) -> Result<Tensor, TensorError> {
    if predictions.len() != targets.len() {
        return Err(mismatch("bce", predictions, targets));
    }
    if predictions.is_empty() {
        return Err(TensorError::Invalid("bce of empty batch".into()));
    }
    let total: f64 = predictions
        .data()
        .iter()
        .zip(targets.data())
        .map(|(p, y)| {
            let p = clamp_prob(*p);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Tensor::scalar(total / predictions.len() as f64).ensure_finite("bce")
}

/// d(bce)/dp for one element, zero where the clamp is active.
pub(crate) fn bce_grad(p: f64, y: f64, n: usize) -> f64 {
    if p < PROB_CLAMP || p > 1.0 - PROB_CLAMP {
        0.0
    } else {
        (p - y) / (p * (1.0 - p)) / n as f64
    }
}

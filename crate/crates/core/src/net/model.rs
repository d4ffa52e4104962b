//! Batched forward and reverse pass.
//!
//! Convolutions run as one GEMM against an overlapping strided view of the
//! input (row `t` starts at `input[t · C]`), so no im2col copy is made. The
//! dense layers are evaluated for the whole batch at once. Convolution weight
//! gradients are accumulated per fixed-size chunk of samples and the chunk
//! sums are added in order, which keeps results identical for any number of
//! worker threads.

use rayon::prelude::*;

use super::arch::{Activation, NetParams, NetShape, Tensor};
use super::linalg::{gemm, Mat, MatMut, Real};
use crate::error::{Error, Result};

/// Samples per gradient-reduction chunk.
const CHUNK: usize = 25;

/// Valid cross-correlation with stride 1.
///
/// `input` is `len × in_channels` row-major, `filters` is
/// `[filter][tap][channel]`. Returns `(len - width + 1) × filters` row-major.
pub fn conv1d<T: Real>(
    input: &[T],
    len: usize,
    in_channels: usize,
    filters: &[T],
    biases: &[T],
    width: usize,
) -> Result<Vec<T>> {
    if width == 0 || len < width {
        return Err(Error::Shape(format!("conv1d needs 1 <= width <= len, got width {width}, len {len}")));
    }
    if input.len() != len * in_channels {
        return Err(Error::Shape(format!("input has {} values, expected {len}x{in_channels}", input.len())));
    }
    let n_filters = biases.len();
    if filters.len() != n_filters * width * in_channels {
        return Err(Error::Shape(format!(
            "{} filter weights do not match {n_filters} filters of {width}x{in_channels}",
            filters.len()
        )));
    }
    let rows = len - width + 1;
    let mut out = vec![T::zero(); rows * n_filters];
    conv_forward(input, in_channels, filters, biases, width, rows, &mut out);
    Ok(out)
}

fn conv_forward<T: Real>(
    input: &[T],
    in_channels: usize,
    filters: &[T],
    biases: &[T],
    width: usize,
    rows: usize,
    out: &mut [T],
) {
    let n_filters = biases.len();
    let cols = width * in_channels;
    let x = Mat::new(input, rows, cols, in_channels, 1);
    let w = Mat::rows_of(filters, n_filters, cols).t();
    gemm(T::one(), x, w, T::zero(), MatMut::rows_of(out, rows, n_filters));
    for row in out.chunks_exact_mut(n_filters) {
        for (v, &b) in row.iter_mut().zip(biases) {
            *v += b;
        }
    }
}

/// Weight and bias gradients of a convolution, plus optionally the input
/// gradient (with a scratch buffer of `rows × width · in_channels`). `dz` is
/// the gradient at the pre-activation output.
#[allow(clippy::too_many_arguments)]
fn conv_backward<T: Real>(
    input: &[T],
    in_channels: usize,
    filters: &[T],
    width: usize,
    rows: usize,
    n_filters: usize,
    dz: &[T],
    dw: &mut [T],
    db: &mut [T],
    dinput: Option<(&mut [T], &mut [T])>,
) {
    let cols = width * in_channels;
    let x = Mat::new(input, rows, cols, in_channels, 1);
    let dz_m = Mat::rows_of(dz, rows, n_filters);
    gemm(T::one(), dz_m.t(), x, T::one(), MatMut::rows_of(dw, n_filters, cols));
    for row in dz.chunks_exact(n_filters) {
        for (b, &g) in db.iter_mut().zip(row) {
            *b += g;
        }
    }
    if let Some((dx, scratch)) = dinput {
        // P = dz · W holds, at (t, k·C + c), the contribution of tap k to
        // input row t + k; scatter-add it back along the sliding window.
        let p = &mut scratch[..rows * cols];
        gemm(T::one(), dz_m, Mat::rows_of(filters, n_filters, cols), T::zero(), MatMut::rows_of(p, rows, cols));
        dx.iter_mut().for_each(|v| *v = T::zero());
        for (t, row) in p.chunks_exact(cols).enumerate() {
            for (d, &v) in dx[t * in_channels..t * in_channels + cols].iter_mut().zip(row) {
                *d += v;
            }
        }
    }
}

fn dense_forward<T: Real>(a: &[T], batch: usize, w: &[T], b: &[T], act: Activation, out: &mut [T]) {
    let n_out = b.len();
    let n_in = w.len() / n_out;
    gemm(
        T::one(),
        Mat::rows_of(a, batch, n_in),
        Mat::rows_of(w, n_out, n_in).t(),
        T::zero(),
        MatMut::rows_of(out, batch, n_out),
    );
    for row in out.chunks_exact_mut(n_out) {
        for (v, &bias) in row.iter_mut().zip(b) {
            *v = act.apply(*v + bias);
        }
    }
}

/// `g` is the gradient at the pre-activation; writes `da` when requested.
fn dense_backward<T: Real>(
    a: &[T],
    batch: usize,
    w: &[T],
    g: &[T],
    dw: &mut [T],
    db: &mut [T],
    da: Option<&mut [T]>,
) {
    let n_out = db.len();
    let n_in = w.len() / n_out;
    let g_m = Mat::rows_of(g, batch, n_out);
    gemm(T::one(), g_m.t(), Mat::rows_of(a, batch, n_in), T::one(), MatMut::rows_of(dw, n_out, n_in));
    for row in g.chunks_exact(n_out) {
        for (b, &v) in db.iter_mut().zip(row) {
            *b += v;
        }
    }
    if let Some(da) = da {
        gemm(T::one(), g_m, Mat::rows_of(w, n_out, n_in), T::zero(), MatMut::rows_of(da, batch, n_in));
    }
}

fn tanh_in_place<T: Real>(v: &mut [T]) {
    v.iter_mut().for_each(|x| *x = x.act_tanh());
}

/// Multiplies `g` by the activation derivative, given the activation output.
fn through_activation<T: Real>(g: &mut [T], out: &[T], act: Activation) {
    if act == Activation::Identity {
        return;
    }
    for (gv, &y) in g.iter_mut().zip(out) {
        *gv *= act.derivative_from_output(y);
    }
}

fn check_window<T>(shape: &NetShape, w: &[T]) -> Result<()> {
    if w.len() != shape.input_size() {
        return Err(Error::Shape(format!(
            "window has {} values, expected {}x{}",
            w.len(),
            shape.input_len,
            shape.in_channels
        )));
    }
    Ok(())
}

/// Activations of one batch, kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct BatchForward<T> {
    shape: NetShape,
    batch: usize,
    inputs: Vec<T>,
    conv1: Vec<T>,
    conv2: Vec<T>,
    dense1: Vec<T>,
    dense2: Vec<T>,
    raw: Vec<T>,
    outputs: Vec<T>,
}

impl<T: Real> BatchForward<T> {
    pub fn batch_size(&self) -> usize {
        self.batch
    }

    /// Non-negative network output of sample `i`.
    pub fn output(&self, i: usize) -> &[T] {
        let n = self.shape.outputs;
        &self.outputs[i * n..(i + 1) * n]
    }

    /// All outputs, `batch × outputs` row-major.
    pub fn outputs(&self) -> &[T] {
        &self.outputs
    }

    /// First convolution activations of sample `i`, with their `(rows, cols)`.
    pub fn conv1_activations(&self, i: usize) -> (&[T], (usize, usize)) {
        let s = &self.shape;
        let n = s.conv1_len() * s.conv1_filters;
        (&self.conv1[i * n..(i + 1) * n], (s.conv1_len(), s.conv1_filters))
    }

    pub fn conv2_activations(&self, i: usize) -> (&[T], (usize, usize)) {
        let s = &self.shape;
        let n = s.flat_len();
        (&self.conv2[i * n..(i + 1) * n], (s.conv2_len(), s.conv2_filters))
    }
}

/// Runs the network on every window and keeps what the reverse pass needs.
pub fn forward_batch<T: Real>(params: &NetParams<T>, windows: &[&[T]]) -> Result<BatchForward<T>> {
    let s = params.shape;
    s.validate()?;
    for w in windows {
        check_window(&s, w)?;
    }
    let batch = windows.len();
    let in_len = s.input_size();
    let c1_len = s.conv1_len() * s.conv1_filters;
    let flat = s.flat_len();

    let inputs: Vec<T> = windows.iter().flat_map(|w| w.iter().copied()).collect();
    let mut conv1 = vec![T::zero(); batch * c1_len];
    let mut conv2 = vec![T::zero(); batch * flat];
    let (w1, b1) = (params.tensor(Tensor::Conv1Weight), params.tensor(Tensor::Conv1Bias));
    let (w2, b2) = (params.tensor(Tensor::Conv2Weight), params.tensor(Tensor::Conv2Bias));
    conv1
        .par_chunks_mut(c1_len.max(1))
        .zip(conv2.par_chunks_mut(flat.max(1)))
        .zip(inputs.par_chunks(in_len.max(1)))
        .for_each(|((a1, a2), x)| {
            conv_forward(x, s.in_channels, w1, b1, s.conv1_width, s.conv1_len(), a1);
            tanh_in_place(a1);
            conv_forward(a1, s.conv1_filters, w2, b2, s.conv2_width, s.conv2_len(), a2);
            tanh_in_place(a2);
        });

    let mut dense1 = vec![T::zero(); batch * s.dense1];
    dense_forward(
        &conv2,
        batch,
        params.tensor(Tensor::Dense1Weight),
        params.tensor(Tensor::Dense1Bias),
        s.dense1_activation,
        &mut dense1,
    );
    let mut dense2 = vec![T::zero(); batch * s.dense2];
    dense_forward(
        &dense1,
        batch,
        params.tensor(Tensor::Dense2Weight),
        params.tensor(Tensor::Dense2Bias),
        s.dense2_activation,
        &mut dense2,
    );
    let mut raw = vec![T::zero(); batch * s.outputs];
    dense_forward(
        &dense2,
        batch,
        params.tensor(Tensor::Dense3Weight),
        params.tensor(Tensor::Dense3Bias),
        Activation::Identity,
        &mut raw,
    );
    let outputs = raw.iter().map(|v| v.abs()).collect();
    Ok(BatchForward { shape: s, batch, inputs, conv1, conv2, dense1, dense2, raw, outputs })
}

/// Gradient of `Σ_i upstream_i · output_i` with respect to the parameters.
///
/// `upstream` is `batch × outputs` row-major. The subgradient of `|·|` at 0
/// is taken as 0.
pub fn backward_batch<T: Real>(
    params: &NetParams<T>,
    fwd: &BatchForward<T>,
    upstream: &[T],
) -> Result<NetParams<T>> {
    let s = params.shape;
    if s != fwd.shape {
        return Err(Error::Shape("forward cache was built for a different architecture".into()));
    }
    let batch = fwd.batch;
    if upstream.len() != batch * s.outputs {
        return Err(Error::Shape(format!(
            "upstream gradient has {} values, expected {batch}x{}",
            upstream.len(),
            s.outputs
        )));
    }
    let mut grads = NetParams::zeros(s);

    let g3: Vec<T> = upstream
        .iter()
        .zip(&fwd.raw)
        .map(|(&g, &r)| if r > T::zero() { g } else if r < T::zero() { -g } else { T::zero() })
        .collect();
    let mut g2 = vec![T::zero(); batch * s.dense2];
    {
        let (dw, db) = split_pair(&mut grads, Tensor::Dense3Weight);
        dense_backward(&fwd.dense2, batch, params.tensor(Tensor::Dense3Weight), &g3, dw, db, Some(&mut g2));
    }
    through_activation(&mut g2, &fwd.dense2, s.dense2_activation);
    let mut g1 = vec![T::zero(); batch * s.dense1];
    {
        let (dw, db) = split_pair(&mut grads, Tensor::Dense2Weight);
        dense_backward(&fwd.dense1, batch, params.tensor(Tensor::Dense2Weight), &g2, dw, db, Some(&mut g1));
    }
    through_activation(&mut g1, &fwd.dense1, s.dense1_activation);
    let flat = s.flat_len();
    let mut g_flat = vec![T::zero(); batch * flat];
    {
        let (dw, db) = split_pair(&mut grads, Tensor::Dense1Weight);
        dense_backward(&fwd.conv2, batch, params.tensor(Tensor::Dense1Weight), &g1, dw, db, Some(&mut g_flat));
    }

    // Convolution tensors lead the layout, so their gradients are one prefix.
    let conv_len = s.offset(Tensor::Dense1Weight);
    let in_len = s.input_size();
    let c1_len = s.conv1_len() * s.conv1_filters;
    let w1 = params.tensor(Tensor::Conv1Weight);
    let w2 = params.tensor(Tensor::Conv2Weight);
    let chunk_sums: Vec<Vec<T>> = (0..batch.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = NetParams::<T>::zeros(s);
            let mut dz1 = vec![T::zero(); c1_len];
            let mut dz2 = vec![T::zero(); flat];
            let mut scratch = vec![T::zero(); s.conv2_len() * s.conv2_width * s.conv1_filters];
            for i in c * CHUNK..((c + 1) * CHUNK).min(batch) {
                let x = &fwd.inputs[i * in_len..(i + 1) * in_len];
                let a1 = &fwd.conv1[i * c1_len..(i + 1) * c1_len];
                let a2 = &fwd.conv2[i * flat..(i + 1) * flat];
                dz2.copy_from_slice(&g_flat[i * flat..(i + 1) * flat]);
                through_activation(&mut dz2, a2, Activation::Tanh);
                let (dw2, db2) = split_pair(&mut acc, Tensor::Conv2Weight);
                conv_backward(
                    a1,
                    s.conv1_filters,
                    w2,
                    s.conv2_width,
                    s.conv2_len(),
                    s.conv2_filters,
                    &dz2,
                    dw2,
                    db2,
                    Some((&mut dz1, &mut scratch)),
                );
                through_activation(&mut dz1, a1, Activation::Tanh);
                let (dw1, db1) = split_pair(&mut acc, Tensor::Conv1Weight);
                conv_backward(x, s.in_channels, w1, s.conv1_width, s.conv1_len(), s.conv1_filters, &dz1, dw1, db1, None);
            }
            acc.data.truncate(conv_len);
            acc.data
        })
        .collect();
    for part in chunk_sums {
        for (g, v) in grads.data[..conv_len].iter_mut().zip(part) {
            *g += v;
        }
    }
    Ok(grads)
}

/// Mutable weight and bias slices of one layer. `weight` must be the weight
/// tensor; its bias follows it directly in the layout.
fn split_pair<T: Real>(p: &mut NetParams<T>, weight: Tensor) -> (&mut [T], &mut [T]) {
    let s = p.shape;
    let off = s.offset(weight);
    let wl = s.tensor_len(weight);
    let bias = Tensor::ALL[Tensor::ALL.iter().position(|&t| t == weight).unwrap() + 1];
    let bl = s.tensor_len(bias);
    let (w, rest) = p.data[off..off + wl + bl].split_at_mut(wl);
    (w, rest)
}

/// Network output for one window.
pub fn forward<T: Real>(params: &NetParams<T>, window: &[T]) -> Result<Vec<T>> {
    Ok(forward_batch(params, &[window])?.outputs)
}

/// Outputs for many windows, `batch × outputs` row-major.
pub fn predict<T: Real>(params: &NetParams<T>, windows: &[&[T]]) -> Result<Vec<T>> {
    Ok(forward_batch(params, windows)?.outputs)
}

/// Gradient of `upstream · output` for a single window.
pub fn backward<T: Real>(params: &NetParams<T>, window: &[T], upstream: &[T]) -> Result<NetParams<T>> {
    let fwd = forward_batch(params, &[window])?;
    backward_batch(params, &fwd, upstream)
}

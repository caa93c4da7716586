//! Position-wise numeric kernels shared by the autodiff tape and the
//! inference-mode decoder.
//!
//! Keeping one code path per primitive means incremental decoding and the
//! teacher-forced tape produce bit-identical values: both sides sum taps and
//! channels in the same order.

use super::scalar::Scalar;

/// How a 1-D convolution pads its input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero-padding centered on the output position: tap offsets
    /// `d * (i - k/2)` for `i` in `0..k`. Output length equals input length.
    Centered,
    /// Left-only zero-padding: output position `t` reads `t, t-d, t-2d, ...`,
    /// never anything to its right.
    Causal,
}

/// Tap offset of kernel index `i` relative to the output position.
#[inline]
pub fn tap_offset(padding: Padding, k: usize, dilation: usize, i: usize) -> isize {
    let d = dilation as isize;
    match padding {
        Padding::Centered => d * (i as isize - (k / 2) as isize),
        Padding::Causal => -d * ((k - 1 - i) as isize),
    }
}

/// One output row of a dilated 1-D convolution.
///
/// `x` is `[n, d_in]` row-major, `w` is `[k, d_in, d_out]`, `b` is `[d_out]`;
/// writes row `s` of the `[n, d_out]` output. Out-of-range taps read zero.
pub fn conv1d_row<T: Scalar>(
    x: &[T],
    n: usize,
    d_in: usize,
    w: &[T],
    b: &[T],
    k: usize,
    dilation: usize,
    padding: Padding,
    s: usize,
    out_row: &mut [T],
) {
    let d_out = b.len();
    debug_assert_eq!(x.len(), n * d_in);
    debug_assert_eq!(w.len(), k * d_in * d_out);
    debug_assert_eq!(out_row.len(), d_out);
    out_row.copy_from_slice(b);
    for i in 0..k {
        let pos = s as isize + tap_offset(padding, k, dilation, i);
        if pos < 0 || pos >= n as isize {
            continue;
        }
        let x_row = &x[pos as usize * d_in..(pos as usize + 1) * d_in];
        let w_tap = &w[i * d_in * d_out..(i + 1) * d_in * d_out];
        for (c, &xc) in x_row.iter().enumerate() {
            let w_row = &w_tap[c * d_out..(c + 1) * d_out];
            for (o, acc) in out_row.iter_mut().enumerate() {
                *acc += w_row[o] * xc;
            }
        }
    }
}

/// Layer normalization of a single row: zero mean, unit variance over the
/// channels (population variance, `eps` added), then affine gain/bias.
pub fn layer_norm_row<T: Scalar>(row: &[T], gain: &[T], bias: &[T], eps: T, out: &mut [T]) {
    let d = row.len();
    debug_assert!(d >= 1);
    let n = T::from_f64(d as f64);
    let mut mean = T::zero();
    for &v in row {
        mean += v;
    }
    mean = mean / n;
    let mut var = T::zero();
    for &v in row {
        let c = v - mean;
        var += c * c;
    }
    var = var / n;
    let inv_std = (var + eps).sqrt().recip();
    for i in 0..d {
        out[i] = (row[i] - mean) * inv_std * gain[i] + bias[i];
    }
}

/// In-place numerically stable softmax. `-inf` entries act as mask sentinels
/// and come out as exact zeros.
///
/// Panics if every entry is masked.
pub fn softmax_in_place<T: Scalar>(xs: &mut [T]) {
    let max = xs
        .iter()
        .copied()
        .filter(|x| x.is_finite())
        .fold(None, |acc: Option<T>, x| Some(acc.map_or(x, |a| if x > a { x } else { a })));
    let max = max.expect("softmax: all positions masked");
    let mut sum = T::zero();
    for x in xs.iter_mut() {
        if x.is_finite() {
            *x = (*x - max).exp();
        } else {
            *x = T::zero();
        }
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x = *x / sum;
    }
}

/// `y = x · W + b` for a single row `x: [d_in]`, `W: [d_in, d_out]` row-major.
pub fn matvec_row<T: Scalar>(x: &[T], w: &[T], b: Option<&[T]>, out: &mut [T]) {
    let d_out = out.len();
    debug_assert_eq!(w.len(), x.len() * d_out);
    match b {
        Some(b) => out.copy_from_slice(b),
        None => out.iter_mut().for_each(|v| *v = T::zero()),
    }
    for (i, &xi) in x.iter().enumerate() {
        let w_row = &w[i * d_out..(i + 1) * d_out];
        for (o, acc) in out.iter_mut().enumerate() {
            *acc += w_row[o] * xi;
        }
    }
}

/// Materializes a weight-normalized parameter: `w = g * v / ‖v‖` per output
/// channel, where the output channel is the last axis of `v`.
pub fn weight_norm_filter<T: Scalar>(v: &[T], g: &[T], channels: usize) -> Vec<T> {
    debug_assert_eq!(g.len(), channels);
    debug_assert_eq!(v.len() % channels, 0);
    let rows = v.len() / channels;
    let mut norms = vec![T::zero(); channels];
    for r in 0..rows {
        for c in 0..channels {
            let x = v[r * channels + c];
            norms[c] += x * x;
        }
    }
    let mut out = vec![T::zero(); v.len()];
    for c in 0..channels {
        let n = norms[c].sqrt();
        assert!(n > T::zero(), "weight_norm: zero-norm channel {}", c);
        let scale = g[c] / n;
        for r in 0..rows {
            out[r * channels + c] = v[r * channels + c] * scale;
        }
    }
    out
}

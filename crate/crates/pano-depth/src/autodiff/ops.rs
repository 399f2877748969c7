//! Forward/backward kernel pairs.
//!
//! Convolution padding is always "same"-size: horizontal taps wrap modulo
//! the width, vertical taps outside the image contribute zero. The wrap is
//! implemented by splitting each row into two contiguous segments so the
//! inner loops stay vectorizable.

use rayon::prelude::*;

use super::{shape_error, AutodiffError, Tensor};

/// Convolution geometry: stride plus (horizontal, vertical) dilation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: usize,
    /// (dh, dv): dh spaces kernel columns, dv spaces kernel rows.
    pub dilation: (usize, usize),
}

impl ConvSpec {
    pub fn unit() -> ConvSpec {
        ConvSpec {
            stride: 1,
            dilation: (1, 1),
        }
    }

    pub fn dilated(dh: usize, dv: usize) -> ConvSpec {
        ConvSpec {
            stride: 1,
            dilation: (dh, dv),
        }
    }
}

/// out[0..] += w * inp[(i + shift) mod w_len] — the wrapped row AXPY at the
/// heart of circular convolution. Split into two contiguous segments.
#[inline]
fn axpy_wrap(out: &mut [f32], inp: &[f32], w: f32, shift: isize) {
    let len = out.len();
    debug_assert_eq!(inp.len(), len);
    let s = shift.rem_euclid(len as isize) as usize;
    let head = len - s;
    for (o, i) in out[..head].iter_mut().zip(&inp[s..]) {
        *o += w * *i;
    }
    for (o, i) in out[head..].iter_mut().zip(&inp[..s]) {
        *o += w * *i;
    }
}

/// Σ_j a[j] * b[(j + shift) mod len], fixed summation order.
#[inline]
fn dot_wrap(a: &[f32], b: &[f32], shift: isize) -> f32 {
    let len = a.len();
    let s = shift.rem_euclid(len as isize) as usize;
    let head = len - s;
    dot(&a[..head], &b[s..]) + dot(&a[head..], &b[..s])
}

/// Plain dot product with four fixed-order partial accumulators so the loop
/// vectorizes without changing results across runs.
#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = k * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0f32;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn check_conv_args(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    spec: ConvSpec,
) -> Result<(usize, usize, usize, usize, usize, usize, usize), AutodiffError> {
    let (n, ic, h, w) = input.dims4()?;
    let (oc, wic, kh, kw) = weight.dims4()?;
    if wic != ic {
        return Err(shape_error("conv2d input channels", &[oc, ic, kh, kw], weight.shape()));
    }
    if bias.shape() != [oc] {
        return Err(shape_error("conv2d bias", &[oc], bias.shape()));
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(AutodiffError::BadArgument(format!(
            "kernel must be odd-sized, got {kh}x{kw}"
        )));
    }
    if spec.dilation.0 < 1 || spec.dilation.1 < 1 {
        return Err(AutodiffError::BadArgument(format!(
            "dilation must be >= 1, got {:?}",
            spec.dilation
        )));
    }
    if spec.stride != 1 && spec.stride != 2 {
        return Err(AutodiffError::BadArgument(format!(
            "stride must be 1 or 2, got {}",
            spec.stride
        )));
    }
    if h % spec.stride != 0 || w % spec.stride != 0 {
        return Err(AutodiffError::BadArgument(format!(
            "stride {} does not divide {h}x{w}",
            spec.stride
        )));
    }
    Ok((n, ic, h, w, oc, kh, kw))
}

/// 2-D convolution, circular in x, zero-padded in y, "same"-size output
/// divided by the stride.
pub fn conv2d(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    spec: ConvSpec,
) -> Result<Tensor, AutodiffError> {
    let (n, ic, h, w, oc, kh, kw) = check_conv_args(input, weight, bias, spec)?;
    let (dh, dv) = spec.dilation;
    let (oh, ow) = (h / spec.stride, w / spec.stride);
    let pad_v = (dv * (kh - 1) / 2) as isize;
    let pad_h = (dh * (kw - 1) / 2) as isize;

    let mut out = Tensor::zeros(&[n, oc, oh, ow]);
    let in_data = input.data();
    let w_data = weight.data();
    let b_data = bias.data();

    out.data_mut()
        .par_chunks_mut(oh * ow)
        .enumerate()
        .for_each(|(plane, out_plane)| {
            let (ni, oci) = (plane / oc, plane % oc);
            out_plane.iter_mut().for_each(|v| *v = b_data[oci]);
            for ici in 0..ic {
                let in_plane = &in_data[(ni * ic + ici) * h * w..][..h * w];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = w_data[((oci * ic + ici) * kh + ky) * kw + kx];
                        let col_shift = (dh * kx) as isize - pad_h;
                        for oy in 0..oh {
                            let iy = (oy * spec.stride) as isize + (dv * ky) as isize - pad_v;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let in_row = &in_plane[iy as usize * w..][..w];
                            let out_row = &mut out_plane[oy * ow..][..ow];
                            if spec.stride == 1 {
                                axpy_wrap(out_row, in_row, wv, col_shift);
                            } else {
                                for ox in 0..ow {
                                    let ix = ((ox * spec.stride) as isize + col_shift)
                                        .rem_euclid(w as isize)
                                        as usize;
                                    out_row[ox] += wv * in_row[ix];
                                }
                            }
                        }
                    }
                }
            }
        });
    Ok(out)
}

/// Gradients of [`conv2d`] w.r.t. input, weight, and bias.
pub fn conv2d_backward(
    input: &Tensor,
    weight: &Tensor,
    spec: ConvSpec,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor), AutodiffError> {
    let placeholder_bias = Tensor::zeros(&[weight.dims4()?.0]);
    let (n, ic, h, w, oc, kh, kw) = check_conv_args(input, weight, &placeholder_bias, spec)?;
    if spec.stride != 1 {
        return Err(AutodiffError::BadArgument(
            "conv2d_backward supports stride 1 only".into(),
        ));
    }
    let (dh, dv) = spec.dilation;
    let (oh, ow) = (h, w);
    if grad_out.shape() != [n, oc, oh, ow] {
        return Err(shape_error("conv2d grad_out", &[n, oc, oh, ow], grad_out.shape()));
    }
    let pad_v = (dv * (kh - 1) / 2) as isize;
    let pad_h = (dh * (kw - 1) / 2) as isize;

    let in_data = input.data();
    let w_data = weight.data();
    let g_data = grad_out.data();

    // d/d input: scatter grad_out through the flipped kernel.
    let mut grad_in = Tensor::zeros(&[n, ic, h, w]);
    grad_in
        .data_mut()
        .par_chunks_mut(h * w)
        .enumerate()
        .for_each(|(plane, gi_plane)| {
            let (ni, ici) = (plane / ic, plane % ic);
            for oci in 0..oc {
                let g_plane = &g_data[(ni * oc + oci) * oh * ow..][..oh * ow];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = w_data[((oci * ic + ici) * kh + ky) * kw + kx];
                        let col_shift = (dh * kx) as isize - pad_h;
                        for oy in 0..oh {
                            let iy = oy as isize + (dv * ky) as isize - pad_v;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            // grad_in[iy][(ox + shift) mod w] += wv * g[oy][ox]
                            // == axpy with the negated shift on the read side.
                            let gi_row = &mut gi_plane[iy as usize * w..][..w];
                            let g_row = &g_plane[oy * ow..][..ow];
                            axpy_wrap(gi_row, g_row, wv, -col_shift);
                        }
                    }
                }
            }
        });

    // d/d weight: correlations of grad_out rows with input rows.
    let mut grad_w = Tensor::zeros(&[oc, ic, kh, kw]);
    grad_w
        .data_mut()
        .par_chunks_mut(ic * kh * kw)
        .enumerate()
        .for_each(|(oci, gw_plane)| {
            for ici in 0..ic {
                for ky in 0..kh {
                    for kx in 0..kw {
                        let col_shift = (dh * kx) as isize - pad_h;
                        let mut acc = 0.0f64;
                        for ni in 0..n {
                            let g_plane = &g_data[(ni * oc + oci) * oh * ow..][..oh * ow];
                            let in_plane = &in_data[(ni * ic + ici) * h * w..][..h * w];
                            for oy in 0..oh {
                                let iy = oy as isize + (dv * ky) as isize - pad_v;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                let g_row = &g_plane[oy * ow..][..ow];
                                let in_row = &in_plane[iy as usize * w..][..w];
                                acc += dot_wrap(g_row, in_row, col_shift) as f64;
                            }
                        }
                        gw_plane[(ici * kh + ky) * kw + kx] = acc as f32;
                    }
                }
            }
        });

    // d/d bias: plain sums over each output channel.
    let mut grad_b = Tensor::zeros(&[oc]);
    for oci in 0..oc {
        let mut acc = 0.0f64;
        for ni in 0..n {
            let g_plane = &g_data[(ni * oc + oci) * oh * ow..][..oh * ow];
            acc += g_plane.iter().map(|&v| v as f64).sum::<f64>();
        }
        grad_b.data_mut()[oci] = acc as f32;
    }

    Ok((grad_in, grad_w, grad_b))
}

/// 2×2 max pooling with stride 2. Returns the pooled tensor and the flat
/// input index of each window's argmax (first occurrence wins ties).
pub fn maxpool2(input: &Tensor) -> Result<(Tensor, Vec<u32>), AutodiffError> {
    let (n, c, h, w) = input.dims4()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(AutodiffError::BadArgument(format!(
            "maxpool2 needs even dimensions, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[n, c, oh, ow]);
    let mut argmax = vec![0u32; n * c * oh * ow];
    let in_data = input.data();
    for plane in 0..n * c {
        let in_plane = &in_data[plane * h * w..][..h * w];
        let out_plane = &mut out.data_mut()[plane * oh * ow..][..oh * ow];
        let arg_plane = &mut argmax[plane * oh * ow..][..oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let candidates = [
                    (2 * oy) * w + 2 * ox,
                    (2 * oy) * w + 2 * ox + 1,
                    (2 * oy + 1) * w + 2 * ox,
                    (2 * oy + 1) * w + 2 * ox + 1,
                ];
                let mut best = candidates[0];
                for &cand in &candidates[1..] {
                    if in_plane[cand] > in_plane[best] {
                        best = cand;
                    }
                }
                out_plane[oy * ow + ox] = in_plane[best];
                arg_plane[oy * ow + ox] = best as u32;
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool2_backward(
    input_shape: &[usize],
    argmax: &[u32],
    grad_out: &Tensor,
) -> Result<Tensor, AutodiffError> {
    let mut grad_in = Tensor::zeros(input_shape);
    let (n, c, h, w) = grad_in.dims4()?;
    let (oh, ow) = (h / 2, w / 2);
    if grad_out.shape() != [n, c, oh, ow] {
        return Err(shape_error("maxpool2 grad_out", &[n, c, oh, ow], grad_out.shape()));
    }
    let g = grad_out.data();
    for plane in 0..n * c {
        let gi_plane = &mut grad_in.data_mut()[plane * h * w..][..h * w];
        for i in 0..oh * ow {
            gi_plane[argmax[plane * oh * ow + i] as usize] += g[plane * oh * ow + i];
        }
    }
    Ok(grad_in)
}

/// Integer-factor bilinear upsampling, align-corners=false, wrapping in x
/// and clamping in y.
pub fn bilinear_upsample(input: &Tensor, factor: usize) -> Result<Tensor, AutodiffError> {
    let (n, c, h, w) = input.dims4()?;
    if factor < 2 {
        return Err(AutodiffError::BadArgument(format!(
            "upsample factor must be >= 2, got {factor}"
        )));
    }
    let (oh, ow) = (h * factor, w * factor);
    let taps = upsample_taps(h, w, factor);
    let mut out = Tensor::zeros(&[n, c, oh, ow]);
    let in_data = input.data();
    out.data_mut()
        .par_chunks_mut(oh * ow)
        .enumerate()
        .for_each(|(plane, out_plane)| {
            let in_plane = &in_data[plane * h * w..][..h * w];
            for oy in 0..oh {
                let (y0, y1, wy) = taps.rows[oy];
                let row0 = &in_plane[y0 * w..][..w];
                let row1 = &in_plane[y1 * w..][..w];
                let out_row = &mut out_plane[oy * ow..][..ow];
                for ox in 0..ow {
                    let (x0, x1, wx) = taps.cols[ox];
                    let top = row0[x0] + wx * (row0[x1] - row0[x0]);
                    let bottom = row1[x0] + wx * (row1[x1] - row1[x0]);
                    out_row[ox] = top + wy * (bottom - top);
                }
            }
        });
    Ok(out)
}

pub fn bilinear_upsample_backward(
    input_shape: &[usize],
    factor: usize,
    grad_out: &Tensor,
) -> Result<Tensor, AutodiffError> {
    let mut grad_in = Tensor::zeros(input_shape);
    let (n, c, h, w) = grad_in.dims4()?;
    let (oh, ow) = (h * factor, w * factor);
    if grad_out.shape() != [n, c, oh, ow] {
        return Err(shape_error("upsample grad_out", &[n, c, oh, ow], grad_out.shape()));
    }
    let taps = upsample_taps(h, w, factor);
    let g = grad_out.data();
    grad_in
        .data_mut()
        .par_chunks_mut(h * w)
        .enumerate()
        .for_each(|(plane, gi_plane)| {
            let g_plane = &g[plane * oh * ow..][..oh * ow];
            for oy in 0..oh {
                let (y0, y1, wy) = taps.rows[oy];
                for ox in 0..ow {
                    let (x0, x1, wx) = taps.cols[ox];
                    let gv = g_plane[oy * ow + ox];
                    gi_plane[y0 * w + x0] += gv * (1.0 - wy) * (1.0 - wx);
                    gi_plane[y0 * w + x1] += gv * (1.0 - wy) * wx;
                    gi_plane[y1 * w + x0] += gv * wy * (1.0 - wx);
                    gi_plane[y1 * w + x1] += gv * wy * wx;
                }
            }
        });
    Ok(grad_in)
}

struct UpsampleTaps {
    /// (y0, y1, weight of y1) per output row; rows clamp at the borders.
    rows: Vec<(usize, usize, f32)>,
    /// (x0, x1, weight of x1) per output column; columns wrap.
    cols: Vec<(usize, usize, f32)>,
}

fn upsample_taps(h: usize, w: usize, factor: usize) -> UpsampleTaps {
    let f = factor as f64;
    let rows = (0..h * factor)
        .map(|oy| {
            let src = (oy as f64 + 0.5) / f - 0.5;
            let clamped = src.clamp(0.0, (h - 1) as f64);
            let y0 = clamped.floor() as usize;
            let y1 = (y0 + 1).min(h - 1);
            (y0, y1, (clamped - y0 as f64) as f32)
        })
        .collect();
    let cols = (0..w * factor)
        .map(|ox| {
            let src = (ox as f64 + 0.5) / f - 0.5;
            let x0f = src.floor();
            let wx = (src - x0f) as f32;
            let x0 = (x0f as isize).rem_euclid(w as isize) as usize;
            let x1 = (x0 + 1) % w;
            (x0, x1, wx)
        })
        .collect();
    UpsampleTaps { rows, cols }
}

/// Spatial mean per (batch, channel): (N, C, H, W) → (N, C).
pub fn global_avg_pool(input: &Tensor) -> Result<Tensor, AutodiffError> {
    let (n, c, h, w) = input.dims4()?;
    let mut out = Tensor::zeros(&[n, c]);
    for plane in 0..n * c {
        let sum: f64 = input.data()[plane * h * w..][..h * w]
            .iter()
            .map(|&v| v as f64)
            .sum();
        out.data_mut()[plane] = (sum / (h * w) as f64) as f32;
    }
    Ok(out)
}

pub fn global_avg_pool_backward(
    input_shape: &[usize],
    grad_out: &Tensor,
) -> Result<Tensor, AutodiffError> {
    let mut grad_in = Tensor::zeros(input_shape);
    let (n, c, h, w) = grad_in.dims4()?;
    if grad_out.shape() != [n, c] {
        return Err(shape_error("global_avg_pool grad_out", &[n, c], grad_out.shape()));
    }
    let scale = 1.0 / (h * w) as f32;
    for plane in 0..n * c {
        let gv = grad_out.data()[plane] * scale;
        grad_in.data_mut()[plane * h * w..][..h * w]
            .iter_mut()
            .for_each(|v| *v = gv);
    }
    Ok(grad_in)
}

/// Affine map on feature vectors: (N, Cin) × (Cout, Cin) + (Cout,).
pub fn fully_connected(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
) -> Result<Tensor, AutodiffError> {
    let (n, cin) = input.dims2()?;
    let (cout, wcin) = weight.dims2()?;
    if wcin != cin || bias.shape() != [cout] {
        return Err(shape_error("fully_connected", &[cout, cin], weight.shape()));
    }
    let mut out = Tensor::zeros(&[n, cout]);
    for ni in 0..n {
        let x = &input.data()[ni * cin..][..cin];
        for o in 0..cout {
            let wrow = &weight.data()[o * cin..][..cin];
            out.data_mut()[ni * cout + o] = bias.data()[o] + dot(wrow, x);
        }
    }
    Ok(out)
}

pub fn fully_connected_backward(
    input: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor), AutodiffError> {
    let (n, cin) = input.dims2()?;
    let (cout, _) = weight.dims2()?;
    if grad_out.shape() != [n, cout] {
        return Err(shape_error("fully_connected grad_out", &[n, cout], grad_out.shape()));
    }
    let mut grad_in = Tensor::zeros(&[n, cin]);
    let mut grad_w = Tensor::zeros(&[cout, cin]);
    let mut grad_b = Tensor::zeros(&[cout]);
    for ni in 0..n {
        let g = &grad_out.data()[ni * cout..][..cout];
        let x: Vec<f32> = input.data()[ni * cin..][..cin].to_vec();
        for o in 0..cout {
            let gv = g[o];
            grad_b.data_mut()[o] += gv;
            let wrow = &weight.data()[o * cin..][..cin];
            let gi = &mut grad_in.data_mut()[ni * cin..][..cin];
            for i in 0..cin {
                gi[i] += gv * wrow[i];
            }
            let gw = &mut grad_w.data_mut()[o * cin..][..cin];
            for i in 0..cin {
                gw[i] += gv * x[i];
            }
        }
    }
    Ok((grad_in, grad_w, grad_b))
}

/// Broadcast per-channel vectors over a spatial grid: (N, C) → (N, C, H, W).
pub fn tile_spatial(input: &Tensor, h: usize, w: usize) -> Result<Tensor, AutodiffError> {
    let (n, c) = input.dims2()?;
    let mut out = Tensor::zeros(&[n, c, h, w]);
    for plane in 0..n * c {
        let v = input.data()[plane];
        out.data_mut()[plane * h * w..][..h * w]
            .iter_mut()
            .for_each(|o| *o = v);
    }
    Ok(out)
}

pub fn tile_spatial_backward(grad_out: &Tensor) -> Result<Tensor, AutodiffError> {
    let (n, c, h, w) = grad_out.dims4()?;
    let mut grad_in = Tensor::zeros(&[n, c]);
    for plane in 0..n * c {
        let sum: f64 = grad_out.data()[plane * h * w..][..h * w]
            .iter()
            .map(|&v| v as f64)
            .sum();
        grad_in.data_mut()[plane] = sum as f32;
    }
    Ok(grad_in)
}

pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

/// Backward through relu given the forward *output* (subgradient 0 at 0).
pub fn relu_backward(output: &Tensor, grad_out: &Tensor) -> Result<Tensor, AutodiffError> {
    if output.shape() != grad_out.shape() {
        return Err(shape_error("relu grad", output.shape(), grad_out.shape()));
    }
    let mut grad_in = grad_out.clone();
    for (g, &y) in grad_in.data_mut().iter_mut().zip(output.data()) {
        if y <= 0.0 {
            *g = 0.0;
        }
    }
    Ok(grad_in)
}

pub fn sigmoid(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    out.data_mut()
        .iter_mut()
        .for_each(|v| *v = 1.0 / (1.0 + (-*v).exp()));
    out
}

/// Backward through sigmoid given the forward output y: g·y·(1−y).
pub fn sigmoid_backward(output: &Tensor, grad_out: &Tensor) -> Result<Tensor, AutodiffError> {
    if output.shape() != grad_out.shape() {
        return Err(shape_error("sigmoid grad", output.shape(), grad_out.shape()));
    }
    let mut grad_in = grad_out.clone();
    for (g, &y) in grad_in.data_mut().iter_mut().zip(output.data()) {
        *g *= y * (1.0 - y);
    }
    Ok(grad_in)
}

/// Concatenate rank-4 tensors along the channel axis.
pub fn concat_channels(inputs: &[&Tensor]) -> Result<Tensor, AutodiffError> {
    if inputs.is_empty() {
        return Err(AutodiffError::BadArgument("concat of zero tensors".into()));
    }
    let (n, _, h, w) = inputs[0].dims4()?;
    let mut c_total = 0;
    for t in inputs {
        let (tn, tc, th, tw) = t.dims4()?;
        if (tn, th, tw) != (n, h, w) {
            return Err(shape_error("concat_channels", inputs[0].shape(), t.shape()));
        }
        c_total += tc;
    }
    let mut out = Tensor::zeros(&[n, c_total, h, w]);
    for ni in 0..n {
        let mut c_off = 0;
        for t in inputs {
            let tc = t.shape()[1];
            let src = &t.data()[ni * tc * h * w..][..tc * h * w];
            out.data_mut()[(ni * c_total + c_off) * h * w..][..tc * h * w].copy_from_slice(src);
            c_off += tc;
        }
    }
    Ok(out)
}

/// Split a concatenated gradient back into per-input channel blocks.
pub fn concat_channels_backward(
    channel_counts: &[usize],
    grad_out: &Tensor,
) -> Result<Vec<Tensor>, AutodiffError> {
    let (n, c_total, h, w) = grad_out.dims4()?;
    if channel_counts.iter().sum::<usize>() != c_total {
        return Err(AutodiffError::BadArgument(format!(
            "concat backward: channel counts {channel_counts:?} do not sum to {c_total}"
        )));
    }
    let mut outs: Vec<Tensor> = channel_counts
        .iter()
        .map(|&c| Tensor::zeros(&[n, c, h, w]))
        .collect();
    for ni in 0..n {
        let mut c_off = 0;
        for (t, &tc) in outs.iter_mut().zip(channel_counts) {
            let dst = &mut t.data_mut()[ni * tc * h * w..][..tc * h * w];
            dst.copy_from_slice(&grad_out.data()[(ni * c_total + c_off) * h * w..][..tc * h * w]);
            c_off += tc;
        }
    }
    Ok(outs)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor, AutodiffError> {
    if a.shape() != b.shape() {
        return Err(shape_error("add", a.shape(), b.shape()));
    }
    let mut out = a.clone();
    for (o, &bv) in out.data_mut().iter_mut().zip(b.data()) {
        *o += bv;
    }
    Ok(out)
}

pub fn scale(input: &Tensor, s: f32) -> Tensor {
    let mut out = input.clone();
    out.data_mut().iter_mut().for_each(|v| *v *= s);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use approx::assert_relative_eq;

    fn random_tensor(shape: &[usize], rng: &mut SplitMix64) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.next_f32() - 0.5).collect()).unwrap()
    }

    #[test]
    fn conv_1x1_doubling_kernel() {
        let mut rng = SplitMix64::new(1);
        let x = random_tensor(&[1, 1, 3, 4], &mut rng);
        let w = Tensor::from_vec(&[1, 1, 1, 1], vec![2.0]).unwrap();
        let b = Tensor::zeros(&[1]);
        let y = conv2d(&x, &w, &b, ConvSpec::unit()).unwrap();
        for (yi, xi) in y.data().iter().zip(x.data()) {
            assert_eq!(*yi, 2.0 * xi);
        }
    }

    #[test]
    fn conv_averaging_kernel_on_constant_image() {
        // 3x3 averaging kernel, constant input: interior and horizontal
        // edges stay constant (wrap), top/bottom rows attenuate (zero pad).
        let x = Tensor::full(&[1, 1, 4, 6], 3.0);
        let w = Tensor::full(&[1, 1, 3, 3], 1.0 / 9.0);
        let b = Tensor::zeros(&[1]);
        let y = conv2d(&x, &w, &b, ConvSpec::unit()).unwrap();
        for row in 1..3 {
            for col in 0..6 {
                assert_relative_eq!(y.data()[row * 6 + col], 3.0, max_relative = 1e-6);
            }
        }
        for col in 0..6 {
            assert_relative_eq!(y.data()[col], 2.0, max_relative = 1e-6);
            assert_relative_eq!(y.data()[3 * 6 + col], 2.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn conv_rejects_bad_shapes() {
        let x = Tensor::zeros(&[1, 2, 4, 4]);
        let w = Tensor::zeros(&[1, 3, 3, 3]);
        let b = Tensor::zeros(&[1]);
        assert!(conv2d(&x, &w, &b, ConvSpec::unit()).is_err());
        let w = Tensor::zeros(&[1, 2, 2, 2]);
        assert!(conv2d(&x, &w, &b, ConvSpec::unit()).is_err());
        let w = Tensor::zeros(&[1, 2, 3, 3]);
        assert!(conv2d(&x, &w, &b, ConvSpec { stride: 1, dilation: (0, 1) }).is_err());
    }

    #[test]
    fn conv_wrap_equivariance_exact() {
        let mut rng = SplitMix64::new(2);
        let x = random_tensor(&[1, 2, 4, 8], &mut rng);
        let w = random_tensor(&[3, 2, 3, 3], &mut rng);
        let b = random_tensor(&[3], &mut rng);
        let spec = ConvSpec::dilated(2, 1);
        let y = conv2d(&x, &w, &b, spec).unwrap();
        let k = 3;
        let xr = rotate_cols(&x, k);
        let yr = conv2d(&xr, &w, &b, spec).unwrap();
        let y_expected = rotate_cols(&y, k);
        for (a, e) in yr.data().iter().zip(y_expected.data()) {
            assert_eq!(a, e, "circular conv must commute with rotation exactly");
        }
    }

    fn rotate_cols(t: &Tensor, k: usize) -> Tensor {
        let (n, c, h, w) = t.dims4().unwrap();
        let mut out = t.clone();
        for plane in 0..n * c {
            for y in 0..h {
                for x in 0..w {
                    let src = t.data()[(plane * h + y) * w + x];
                    out.data_mut()[(plane * h + y) * w + (x + k) % w] = src;
                }
            }
        }
        out
    }

    #[test]
    fn maxpool_values_and_tie_rule() {
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, arg) = maxpool2(&x).unwrap();
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(arg, vec![3]);

        let x = Tensor::full(&[1, 1, 2, 2], 5.0);
        let (y, arg) = maxpool2(&x).unwrap();
        assert_eq!(y.data(), &[5.0]);
        assert_eq!(arg, vec![0], "ties go to the first element");

        let g = Tensor::from_vec(&[1, 1, 1, 1], vec![2.5]).unwrap();
        let gx = maxpool2_backward(&[1, 1, 2, 2], &arg, &g).unwrap();
        assert_eq!(gx.data(), &[2.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn maxpool_rejects_odd_dims() {
        assert!(maxpool2(&Tensor::zeros(&[1, 1, 3, 4])).is_err());
    }

    #[test]
    fn upsample_constant_stays_constant() {
        let x = Tensor::full(&[1, 1, 2, 3], 7.0);
        let y = bilinear_upsample(&x, 2).unwrap();
        assert_eq!(y.shape(), &[1, 1, 4, 6]);
        for &v in y.data() {
            assert_relative_eq!(v, 7.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn upsample_wraps_horizontally() {
        // 1x2 row [a, b]: the output sample between the last and first
        // column must blend both, not clamp to b.
        let x = Tensor::from_vec(&[1, 1, 1, 2], vec![0.0, 1.0]).unwrap();
        let y = bilinear_upsample(&x, 2).unwrap();
        // Output columns sample src_x = -0.25, 0.25, 0.75, 1.25.
        // src_x = -0.25 wraps: x0 = 1 (value 1), x1 = 0 (value 0), wx = 0.75.
        assert_relative_eq!(y.data()[0], 1.0 * 0.25 + 0.0 * 0.75, max_relative = 1e-6);
        assert_relative_eq!(y.data()[3], 0.25 + 0.5 * (1.0 - 0.0), max_relative = 1e-3);
    }

    #[test]
    fn gap_and_tile_are_inverse_on_vectors() {
        let mut rng = SplitMix64::new(3);
        let v = random_tensor(&[2, 3], &mut rng);
        let tiled = tile_spatial(&v, 4, 5).unwrap();
        let back = global_avg_pool(&tiled).unwrap();
        for (a, b) in back.data().iter().zip(v.data()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-6);
        }
        let c = Tensor::full(&[1, 2, 3, 3], 0.4);
        assert_relative_eq!(global_avg_pool(&c).unwrap().data()[0], 0.4, max_relative = 1e-6);
    }

    #[test]
    fn elementwise_ops() {
        let x = Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let s = sigmoid(&Tensor::zeros(&[1]));
        assert_relative_eq!(s.data()[0], 0.5);
        let y = add(&x, &x).unwrap();
        assert_eq!(y.data(), &[-2.0, 0.0, 4.0]);
        assert!(add(&x, &Tensor::zeros(&[4])).is_err());
        assert_eq!(scale(&x, -2.0).data(), &[2.0, 0.0, -4.0]);
    }

    #[test]
    fn concat_and_split_round_trip() {
        let mut rng = SplitMix64::new(4);
        let a = random_tensor(&[2, 1, 2, 2], &mut rng);
        let b = random_tensor(&[2, 3, 2, 2], &mut rng);
        let cat = concat_channels(&[&a, &b]).unwrap();
        assert_eq!(cat.shape(), &[2, 4, 2, 2]);
        let parts = concat_channels_backward(&[1, 3], &cat).unwrap();
        assert_eq!(parts[0].data(), a.data());
        assert_eq!(parts[1].data(), b.data());
    }

    #[test]
    fn fully_connected_matches_manual() {
        let x = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap();
        let w = Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.5, -1.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![0.1, 0.2]).unwrap();
        let y = fully_connected(&x, &w, &b).unwrap();
        assert_relative_eq!(y.data()[0], 1.1, max_relative = 1e-6);
        assert_relative_eq!(y.data()[1], 0.5 - 2.0 + 0.2, max_relative = 1e-5);
    }
}

//! Training objectives: supervised multi-scale smooth-L1 and the
//! unsupervised photometric + edge-aware smoothness pair, built on a
//! differentiable vertical warp.
//!
//! Scale weighting follows `Σ_{i=1..4} 4^{i-4} · L_i` — the coarsest scale
//! contributes 1/64, the full-resolution scale 1. Per-scale references
//! (ground-truth disparity, the two views) come from area downsampling.
//!
//! Warp sign convention: the rig's lower camera sees every scene point at a
//! smaller latitude, so content sits *higher* (smaller y) in the bottom
//! view than in the top view. Reconstructing the top view therefore samples
//! the bottom view at `y − d·h/fov_h`. Gradients flow to both the sampled
//! image and the disparity; vertical out-of-range samples clamp to the edge
//! rows and contribute zero disparity gradient there.
//!
//! Supervised losses treat `gt ≤ 0` as invalid and exclude those pixels
//! from every mean.

use thiserror::Error;

use crate::autodiff::{AutodiffError, Tensor};
use crate::geometry::RigConfig;

#[derive(Debug, Error)]
pub enum LossError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("no valid pixels in ground truth")]
    EmptyValidSet,
    #[error("negative disparity {0} passed to warp")]
    NegativeDisparity(f32),
    #[error("expected {expected} per-scale predictions, got {got}")]
    ScaleCount { expected: usize, got: usize },
}

/// Scale weight `4^{i-3}` for 0-based scale index i (i = 3 is full
/// resolution with weight 1).
pub fn scale_weight(i: usize) -> f64 {
    0.25f64.powi(3 - i as i32)
}

/// Subgradient-friendly sign: 0 at 0 (unlike `f64::signum`).
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Itemized loss values. `total` always equals the weighted recombination
/// of the components.
#[derive(Clone, Debug)]
pub struct LossBreakdown {
    pub total: f64,
    /// Weighted per-scale contributions (sum equals `total`).
    pub per_scale: Vec<f64>,
    /// Unweighted data terms per scale: smooth-L1 (supervised) or
    /// photometric reconstruction (unsupervised).
    pub data_term: Vec<f64>,
    /// Unweighted smoothness terms per scale (zero for supervised).
    pub smooth_term: Vec<f64>,
    pub lambda_smooth: f64,
}

impl LossBreakdown {
    /// Recombine components and compare against `total`.
    pub fn recombination_error(&self) -> f64 {
        let recombined: f64 = (0..self.per_scale.len())
            .map(|i| scale_weight(i) * (self.data_term[i] + self.lambda_smooth * self.smooth_term[i]))
            .sum();
        (recombined - self.total).abs()
    }
}

/// Piecewise smooth-L1 against ground truth with invalid-pixel masking:
/// per valid pixel, δ = |pred − gt|, loss = δ² if δ ≤ 1 else δ, averaged.
/// Returns the loss and its gradient w.r.t. `pred`.
pub fn smooth_l1(pred: &Tensor, gt: &Tensor) -> Result<(f64, Tensor), LossError> {
    if pred.shape() != gt.shape() {
        return Err(AutodiffError::ShapeMismatch {
            what: "smooth_l1".into(),
            expected: gt.shape().to_vec(),
            got: pred.shape().to_vec(),
        }
        .into());
    }
    let valid = gt.data().iter().filter(|&&g| g > 0.0).count();
    if valid == 0 {
        return Err(LossError::EmptyValidSet);
    }
    let inv = 1.0 / valid as f64;
    let mut grad = Tensor::zeros(pred.shape());
    let mut total = 0.0f64;
    for (i, (&p, &g)) in pred.data().iter().zip(gt.data()).enumerate() {
        if g <= 0.0 {
            continue;
        }
        let delta = (p - g) as f64;
        let a = delta.abs();
        if a <= 1.0 {
            total += a * a;
            grad.data_mut()[i] = (2.0 * delta * inv) as f32;
        } else {
            total += a;
            grad.data_mut()[i] = (sign(delta) * inv) as f32;
        }
    }
    Ok((total * inv, grad))
}

/// Box-average downsampling by an integer factor (all pixels weighted).
pub fn downsample_area(t: &Tensor, factor: usize) -> Result<Tensor, LossError> {
    let (n, c, h, w) = t.dims4()?;
    if factor == 1 {
        return Ok(t.clone());
    }
    if h % factor != 0 || w % factor != 0 {
        return Err(AutodiffError::BadArgument(format!(
            "downsample factor {factor} does not divide {h}x{w}"
        ))
        .into());
    }
    let (oh, ow) = (h / factor, w / factor);
    let mut out = Tensor::zeros(&[n, c, oh, ow]);
    let inv = 1.0 / (factor * factor) as f64;
    for plane in 0..n * c {
        let src = &t.data()[plane * h * w..][..h * w];
        let dst = &mut out.data_mut()[plane * oh * ow..][..oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0f64;
                for dy in 0..factor {
                    for dx in 0..factor {
                        acc += src[(oy * factor + dy) * w + ox * factor + dx] as f64;
                    }
                }
                dst[oy * ow + ox] = (acc * inv) as f32;
            }
        }
    }
    Ok(out)
}

/// Area downsampling that averages only valid (> 0) pixels; cells with no
/// valid source pixel stay invalid (0).
pub fn downsample_valid(t: &Tensor, factor: usize) -> Result<Tensor, LossError> {
    let (n, c, h, w) = t.dims4()?;
    if factor == 1 {
        return Ok(t.clone());
    }
    if h % factor != 0 || w % factor != 0 {
        return Err(AutodiffError::BadArgument(format!(
            "downsample factor {factor} does not divide {h}x{w}"
        ))
        .into());
    }
    let (oh, ow) = (h / factor, w / factor);
    let mut out = Tensor::zeros(&[n, c, oh, ow]);
    for plane in 0..n * c {
        let src = &t.data()[plane * h * w..][..h * w];
        let dst = &mut out.data_mut()[plane * oh * ow..][..oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0f64;
                let mut count = 0usize;
                for dy in 0..factor {
                    for dx in 0..factor {
                        let v = src[(oy * factor + dy) * w + ox * factor + dx];
                        if v > 0.0 {
                            acc += v as f64;
                            count += 1;
                        }
                    }
                }
                if count > 0 {
                    dst[oy * ow + ox] = (acc / count as f64) as f32;
                }
            }
        }
    }
    Ok(out)
}

/// Supervised objective: smooth-L1 at the four scales against area-averaged
/// ground truth, weighted 1/64, 1/16, 1/4, 1. Returns the breakdown and the
/// gradient w.r.t. each prediction.
pub fn multiscale_supervised(
    preds: &[Tensor],
    gt_full: &Tensor,
) -> Result<(LossBreakdown, Vec<Tensor>), LossError> {
    if preds.len() != 4 {
        return Err(LossError::ScaleCount {
            expected: 4,
            got: preds.len(),
        });
    }
    let (_, _, full_h, _) = gt_full.dims4()?;
    let mut total = 0.0f64;
    let mut per_scale = Vec::with_capacity(4);
    let mut data_term = Vec::with_capacity(4);
    let mut grads = Vec::with_capacity(4);
    for (i, pred) in preds.iter().enumerate() {
        let (_, _, h, _) = pred.dims4()?;
        let factor = full_h / h;
        let gt_i = downsample_valid(gt_full, factor)?;
        let (value, mut grad) = smooth_l1(pred, &gt_i)?;
        let w = scale_weight(i);
        total += w * value;
        per_scale.push(w * value);
        data_term.push(value);
        grad.data_mut().iter_mut().for_each(|g| *g *= w as f32);
        grads.push(grad);
    }
    Ok((
        LossBreakdown {
            total,
            per_scale,
            data_term,
            smooth_term: vec![0.0; 4],
            lambda_smooth: 0.0,
        },
        grads,
    ))
}

/// Differentiable vertical warp: `out(y, x) = source(y − d(y,x)·h/fov_h, x)`
/// with bilinear weights in y (edge rows clamp). The pixels-per-radian
/// scale comes from the source raster height and the rig's vertical field
/// of view, so the same rig serves every pyramid scale.
pub fn warp_vertical(
    source: &Tensor,
    disparity: &Tensor,
    rig: &RigConfig,
) -> Result<Tensor, LossError> {
    let (out, _) = warp_vertical_taps(source, disparity, rig)?;
    Ok(out)
}

/// Backward of [`warp_vertical`]: gradients w.r.t. source and disparity.
pub fn warp_vertical_backward(
    source: &Tensor,
    disparity: &Tensor,
    rig: &RigConfig,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor), LossError> {
    let (n, c, h, w) = source.dims4()?;
    if grad_out.shape() != source.shape() {
        return Err(AutodiffError::ShapeMismatch {
            what: "warp grad_out".into(),
            expected: source.shape().to_vec(),
            got: grad_out.shape().to_vec(),
        }
        .into());
    }
    let (_, taps) = warp_vertical_taps(source, disparity, rig)?;
    let mut grad_src = Tensor::zeros(source.shape());
    let mut grad_disp = Tensor::zeros(disparity.shape());
    let rpr = h as f64 / rig.fov_h;
    for ni in 0..n {
        for y in 0..h {
            for x in 0..w {
                let tap = &taps[(ni * h + y) * w + x];
                let mut d_acc = 0.0f64;
                for ch in 0..c {
                    let g = grad_out.data()[((ni * c + ch) * h + y) * w + x];
                    let plane = (ni * c + ch) * h;
                    let s0 = source.data()[(plane + tap.y0) * w + x];
                    let s1 = source.data()[(plane + tap.y1) * w + x];
                    grad_src.data_mut()[(plane + tap.y0) * w + x] += g * (1.0 - tap.frac);
                    grad_src.data_mut()[(plane + tap.y1) * w + x] += g * tap.frac;
                    if !tap.clamped {
                        d_acc += g as f64 * (s1 - s0) as f64;
                    }
                }
                // ds/dd = −rows_per_radian.
                grad_disp.data_mut()[(ni * h + y) * w + x] = (-rpr * d_acc) as f32;
            }
        }
    }
    Ok((grad_src, grad_disp))
}

struct WarpTap {
    y0: usize,
    y1: usize,
    frac: f32,
    /// True when the sample clamped at an edge (no disparity gradient).
    clamped: bool,
}

fn warp_vertical_taps(
    source: &Tensor,
    disparity: &Tensor,
    rig: &RigConfig,
) -> Result<(Tensor, Vec<WarpTap>), LossError> {
    let (n, c, h, w) = source.dims4()?;
    if disparity.shape() != [n, 1, h, w] {
        return Err(AutodiffError::ShapeMismatch {
            what: "warp disparity".into(),
            expected: vec![n, 1, h, w],
            got: disparity.shape().to_vec(),
        }
        .into());
    }
    if let Some(&bad) = disparity.data().iter().find(|&&d| d < 0.0) {
        return Err(LossError::NegativeDisparity(bad));
    }
    let rpr = h as f64 / rig.fov_h;
    let mut taps = Vec::with_capacity(n * h * w);
    for ni in 0..n {
        for y in 0..h {
            for x in 0..w {
                let d = disparity.data()[(ni * h + y) * w + x] as f64;
                let s = y as f64 - d * rpr;
                let clamped = s <= 0.0 || s >= (h - 1) as f64;
                let s_c = s.clamp(0.0, (h - 1) as f64);
                let y0 = s_c.floor() as usize;
                let y1 = (y0 + 1).min(h - 1);
                taps.push(WarpTap {
                    y0,
                    y1,
                    frac: (s_c - y0 as f64) as f32,
                    clamped,
                });
            }
        }
    }
    let mut out = Tensor::zeros(source.shape());
    for ni in 0..n {
        for ch in 0..c {
            let plane = (ni * c + ch) * h;
            for y in 0..h {
                for x in 0..w {
                    let tap = &taps[(ni * h + y) * w + x];
                    let s0 = source.data()[(plane + tap.y0) * w + x];
                    let s1 = source.data()[(plane + tap.y1) * w + x];
                    out.data_mut()[(plane + y) * w + x] = s0 + tap.frac * (s1 - s0);
                }
            }
        }
    }
    Ok((out, taps))
}

/// Photometric reconstruction: mean absolute error between `target` and the
/// warped `source`. Returns the loss and its gradient w.r.t. disparity.
pub fn reconstruction_loss(
    target: &Tensor,
    source: &Tensor,
    disparity: &Tensor,
    rig: &RigConfig,
) -> Result<(f64, Tensor), LossError> {
    if target.shape() != source.shape() {
        return Err(AutodiffError::ShapeMismatch {
            what: "reconstruction views".into(),
            expected: target.shape().to_vec(),
            got: source.shape().to_vec(),
        }
        .into());
    }
    let recon = warp_vertical(source, disparity, rig)?;
    let count = target.numel() as f64;
    let mut value = 0.0f64;
    let mut g_recon = Tensor::zeros(target.shape());
    for (i, (&t, &r)) in target.data().iter().zip(recon.data()).enumerate() {
        let diff = (r - t) as f64;
        value += diff.abs();
        g_recon.data_mut()[i] = (sign(diff) / count) as f32;
    }
    let (_, grad_disp) = warp_vertical_backward(source, disparity, rig, &g_recon)?;
    Ok((value / count, grad_disp))
}

/// Edge-aware smoothness: mean of `|∂x d|·e^{−‖∂x I‖} + |∂y d|·e^{−‖∂y I‖}`
/// with forward differences, horizontal wrap, and the last row dropped from
/// the vertical term. ‖·‖ is the mean absolute difference over channels.
/// Returns the loss and its gradient w.r.t. disparity.
pub fn smoothness_loss(disparity: &Tensor, rgb: &Tensor) -> Result<(f64, Tensor), LossError> {
    let (n, c, h, w) = rgb.dims4()?;
    if disparity.shape() != [n, 1, h, w] {
        return Err(AutodiffError::ShapeMismatch {
            what: "smoothness disparity".into(),
            expected: vec![n, 1, h, w],
            got: disparity.shape().to_vec(),
        }
        .into());
    }
    let count = (n * h * w) as f64;
    let inv = 1.0 / count;
    let mut value = 0.0f64;
    let mut grad = Tensor::zeros(disparity.shape());
    let image_weight = |ni: usize, y0: usize, x0: usize, y1: usize, x1: usize| -> f64 {
        let mut acc = 0.0f64;
        for ch in 0..c {
            let plane = (ni * c + ch) * h;
            let a = rgb.data()[(plane + y0) * w + x0] as f64;
            let b = rgb.data()[(plane + y1) * w + x1] as f64;
            acc += (a - b).abs();
        }
        (-(acc / c as f64)).exp()
    };
    for ni in 0..n {
        let plane = ni * h;
        for y in 0..h {
            for x in 0..w {
                let here = disparity.data()[(plane + y) * w + x] as f64;
                // Horizontal, wrapping.
                let xn = (x + 1) % w;
                let right = disparity.data()[(plane + y) * w + xn] as f64;
                let wx = image_weight(ni, y, x, y, xn);
                value += (right - here).abs() * wx;
                let sx = (sign(right - here) * wx * inv) as f32;
                grad.data_mut()[(plane + y) * w + xn] += sx;
                grad.data_mut()[(plane + y) * w + x] -= sx;
                // Vertical, last row dropped.
                if y + 1 < h {
                    let down = disparity.data()[(plane + y + 1) * w + x] as f64;
                    let wy = image_weight(ni, y, x, y + 1, x);
                    value += (down - here).abs() * wy;
                    let sy = (sign(down - here) * wy * inv) as f32;
                    grad.data_mut()[(plane + y + 1) * w + x] += sy;
                    grad.data_mut()[(plane + y) * w + x] -= sy;
                }
            }
        }
    }
    Ok((value * inv, grad))
}

/// Unsupervised objective: per scale, warp the (area-downsampled) bottom
/// view toward the top view with the predicted disparity and add
/// `λ_smooth` × edge-aware smoothness, weighted as in the supervised loss.
pub fn unsupervised_loss(
    preds: &[Tensor],
    top: &Tensor,
    bottom: &Tensor,
    rig: &RigConfig,
    lambda_smooth: f64,
) -> Result<(LossBreakdown, Vec<Tensor>), LossError> {
    if preds.len() != 4 {
        return Err(LossError::ScaleCount {
            expected: 4,
            got: preds.len(),
        });
    }
    if top.shape() != bottom.shape() {
        return Err(AutodiffError::ShapeMismatch {
            what: "stereo views".into(),
            expected: top.shape().to_vec(),
            got: bottom.shape().to_vec(),
        }
        .into());
    }
    let (_, _, full_h, _) = top.dims4()?;
    let mut total = 0.0f64;
    let mut per_scale = Vec::with_capacity(4);
    let mut data_term = Vec::with_capacity(4);
    let mut smooth_term = Vec::with_capacity(4);
    let mut grads = Vec::with_capacity(4);
    for (i, pred) in preds.iter().enumerate() {
        let (_, _, h, _) = pred.dims4()?;
        let factor = full_h / h;
        let top_i = downsample_area(top, factor)?;
        let bottom_i = downsample_area(bottom, factor)?;
        let (rect, g_rect) = reconstruction_loss(&top_i, &bottom_i, pred, rig)?;
        let (smooth, g_smooth) = smoothness_loss(pred, &top_i)?;
        let w = scale_weight(i);
        total += w * (rect + lambda_smooth * smooth);
        per_scale.push(w * (rect + lambda_smooth * smooth));
        data_term.push(rect);
        smooth_term.push(smooth);
        let mut grad = g_rect;
        for (g, &gs) in grad.data_mut().iter_mut().zip(g_smooth.data()) {
            *g = (*g as f64 * w + gs as f64 * w * lambda_smooth) as f32;
        }
        grads.push(grad);
    }
    Ok((
        LossBreakdown {
            total,
            per_scale,
            data_term,
            smooth_term,
            lambda_smooth,
        },
        grads,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, ScalarFn};
    use crate::rng::SplitMix64;
    use approx::assert_relative_eq;

    fn rig(h: usize, w: usize) -> RigConfig {
        RigConfig::new(0.26, w, h).unwrap()
    }

    fn random_tensor(shape: &[usize], lo: f32, hi: f32, rng: &mut SplitMix64) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| lo + (hi - lo) * rng.next_f32()).collect()).unwrap()
    }

    #[test]
    fn smooth_l1_branch_values() {
        let gt = Tensor::full(&[1, 1, 1, 1], 1.0);
        let check = |pred_value: f32, expected: f64| {
            let pred = Tensor::full(&[1, 1, 1, 1], pred_value);
            let (v, _) = smooth_l1(&pred, &gt).unwrap();
            assert_relative_eq!(v, expected, max_relative = 1e-6);
        };
        check(1.5, 0.25); // δ=0.5, quadratic branch
        check(3.0, 2.0); // δ=2, linear branch
        check(2.0, 1.0); // δ=1, branches agree
    }

    #[test]
    fn smooth_l1_masks_invalid_and_errors_when_empty() {
        let gt = Tensor::from_vec(&[1, 1, 1, 4], vec![1.0, 0.0, 2.0, -1.0]).unwrap();
        let pred = Tensor::from_vec(&[1, 1, 1, 4], vec![1.5, 9.0, 2.0, 9.0]).unwrap();
        let (v, g) = smooth_l1(&pred, &gt).unwrap();
        // Only pixels 0 and 2 count: (0.25 + 0) / 2.
        assert_relative_eq!(v, 0.125, max_relative = 1e-6);
        assert_eq!(g.data()[1], 0.0);
        assert_eq!(g.data()[3], 0.0);

        let empty = Tensor::zeros(&[1, 1, 1, 4]);
        assert!(matches!(smooth_l1(&pred, &empty), Err(LossError::EmptyValidSet)));
    }

    #[test]
    fn multiscale_weights_match_scale_isolation() {
        // gt constant 2.0; predictions equal gt except one scale off by
        // δ=2 (linear branch), isolating that scale's weight.
        let gt = Tensor::full(&[1, 1, 16, 32], 2.0);
        let exact: Vec<Tensor> = (0..4)
            .map(|i| Tensor::full(&[1, 1, 2 << i, 4 << i], 2.0))
            .collect();
        for (scale, expected) in [(3usize, 2.0f64), (0, 2.0 / 64.0), (1, 2.0 / 16.0), (2, 0.5)] {
            let mut preds = exact.clone();
            preds[scale] = Tensor::full(preds[scale].shape(), 4.0);
            let (breakdown, _) = multiscale_supervised(&preds, &gt).unwrap();
            assert_relative_eq!(breakdown.total, expected, max_relative = 1e-5);
        }
        let (zero, grads) = multiscale_supervised(&exact, &gt).unwrap();
        assert_eq!(zero.total, 0.0);
        assert!(grads.iter().all(|g| g.data().iter().all(|&v| v == 0.0)));
        assert!(zero.recombination_error() < 1e-12);
    }

    #[test]
    fn loss_scales_linearly_in_the_linear_branch() {
        let gt = Tensor::full(&[1, 1, 16, 32], 1.0);
        let preds_at = |delta: f32| -> Vec<Tensor> {
            (0..4)
                .map(|i| Tensor::full(&[1, 1, 2 << i, 4 << i], 1.0 + delta))
                .collect()
        };
        let (a, _) = multiscale_supervised(&preds_at(2.0), &gt).unwrap();
        let (b, _) = multiscale_supervised(&preds_at(3.0), &gt).unwrap();
        assert_relative_eq!(b.total, a.total * 1.5, max_relative = 1e-6);
    }

    #[test]
    fn warp_zero_disparity_is_identity() {
        let mut rng = SplitMix64::new(1);
        let src = random_tensor(&[1, 3, 8, 6], 0.0, 1.0, &mut rng);
        let disp = Tensor::zeros(&[1, 1, 8, 6]);
        let out = warp_vertical(&src, &disp, &rig(8, 6)).unwrap();
        assert_eq!(out.data(), src.data(), "zero-disparity warp must be exact");
    }

    #[test]
    fn warp_one_row_shift() {
        let r = rig(8, 4);
        let one_row = (r.fov_h / 8.0) as f32;
        let mut rng = SplitMix64::new(2);
        let src = random_tensor(&[1, 1, 8, 4], 0.0, 1.0, &mut rng);
        let disp = Tensor::full(&[1, 1, 8, 4], one_row);
        let out = warp_vertical(&src, &disp, &r).unwrap();
        for y in 1..8 {
            for x in 0..4 {
                assert_relative_eq!(
                    out.data()[y * 4 + x],
                    src.data()[(y - 1) * 4 + x],
                    max_relative = 1e-5
                );
            }
        }
        // Row 0 clamps to the edge.
        for x in 0..4 {
            assert_relative_eq!(out.data()[x], src.data()[x], max_relative = 1e-5);
        }
    }

    #[test]
    fn warp_rejects_negative_disparity() {
        let src = Tensor::zeros(&[1, 1, 4, 4]);
        let disp = Tensor::full(&[1, 1, 4, 4], -0.01);
        assert!(matches!(
            warp_vertical(&src, &disp, &rig(4, 4)),
            Err(LossError::NegativeDisparity(_))
        ));
    }

    struct WarpLoss {
        src: Tensor,
        rig: RigConfig,
        projection: Vec<f32>,
    }

    impl ScalarFn for WarpLoss {
        fn value(&self, inputs: &[Tensor]) -> Result<f64, AutodiffError> {
            let out = warp_vertical(&self.src, &inputs[0], &self.rig).expect("warp");
            Ok(out
                .data()
                .iter()
                .zip(&self.projection)
                .map(|(&o, &r)| o as f64 * r as f64)
                .sum())
        }
        fn grad(&self, inputs: &[Tensor]) -> Result<Vec<Tensor>, AutodiffError> {
            let g_out = Tensor::from_vec(self.src.shape(), self.projection.clone()).unwrap();
            let (_, g_disp) =
                warp_vertical_backward(&self.src, &inputs[0], &self.rig, &g_out).expect("warp");
            Ok(vec![g_disp])
        }
    }

    #[test]
    fn warp_gradient_matches_finite_differences() {
        let mut rng = SplitMix64::new(3);
        let r = rig(8, 6);
        let src = random_tensor(&[1, 2, 8, 6], 0.0, 1.0, &mut rng);
        // Disparities that keep every sample interior and away from integer
        // row crossings so central differences stay two-sided.
        let disp = random_tensor(&[1, 1, 8, 6], 0.04, 0.11, &mut rng);
        let projection: Vec<f32> = (0..src.numel()).map(|_| rng.next_f32() - 0.5).collect();
        let f = WarpLoss {
            src,
            rig: r,
            projection,
        };
        let err = grad_check(&f, &[disp], 1e-3).unwrap();
        assert!(err < 1e-3, "max relative error {err}");
    }

    #[test]
    fn reconstruction_identity_and_noise_floor() {
        let mut rng = SplitMix64::new(4);
        let view = random_tensor(&[1, 3, 8, 6], 0.0, 1.0, &mut rng);
        let zero = Tensor::zeros(&[1, 1, 8, 6]);
        let (v, _) = reconstruction_loss(&view, &view, &zero, &rig(8, 6)).unwrap();
        assert_eq!(v, 0.0);

        // Independent uniform images at zero disparity: E|a−b| = 1/3.
        let a = random_tensor(&[1, 3, 64, 64], 0.0, 1.0, &mut rng);
        let b = random_tensor(&[1, 3, 64, 64], 0.0, 1.0, &mut rng);
        let (v, _) =
            reconstruction_loss(&a, &b, &Tensor::zeros(&[1, 1, 64, 64]), &rig(64, 64)).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 0.05, "uncorrelated MAE {v}");
    }

    #[test]
    fn smoothness_zero_for_constant_disparity_and_edge_aware() {
        let mut rng = SplitMix64::new(5);
        let rgb = random_tensor(&[1, 3, 6, 8], 0.0, 1.0, &mut rng);
        let constant = Tensor::full(&[1, 1, 6, 8], 0.2);
        let (v, g) = smoothness_loss(&constant, &rgb).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.data().iter().all(|&x| x == 0.0));

        // Same disparity step, flat image vs strong co-located edge.
        let mut disp = Tensor::full(&[1, 1, 6, 8], 0.1);
        for y in 3..6 {
            for x in 0..8 {
                disp.data_mut()[y * 8 + x] = 0.3;
            }
        }
        let flat = Tensor::full(&[1, 3, 6, 8], 0.5);
        let mut edged = flat.clone();
        for y in 3..6 {
            for x in 0..8 {
                for c in 0..3 {
                    edged.data_mut()[(c * 6 + y) * 8 + x] = 1.0;
                }
            }
        }
        let (on_flat, _) = smoothness_loss(&disp, &flat).unwrap();
        let (on_edge, _) = smoothness_loss(&disp, &edged).unwrap();
        assert!(
            on_edge < on_flat,
            "edge-aligned step {on_edge} should cost less than flat {on_flat}"
        );
    }

    struct SmoothnessFn {
        rgb: Tensor,
    }

    impl ScalarFn for SmoothnessFn {
        fn value(&self, inputs: &[Tensor]) -> Result<f64, AutodiffError> {
            Ok(smoothness_loss(&inputs[0], &self.rgb).expect("smoothness").0)
        }
        fn grad(&self, inputs: &[Tensor]) -> Result<Vec<Tensor>, AutodiffError> {
            Ok(vec![smoothness_loss(&inputs[0], &self.rgb).expect("smoothness").1])
        }
    }

    #[test]
    fn smoothness_gradient_matches_finite_differences() {
        let mut rng = SplitMix64::new(6);
        let rgb = random_tensor(&[1, 3, 5, 6], 0.0, 1.0, &mut rng);
        let disp = random_tensor(&[1, 1, 5, 6], 0.05, 0.45, &mut rng);
        let err = grad_check(&SmoothnessFn { rgb }, &[disp], 1e-4).unwrap();
        assert!(err < 1e-3, "max relative error {err}");
    }

    #[test]
    fn unsupervised_loss_degenerate_cases() {
        let mut rng = SplitMix64::new(7);
        let top = random_tensor(&[1, 3, 16, 32], 0.0, 1.0, &mut rng);
        let r = rig(16, 32);
        // Identical views (baseline 0) and zero predictions: exactly zero.
        let preds: Vec<Tensor> = (0..4)
            .map(|i| Tensor::zeros(&[1, 1, 2 << i, 4 << i]))
            .collect();
        let (breakdown, grads) = unsupervised_loss(&preds, &top, &top, &r, 1.0).unwrap();
        assert_eq!(breakdown.total, 0.0);
        assert!(breakdown.recombination_error() < 1e-12);
        assert!(grads.iter().all(|g| g.data().iter().all(|&v| v == 0.0)));

        // λ = 0 reduces the total to the pure reconstruction sum.
        let bottom = random_tensor(&[1, 3, 16, 32], 0.0, 1.0, &mut rng);
        let preds: Vec<Tensor> = (0..4)
            .map(|i| random_tensor(&[1, 1, 2 << i, 4 << i], 0.01, 0.1, &mut rng))
            .collect();
        let (b, _) = unsupervised_loss(&preds, &top, &bottom, &r, 0.0).unwrap();
        let rect_sum: f64 = (0..4).map(|i| scale_weight(i) * b.data_term[i]).sum();
        assert_relative_eq!(b.total, rect_sum, max_relative = 1e-9);
    }
}

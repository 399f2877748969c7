//! Depth evaluation: Abs Rel, Sq Rel, RMSE, RMSE log, and the three δ
//! accuracies, computed over pixels where both maps are valid and under
//! the cap.
//!
//! δ uses the symmetric ratio max(pred/gt, gt/pred) with a *strict* `<`
//! at each 1.25^k threshold, and Sq Rel normalizes by gt (not gt²).

use thiserror::Error;

use crate::panorama::Panorama;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("shape mismatch: prediction {pw}x{ph}, ground truth {gw}x{gh}")]
    ShapeMismatch {
        pw: usize,
        ph: usize,
        gw: usize,
        gh: usize,
    },
    #[error("no valid overlapping pixels under the cap")]
    EmptyMask,
}

/// The seven-number evaluation record plus the pixel count it covers.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub acc_1: f64,
    pub acc_2: f64,
    pub acc_3: f64,
    pub valid_pixel_count: usize,
}

impl MetricsReport {
    /// Aligned table in the conventional column order.
    pub fn table(&self) -> String {
        format!(
            "{:>10} {:>10} {:>10} {:>10} {:>12} {:>12} {:>12}\n\
             {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>11.1}% {:>11.1}% {:>11.1}%",
            "Abs Rel",
            "Sq Rel",
            "RMSE",
            "RMSE log",
            "d<1.25",
            "d<1.25^2",
            "d<1.25^3",
            self.abs_rel,
            self.sq_rel,
            self.rmse,
            self.rmse_log,
            self.acc_1 * 100.0,
            self.acc_2 * 100.0,
            self.acc_3 * 100.0,
        )
    }

    /// `key=value` lines for machine diffing.
    pub fn key_values(&self) -> String {
        format!(
            "abs_rel={}\nsq_rel={}\nrmse={}\nrmse_log={}\nacc_1={}\nacc_2={}\nacc_3={}\nvalid_pixels={}\n",
            self.abs_rel,
            self.sq_rel,
            self.rmse,
            self.rmse_log,
            self.acc_1,
            self.acc_2,
            self.acc_3,
            self.valid_pixel_count
        )
    }
}

/// Pixels where both maps are valid (> 0) and within the cap.
pub fn valid_mask(gt: &Panorama, pred: &Panorama, cap: f64) -> Result<Vec<bool>, MetricsError> {
    if gt.width != pred.width || gt.height != pred.height {
        return Err(MetricsError::ShapeMismatch {
            pw: pred.width,
            ph: pred.height,
            gw: gt.width,
            gh: gt.height,
        });
    }
    Ok(gt
        .data
        .iter()
        .zip(&pred.data)
        .map(|(&g, &p)| g > 0.0 && g <= cap && p > 0.0 && p <= cap)
        .collect())
}

/// Evaluate a predicted depth map against ground truth.
pub fn compute_metrics(
    pred: &Panorama,
    gt: &Panorama,
    cap: f64,
) -> Result<MetricsReport, MetricsError> {
    let mask = valid_mask(gt, pred, cap)?;
    compute_metrics_masked(pred, gt, &mask)
}

/// Evaluate over an explicit mask (used to pool several images).
pub fn compute_metrics_masked(
    pred: &Panorama,
    gt: &Panorama,
    mask: &[bool],
) -> Result<MetricsReport, MetricsError> {
    let mut count = 0usize;
    let mut abs_rel = 0.0f64;
    let mut sq_rel = 0.0f64;
    let mut sq = 0.0f64;
    let mut sq_log = 0.0f64;
    let mut acc = [0usize; 3];
    for ((&p, &g), &ok) in pred.data.iter().zip(&gt.data).zip(mask) {
        if !ok {
            continue;
        }
        count += 1;
        let diff = p - g;
        abs_rel += diff.abs() / g;
        sq_rel += diff * diff / g;
        sq += diff * diff;
        let dlog = p.ln() - g.ln();
        sq_log += dlog * dlog;
        let ratio = (p / g).max(g / p);
        for (k, slot) in acc.iter_mut().enumerate() {
            if ratio < 1.25f64.powi(k as i32 + 1) {
                *slot += 1;
            }
        }
    }
    if count == 0 {
        return Err(MetricsError::EmptyMask);
    }
    let n = count as f64;
    Ok(MetricsReport {
        abs_rel: abs_rel / n,
        sq_rel: sq_rel / n,
        rmse: (sq / n).sqrt(),
        rmse_log: (sq_log / n).sqrt(),
        acc_1: acc[0] as f64 / n,
        acc_2: acc[1] as f64 / n,
        acc_3: acc[2] as f64 / n,
        valid_pixel_count: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panorama::PanoKind;
    use crate::rng::SplitMix64;
    use approx::assert_relative_eq;

    fn depth(w: usize, h: usize, data: Vec<f64>) -> Panorama {
        Panorama::new(w, h, 1, PanoKind::Depth, data).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let gt = depth(4, 1, vec![1.0, 2.0, 3.0, 4.0]);
        let r = compute_metrics(&gt, &gt, 20.0).unwrap();
        assert_eq!(
            (r.abs_rel, r.sq_rel, r.rmse, r.rmse_log),
            (0.0, 0.0, 0.0, 0.0)
        );
        assert_eq!((r.acc_1, r.acc_2, r.acc_3), (1.0, 1.0, 1.0));
        assert_eq!(r.valid_pixel_count, 4);
    }

    #[test]
    fn single_pixel_formulas() {
        // p=2, g=1: every formula evaluated by hand.
        let r = compute_metrics(&depth(1, 1, vec![2.0]), &depth(1, 1, vec![1.0]), 20.0).unwrap();
        assert_relative_eq!(r.abs_rel, 1.0);
        assert_relative_eq!(r.sq_rel, 1.0);
        assert_relative_eq!(r.rmse, 1.0);
        assert_relative_eq!(r.rmse_log, 2.0f64.ln(), max_relative = 1e-12);
        // ratio 2 > 1.25^3 = 1.953125: all thresholds fail.
        assert_eq!((r.acc_1, r.acc_2, r.acc_3), (0.0, 0.0, 0.0));
    }

    #[test]
    fn strict_inequality_at_exact_ratio() {
        // pred = 1.25·gt: ratio is exactly 1.25, so acc_1 fails (strict <)
        // and the higher thresholds pass.
        let gt = depth(2, 1, vec![2.0, 4.0]);
        let pred = depth(2, 1, vec![2.5, 5.0]);
        let r = compute_metrics(&pred, &gt, 20.0).unwrap();
        assert_relative_eq!(r.abs_rel, 0.25);
        assert_eq!(r.acc_1, 0.0);
        assert_eq!(r.acc_2, 1.0);
        assert_eq!(r.acc_3, 1.0);
    }

    #[test]
    fn cap_and_invalid_filtering() {
        let gt = depth(4, 1, vec![25.0, 1.0, 2.0, 3.0]);
        let pred = depth(4, 1, vec![10.0, 0.0, 2.0, 21.0]);
        let mask = valid_mask(&gt, &pred, 20.0).unwrap();
        // Pixel 0: gt over cap. Pixel 1: pred invalid. Pixel 3: pred over cap.
        assert_eq!(mask, vec![false, false, true, false]);
        let r = compute_metrics(&pred, &gt, 20.0).unwrap();
        assert_eq!(r.valid_pixel_count, 1);
        assert_eq!(r.abs_rel, 0.0);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let gt = depth(2, 1, vec![0.0, 25.0]);
        let pred = depth(2, 1, vec![1.0, 1.0]);
        assert!(matches!(
            compute_metrics(&pred, &gt, 20.0),
            Err(MetricsError::EmptyMask)
        ));
    }

    #[test]
    fn matches_naive_reference_on_random_maps() {
        // Independent straight-line reimplementation of every formula.
        let mut rng = SplitMix64::new(42);
        for _ in 0..100 {
            let n = 16 * 32;
            let gt_data: Vec<f64> = (0..n).map(|_| rng.range_f64(0.05, 25.0)).collect();
            let pred_data: Vec<f64> = (0..n)
                .map(|_| if rng.next_f64() < 0.05 { 0.0 } else { rng.range_f64(0.05, 25.0) })
                .collect();
            let gt = depth(32, 16, gt_data.clone());
            let pred = depth(32, 16, pred_data.clone());
            let ours = match compute_metrics(&pred, &gt, 20.0) {
                Ok(r) => r,
                Err(_) => continue,
            };

            let cap = 20.0;
            let pairs: Vec<(f64, f64)> = pred_data
                .iter()
                .zip(&gt_data)
                .filter(|&(&p, &g)| g > 0.0 && g <= cap && p > 0.0 && p <= cap)
                .map(|(&p, &g)| (p, g))
                .collect();
            let m = pairs.len() as f64;
            let abs_rel = pairs.iter().map(|(p, g)| (p - g).abs() / g).sum::<f64>() / m;
            let sq_rel = pairs.iter().map(|(p, g)| (p - g) * (p - g) / g).sum::<f64>() / m;
            let rmse = (pairs.iter().map(|(p, g)| (p - g) * (p - g)).sum::<f64>() / m).sqrt();
            let rmse_log =
                (pairs.iter().map(|(p, g)| (p.ln() - g.ln()).powi(2)).sum::<f64>() / m).sqrt();
            let acc = |t: f64| {
                pairs.iter().filter(|(p, g)| (p / g).max(g / p) < t).count() as f64 / m
            };
            assert_relative_eq!(ours.abs_rel, abs_rel, max_relative = 1e-6);
            assert_relative_eq!(ours.sq_rel, sq_rel, max_relative = 1e-6);
            assert_relative_eq!(ours.rmse, rmse, max_relative = 1e-6);
            assert_relative_eq!(ours.rmse_log, rmse_log, max_relative = 1e-6);
            assert_relative_eq!(ours.acc_1, acc(1.25), max_relative = 1e-9);
            assert_relative_eq!(ours.acc_2, acc(1.5625), max_relative = 1e-9);
            assert_relative_eq!(ours.acc_3, acc(1.953125), max_relative = 1e-9);

            // Structural invariants.
            assert!(ours.acc_1 <= ours.acc_2 && ours.acc_2 <= ours.acc_3);
            let mean_abs = pairs.iter().map(|(p, g)| (p - g).abs()).sum::<f64>() / m;
            assert!(ours.rmse >= mean_abs - 1e-12, "rmse below mean abs error");
        }
    }
}

//! Semi-global matching for vertically displaced equirectangular pairs.
//!
//! The pipeline is the classic four steps — matching cost, multi-path
//! aggregation, winner-take-all with sub-pixel refinement, median filter —
//! with the search running along latitude (each panorama column is an
//! epipolar line) and costs discretized over angular disparity.
//!
//! Panorama-specific boundary rules: horizontal aggregation paths wrap in
//! longitude, and each wrap pass runs one warm-up lap from the seam column
//! before the output lap so the recurrence state entering every pixel has
//! seen a full revolution — results are then insensitive to the seam
//! choice. Vertical and diagonal paths clamp at the top/bottom borders
//! (poles are not adjacent); diagonals still wrap horizontally.
//!
//! Cost kinds: census (Hamming distance of window descriptors, nearest-row
//! candidate sampling) and SAD (window sum of absolute differences with
//! bilinear row sampling). Candidates that leave the image vertically get
//! a large sentinel cost; they never wrap to the other pole.
//!
//! Disparity level 0 refines to the value 0.0, which doubles as the
//! invalid marker — both mean "no usable parallax" to every consumer.

use thiserror::Error;

use crate::geometry::{self, RigConfig};
use crate::panorama::{PanoKind, Panorama};

#[derive(Debug, Error)]
pub enum SgmError {
    #[error("image shapes differ: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
}

/// Cost assigned to disparity candidates that fall outside the image.
pub const COST_SENTINEL: f32 = 1e4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostKind {
    Census,
    Sad,
}

#[derive(Clone, Debug)]
pub struct SgmParams {
    pub cost: CostKind,
    pub census_window: usize,
    pub sad_window: usize,
    /// Penalty for a one-level disparity change between neighbors.
    pub p1: f32,
    /// Penalty for larger jumps. p1 = p2 = 0 disables smoothing entirely
    /// (aggregation then returns num_paths × the raw costs exactly).
    pub p2: f32,
    /// 4 (horizontal + vertical) or 8 (adds diagonals).
    pub num_paths: usize,
    /// Search ceiling in radians.
    pub max_disparity: f64,
    /// Number of discrete disparity levels.
    pub num_disp: usize,
    /// Reject a winner unless best < uniqueness · second-best (second-best
    /// taken outside ±1 level of the winner).
    pub uniqueness: f32,
    /// Median filter window for refinement.
    pub median_window: usize,
}

impl SgmParams {
    /// Defaults sized to a rig: census 5×5, p1=8, p2=96, 8 paths, 64
    /// levels, search ceiling `baseline / 0.5 m` capped at `fov_h/4`.
    pub fn for_rig(rig: &RigConfig) -> SgmParams {
        let raw = if rig.baseline > 0.0 {
            rig.baseline / 0.5
        } else {
            rig.fov_h / 4.0
        };
        SgmParams {
            cost: CostKind::Census,
            census_window: 5,
            sad_window: 5,
            p1: 8.0,
            p2: 96.0,
            num_paths: 8,
            max_disparity: raw.min(rig.fov_h / 4.0),
            num_disp: 64,
            uniqueness: 0.95,
            median_window: 3,
        }
    }

    pub fn validate(&self, rig: &RigConfig) -> Result<(), SgmError> {
        if self.census_window % 2 == 0 || self.sad_window % 2 == 0 || self.median_window % 2 == 0 {
            return Err(SgmError::BadParams("windows must be odd".into()));
        }
        // p1 = p2 = 0 is the deliberate no-smoothing case used to verify
        // the aggregation identity; otherwise require 0 < p1 <= p2.
        if self.p1 < 0.0 || self.p2 < self.p1 {
            return Err(SgmError::BadParams(format!(
                "penalties must satisfy 0 <= p1 <= p2, got {} and {}",
                self.p1, self.p2
            )));
        }
        if self.num_paths != 4 && self.num_paths != 8 {
            return Err(SgmError::BadParams(format!(
                "num_paths must be 4 or 8, got {}",
                self.num_paths
            )));
        }
        if self.num_disp < 2 {
            return Err(SgmError::BadParams("need at least 2 disparity levels".into()));
        }
        if !(self.max_disparity > 0.0 && self.max_disparity <= rig.fov_h / 4.0 + 1e-12) {
            return Err(SgmError::BadParams(format!(
                "max_disparity {} outside (0, fov_h/4]",
                self.max_disparity
            )));
        }
        if !(self.uniqueness > 0.0 && self.uniqueness <= 1.0) {
            return Err(SgmError::BadParams(format!(
                "uniqueness ratio {} outside (0, 1]",
                self.uniqueness
            )));
        }
        Ok(())
    }
}

/// H×W×D stack of matching costs over discrete disparity levels.
#[derive(Clone, Debug)]
pub struct CostVolume {
    pub width: usize,
    pub height: usize,
    pub num_disp: usize,
    /// Radians per disparity level: max_disparity / (num_disp − 1).
    pub step: f64,
    /// Row-major [y][x][d], contiguous in d.
    pub costs: Vec<f32>,
}

impl CostVolume {
    pub fn zeros(width: usize, height: usize, num_disp: usize, step: f64) -> CostVolume {
        CostVolume {
            width,
            height,
            num_disp,
            step,
            costs: vec![0.0; width * height * num_disp],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> &[f32] {
        &self.costs[(y * self.width + x) * self.num_disp..][..self.num_disp]
    }

    #[inline]
    fn at_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        &mut self.costs[(y * self.width + x) * self.num_disp..][..self.num_disp]
    }
}

fn check_pair(top: &Panorama, bottom: &Panorama) -> Result<(), SgmError> {
    if top.width != bottom.width || top.height != bottom.height {
        return Err(SgmError::ShapeMismatch(
            top.width,
            bottom.width,
            top.height,
            bottom.height,
        ));
    }
    Ok(())
}

/// 24-bit census descriptor of a 5×5 (or k×k) neighborhood: one bit per
/// neighbor, set when the neighbor is darker than the center. Rows clamp,
/// columns wrap.
fn census_transform(image: &Panorama, window: usize) -> Vec<u32> {
    let (w, h) = (image.width, image.height);
    let r = (window / 2) as isize;
    let mut out = vec![0u32; w * h];
    for y in 0..h {
        for x in 0..w {
            let center = image.at(x, y);
            let mut code = 0u32;
            for dy in -r..=r {
                for dx in -r..=r {
                    if dy == 0 && dx == 0 {
                        continue;
                    }
                    let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    let xx = (x as isize + dx).rem_euclid(w as isize) as usize;
                    code = (code << 1) | u32::from(image.at(xx, yy) < center);
                }
            }
            out[y * w + x] = code;
        }
    }
    out
}

/// Build the matching-cost volume. `top` and `bottom` must be grayscale.
///
/// For disparity level d (angle d·step), the candidate for top pixel
/// (y, x) sits in the bottom image at the same column, `d·step·h/fov_h`
/// rows *up* (the lower camera sees content at smaller latitude).
pub fn matching_cost(
    top: &Panorama,
    bottom: &Panorama,
    params: &SgmParams,
    rig: &RigConfig,
) -> Result<CostVolume, SgmError> {
    check_pair(top, bottom)?;
    params.validate(rig)?;
    let (w, h) = (top.width, top.height);
    let window = match params.cost {
        CostKind::Census => params.census_window,
        CostKind::Sad => params.sad_window,
    };
    if window >= h || window >= w {
        return Err(SgmError::BadParams(format!(
            "window {window} does not fit {w}x{h} image"
        )));
    }
    let step = params.max_disparity / (params.num_disp - 1) as f64;
    let rpr = rig.rows_per_radian();
    let mut volume = CostVolume::zeros(w, h, params.num_disp, step);

    match params.cost {
        CostKind::Census => {
            let census_top = census_transform(top, params.census_window);
            let census_bottom = census_transform(bottom, params.census_window);
            for di in 0..params.num_disp {
                let shift = di as f64 * step * rpr;
                for y in 0..h {
                    let yb = (y as f64 - shift).round();
                    if yb < 0.0 || yb > (h - 1) as f64 {
                        for x in 0..w {
                            volume.at_mut(x, y)[di] = COST_SENTINEL;
                        }
                        continue;
                    }
                    let yb = yb as usize;
                    for x in 0..w {
                        let d = census_top[y * w + x] ^ census_bottom[yb * w + x];
                        volume.at_mut(x, y)[di] = d.count_ones() as f32;
                    }
                }
            }
        }
        CostKind::Sad => {
            let r = (params.sad_window / 2) as isize;
            let mut shifted = vec![0.0f64; w * h];
            let mut absdiff = vec![0.0f64; w * h];
            let mut vsum = vec![0.0f64; w * h];
            for di in 0..params.num_disp {
                let shift = di as f64 * step * rpr;
                // Bilinear vertical shift of the bottom image.
                for y in 0..h {
                    let s = y as f64 - shift;
                    let s_c = s.clamp(0.0, (h - 1) as f64);
                    let y0 = s_c.floor() as usize;
                    let y1 = (y0 + 1).min(h - 1);
                    let f = s_c - y0 as f64;
                    for x in 0..w {
                        shifted[y * w + x] =
                            bottom.at(x, y0) + f * (bottom.at(x, y1) - bottom.at(x, y0));
                    }
                }
                for y in 0..h {
                    for x in 0..w {
                        absdiff[y * w + x] = (top.at(x, y) - shifted[y * w + x]).abs();
                    }
                }
                // Separable window sum: rows clamp, columns wrap.
                for y in 0..h {
                    for x in 0..w {
                        let mut acc = 0.0f64;
                        for dy in -r..=r {
                            let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                            acc += absdiff[yy * w + x];
                        }
                        vsum[y * w + x] = acc;
                    }
                }
                for y in 0..h {
                    for x in 0..w {
                        let center = y as f64 - shift;
                        if center < 0.0 || center > (h - 1) as f64 {
                            volume.at_mut(x, y)[di] = COST_SENTINEL;
                            continue;
                        }
                        let mut acc = 0.0f64;
                        for dx in -r..=r {
                            let xx = (x as isize + dx).rem_euclid(w as isize) as usize;
                            acc += vsum[y * w + xx];
                        }
                        volume.at_mut(x, y)[di] = acc as f32;
                    }
                }
            }
        }
    }
    Ok(volume)
}

/// One SGM recurrence step. Written as `cost + (best − min_prev)` so the
/// penalty-free case adds exactly zero.
#[inline]
fn sgm_step(prev: &[f32], cost: &[f32], out: &mut [f32], p1: f32, p2: f32) {
    let min_prev = prev.iter().copied().fold(f32::INFINITY, f32::min);
    let d_max = prev.len();
    for d in 0..d_max {
        let mut best = prev[d];
        if d > 0 {
            best = best.min(prev[d - 1] + p1);
        }
        if d + 1 < d_max {
            best = best.min(prev[d + 1] + p1);
        }
        best = best.min(min_prev + p2);
        out[d] = cost[d] + (best - min_prev);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Direction {
    Right,
    Left,
    Down,
    Up,
    DownRight,
    DownLeft,
    UpRight,
    UpLeft,
}

const PATHS_4: [Direction; 4] = [
    Direction::Right,
    Direction::Left,
    Direction::Down,
    Direction::Up,
];
const PATHS_8: [Direction; 8] = [
    Direction::Right,
    Direction::Left,
    Direction::Down,
    Direction::Up,
    Direction::DownRight,
    Direction::DownLeft,
    Direction::UpRight,
    Direction::UpLeft,
];

/// Aggregate one directional path into `acc`.
fn aggregate_path(
    volume: &CostVolume,
    params: &SgmParams,
    direction: Direction,
    seam: usize,
    acc: &mut [f32],
) {
    let (w, h, nd) = (volume.width, volume.height, volume.num_disp);
    let mut line = vec![0.0f32; nd];
    let mut next = vec![0.0f32; nd];
    let mut add = |x: usize, y: usize, state: &[f32], acc: &mut [f32]| {
        let base = (y * w + x) * nd;
        for d in 0..nd {
            acc[base + d] += state[d];
        }
    };

    match direction {
        Direction::Right | Direction::Left => {
            // Cyclic rows: a warm-up lap from the seam, then the output lap.
            for y in 0..h {
                let cols: Vec<usize> = match direction {
                    Direction::Right => (0..w).map(|j| (seam + j) % w).collect(),
                    _ => (0..w).map(|j| (seam + w - j % w) % w).collect(),
                };
                line.copy_from_slice(volume.at(cols[0], y));
                for &x in &cols[1..] {
                    sgm_step(&line, volume.at(x, y), &mut next, params.p1, params.p2);
                    std::mem::swap(&mut line, &mut next);
                }
                for &x in &cols {
                    sgm_step(&line, volume.at(x, y), &mut next, params.p1, params.p2);
                    std::mem::swap(&mut line, &mut next);
                    add(x, y, &line, acc);
                }
            }
        }
        Direction::Down | Direction::Up => {
            for x in 0..w {
                let rows: Vec<usize> = match direction {
                    Direction::Down => (0..h).collect(),
                    _ => (0..h).rev().collect(),
                };
                line.copy_from_slice(volume.at(x, rows[0]));
                add(x, rows[0], &line, acc);
                for &y in &rows[1..] {
                    sgm_step(&line, volume.at(x, y), &mut next, params.p1, params.p2);
                    std::mem::swap(&mut line, &mut next);
                    add(x, y, &line, acc);
                }
            }
        }
        _ => {
            // Diagonals: every line starts on the top or bottom border and
            // wraps horizontally while marching H rows.
            let (dy, dx): (isize, isize) = match direction {
                Direction::DownRight => (1, 1),
                Direction::DownLeft => (1, -1),
                Direction::UpRight => (-1, 1),
                _ => (-1, -1),
            };
            let y_start = if dy > 0 { 0usize } else { h - 1 };
            for x0 in 0..w {
                let (mut x, mut y) = (x0 as isize, y_start as isize);
                line.copy_from_slice(volume.at(x0, y_start));
                add(x0, y_start, &line, acc);
                for _ in 1..h {
                    x = (x + dx).rem_euclid(w as isize);
                    y += dy;
                    let (xu, yu) = (x as usize, y as usize);
                    sgm_step(&line, volume.at(xu, yu), &mut next, params.p1, params.p2);
                    std::mem::swap(&mut line, &mut next);
                    add(xu, yu, &line, acc);
                }
            }
        }
    }
}

/// Sum the directional-path costs. With p1 = p2 = 0 this is exactly
/// `num_paths ×` the input volume.
pub fn aggregate(volume: &CostVolume, params: &SgmParams) -> Result<CostVolume, SgmError> {
    aggregate_with_seam(volume, params, 0)
}

/// Aggregation with an explicit seam column for the wrap passes; the seam
/// choice must not affect results (warm-up lap), which the tests verify.
pub fn aggregate_with_seam(
    volume: &CostVolume,
    params: &SgmParams,
    seam: usize,
) -> Result<CostVolume, SgmError> {
    if params.num_paths != 4 && params.num_paths != 8 {
        return Err(SgmError::BadParams(format!(
            "num_paths must be 4 or 8, got {}",
            params.num_paths
        )));
    }
    let paths: &[Direction] = if params.num_paths == 4 { &PATHS_4 } else { &PATHS_8 };
    let mut out = CostVolume::zeros(volume.width, volume.height, volume.num_disp, volume.step);
    for &direction in paths {
        aggregate_path(volume, params, direction, seam, &mut out.costs);
    }
    Ok(out)
}

/// Winner-take-all with parabola sub-pixel refinement and a uniqueness
/// test. Returns disparity in radians; rejected pixels carry 0.
pub fn wta_disparity(agg: &CostVolume, params: &SgmParams) -> Panorama {
    let (w, h, nd) = (agg.width, agg.height, agg.num_disp);
    let mut out = Panorama::zeros(w, h, 1, PanoKind::Disparity);
    for y in 0..h {
        for x in 0..w {
            let costs = agg.at(x, y);
            let mut best_d = 0usize;
            for d in 1..nd {
                if costs[d] < costs[best_d] {
                    best_d = d;
                }
            }
            let best = costs[best_d];
            // Second-best outside ±1 of the winner.
            let mut second = f32::INFINITY;
            for (d, &c) in costs.iter().enumerate() {
                if d + 1 < best_d || d > best_d + 1 {
                    second = second.min(c);
                }
            }
            if second.is_finite() && !(best < params.uniqueness * second) {
                continue; // ambiguous: leave invalid
            }
            let mut offset = 0.0f64;
            if best_d > 0 && best_d + 1 < nd {
                let (cm, c0, cp) =
                    (costs[best_d - 1] as f64, best as f64, costs[best_d + 1] as f64);
                let denom = cm + cp - 2.0 * c0;
                if denom > 0.0 {
                    offset = ((cm - cp) / (2.0 * denom)).clamp(-0.5, 0.5);
                }
            }
            out.set(x, y, 0, (best_d as f64 + offset) * agg.step);
        }
    }
    out
}

/// Median-filter refinement: valid pixels take the lower median of their
/// valid neighbors (rows clamp, columns wrap); invalid pixels stay invalid.
pub fn refine(disp: &Panorama, params: &SgmParams) -> Panorama {
    let (w, h) = (disp.width, disp.height);
    let r = (params.median_window / 2) as isize;
    let mut out = disp.clone();
    let mut values = Vec::with_capacity(params.median_window * params.median_window);
    for y in 0..h {
        for x in 0..w {
            if disp.at(x, y) <= 0.0 {
                continue;
            }
            values.clear();
            for dy in -r..=r {
                for dx in -r..=r {
                    let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    let xx = (x as isize + dx).rem_euclid(w as isize) as usize;
                    let v = disp.at(xx, yy);
                    if v > 0.0 {
                        values.push(v);
                    }
                }
            }
            values.sort_by(f64::total_cmp);
            out.set(x, y, 0, values[(values.len() - 1) / 2]);
        }
    }
    out
}

/// Full pipeline: grayscale conversion, cost, aggregation, winner-take-all,
/// median refinement, and depth via the per-row cos(latitude) factors.
pub fn sgm_depth(
    top: &Panorama,
    bottom: &Panorama,
    rig: &RigConfig,
    params: &SgmParams,
) -> Result<(Panorama, Panorama), SgmError> {
    check_pair(top, bottom)?;
    if top.width != rig.width || top.height != rig.height {
        return Err(SgmError::ShapeMismatch(top.width, rig.width, top.height, rig.height));
    }
    let top_gray = top.to_gray();
    let bottom_gray = bottom.to_gray();
    let volume = matching_cost(&top_gray, &bottom_gray, params, rig)?;
    let aggregated = aggregate(&volume, params)?;
    let raw = wta_disparity(&aggregated, params);
    let disparity = refine(&raw, params);

    let angles = geometry::angle_matrix(rig)?;
    let mut depth = Panorama::zeros(rig.width, rig.height, 1, PanoKind::Depth);
    for y in 0..rig.height {
        let cos_lat = angles.cos_lat(y);
        for x in 0..rig.width {
            let d = disparity.at(x, y);
            if d > 0.0 {
                depth.set(x, y, 0, geometry::disparity_to_depth(d, cos_lat, rig));
            }
        }
    }
    Ok((disparity, depth))
}

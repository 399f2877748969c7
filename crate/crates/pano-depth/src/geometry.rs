//! Spherical coordinates for equirectangular panoramas and the
//! disparity ↔ depth relation of a vertically displaced rig.
//!
//! Conventions, fixed once here and relied on everywhere else:
//!
//! * Image x maps linearly to longitude, image y to latitude. Continuous
//!   coordinates `(x, y)` in `[0, w] × [0, h]` map to angles via
//!   `lon = x·fov_w/w − fov_w/2`, `lat = y·fov_h/h − fov_h/2` (no
//!   half-pixel offset; samplers that want pixel centers pass `x + 0.5`).
//! * Latitude grows downward: row 0 is `−fov_h/2` (up), the last rows look
//!   down. World +y is the image-down direction.
//! * The discrete per-row latitude grid of [`AngleMatrix`] spans the full
//!   vertical field of view inclusively: row y of h has latitude
//!   `y·fov_h/(h−1) − fov_h/2`, so the first and last rows sit exactly at
//!   `∓fov_h/2`. This is a deliberate second convention: the matrix
//!   describes rows, the mapping above describes continuous coordinates.
//! * Depth from angular disparity: `depth = baseline · cos(lat) / disparity`.
//!   The cosine (not the raw latitude) is what scales vertical parallax;
//!   at the poles parallax vanishes and no depth can be recovered.
//! * Invalid depth and invalid disparity are both encoded as `0.0`.

use thiserror::Error;

/// Angular disparities below this are treated as no-parallax and convert to
/// the invalid-depth sentinel instead of a huge or infinite depth.
pub const DISPARITY_EPSILON: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid rig: {0}")]
    InvalidRig(String),
    #[error("pixel coordinate ({x}, {y}) outside [0, {w}] x [0, {h}]")]
    PixelOutOfRange { x: f64, y: f64, w: usize, h: usize },
    #[error("angle ({lon}, {lat}) outside the rig field of view")]
    AngleOutOfRange { lon: f64, lat: f64 },
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
}

/// Vertical stereo rig: two equirectangular cameras displaced by `baseline`
/// meters along the vertical axis, sharing image dimensions and fields of
/// view.
#[derive(Clone, Debug, PartialEq)]
pub struct RigConfig {
    /// Vertical camera separation in meters.
    pub baseline: f64,
    /// Panorama width in pixels.
    pub width: usize,
    /// Panorama height in pixels.
    pub height: usize,
    /// Horizontal field of view in radians (full panorama: 2π).
    pub fov_w: f64,
    /// Vertical field of view in radians (full panorama: π).
    pub fov_h: f64,
}

impl RigConfig {
    /// Full-sphere rig with the given baseline and image size.
    pub fn new(baseline: f64, width: usize, height: usize) -> Result<Self, GeometryError> {
        let rig = RigConfig {
            baseline,
            width,
            height,
            fov_w: std::f64::consts::TAU,
            fov_h: std::f64::consts::PI,
        };
        rig.validate()?;
        Ok(rig)
    }

    pub fn with_fov(mut self, fov_w: f64, fov_h: f64) -> Result<Self, GeometryError> {
        self.fov_w = fov_w;
        self.fov_h = fov_h;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        // baseline 0 is allowed as a deliberately degenerate rig (identical
        // views, zero disparity everywhere); negative separations are not.
        if !(self.baseline >= 0.0) {
            return Err(GeometryError::InvalidRig(format!(
                "baseline must be >= 0, got {}",
                self.baseline
            )));
        }
        if self.width < 2 || self.height < 2 {
            return Err(GeometryError::InvalidRig(format!(
                "dimensions must be at least 2x2, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.fov_w > 0.0 && self.fov_w <= std::f64::consts::TAU + 1e-12) {
            return Err(GeometryError::InvalidRig(format!(
                "fov_w must be in (0, 2pi], got {}",
                self.fov_w
            )));
        }
        if !(self.fov_h > 0.0 && self.fov_h <= std::f64::consts::PI + 1e-12) {
            return Err(GeometryError::InvalidRig(format!(
                "fov_h must be in (0, pi], got {}",
                self.fov_h
            )));
        }
        Ok(())
    }

    /// Rows per radian of latitude, the scale between angular disparity and
    /// vertical pixel displacement.
    pub fn rows_per_radian(&self) -> f64 {
        self.height as f64 / self.fov_h
    }
}

/// Continuous pixel coordinates to (longitude, latitude) in radians.
pub fn pixel_to_lonlat(x: f64, y: f64, rig: &RigConfig) -> Result<(f64, f64), GeometryError> {
    let (w, h) = (rig.width as f64, rig.height as f64);
    if !(0.0..=w).contains(&x) || !(0.0..=h).contains(&y) {
        return Err(GeometryError::PixelOutOfRange {
            x,
            y,
            w: rig.width,
            h: rig.height,
        });
    }
    let lon = x * rig.fov_w / w - rig.fov_w / 2.0;
    let lat = y * rig.fov_h / h - rig.fov_h / 2.0;
    Ok((lon, lat))
}

/// Exact algebraic inverse of [`pixel_to_lonlat`].
pub fn lonlat_to_pixel(lon: f64, lat: f64, rig: &RigConfig) -> Result<(f64, f64), GeometryError> {
    let tol = 1e-12;
    if lon < -rig.fov_w / 2.0 - tol
        || lon > rig.fov_w / 2.0 + tol
        || lat < -rig.fov_h / 2.0 - tol
        || lat > rig.fov_h / 2.0 + tol
    {
        return Err(GeometryError::AngleOutOfRange { lon, lat });
    }
    let x = (lon + rig.fov_w / 2.0) * rig.width as f64 / rig.fov_w;
    let y = (lat + rig.fov_h / 2.0) * rig.height as f64 / rig.fov_h;
    Ok((x, y))
}

/// Per-row cos(latitude) factors plus the discrete angle lookup grids.
///
/// Row y carries `cos(y·fov_h/(h−1) − fov_h/2)`: the first row is
/// `cos(fov_h/2)`, the middle row (odd h) is exactly 1, the last row is
/// `cos(−fov_h/2)`. Values are constant along each row.
#[derive(Clone, Debug)]
pub struct AngleMatrix {
    pub width: usize,
    pub height: usize,
    /// Row-major H×W cos(latitude) values.
    pub values: Vec<f64>,
    /// Longitude of each column, radians, inclusive grid over fov_w.
    pub longitudes: Vec<f64>,
    /// Latitude of each row, radians, inclusive grid over fov_h.
    pub latitudes: Vec<f64>,
}

impl AngleMatrix {
    /// cos(latitude) of a row.
    pub fn cos_lat(&self, y: usize) -> f64 {
        self.values[y * self.width]
    }
}

/// Build the [`AngleMatrix`] for a rig.
pub fn angle_matrix(rig: &RigConfig) -> Result<AngleMatrix, GeometryError> {
    rig.validate()?;
    let (w, h) = (rig.width, rig.height);
    let latitudes: Vec<f64> = (0..h)
        .map(|y| y as f64 * rig.fov_h / (h - 1) as f64 - rig.fov_h / 2.0)
        .collect();
    let longitudes: Vec<f64> = (0..w)
        .map(|x| x as f64 * rig.fov_w / (w - 1) as f64 - rig.fov_w / 2.0)
        .collect();
    let mut values = Vec::with_capacity(w * h);
    for lat in &latitudes {
        let c = lat.cos();
        values.extend(std::iter::repeat(c).take(w));
    }
    Ok(AngleMatrix {
        width: w,
        height: h,
        values,
        longitudes,
        latitudes,
    })
}

/// Absolute latitude difference between two correspondences, radians.
pub fn angular_disparity(lat_a: f64, lat_b: f64) -> f64 {
    (lat_a - lat_b).abs()
}

/// Angular disparity to metric depth: `baseline · cos_lat / disparity`.
///
/// Disparities below [`DISPARITY_EPSILON`] yield the invalid sentinel 0.0,
/// never infinity.
pub fn disparity_to_depth(disparity: f64, cos_lat: f64, rig: &RigConfig) -> f64 {
    if disparity < DISPARITY_EPSILON {
        return 0.0;
    }
    rig.baseline * cos_lat / disparity
}

/// Metric depth to angular disparity: `baseline · cos_lat / depth`.
pub fn depth_to_disparity(depth: f64, cos_lat: f64, rig: &RigConfig) -> Result<f64, GeometryError> {
    if !(depth > 0.0) {
        return Err(GeometryError::NonPositiveDepth(depth));
    }
    Ok(rig.baseline * cos_lat / depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn rig() -> RigConfig {
        RigConfig::new(0.26, 128, 64).unwrap()
    }

    #[test]
    fn center_pixel_maps_to_zero_angles() {
        let r = rig();
        let (lon, lat) = pixel_to_lonlat(64.0, 32.0, &r).unwrap();
        assert_eq!(lon, 0.0);
        assert_eq!(lat, 0.0);
    }

    #[test]
    fn corners_map_to_fov_edges() {
        let r = rig();
        let (lon, lat) = pixel_to_lonlat(0.0, 0.0, &r).unwrap();
        assert_relative_eq!(lon, -TAU / 2.0);
        assert_relative_eq!(lat, -PI / 2.0);
        let (lon, lat) = pixel_to_lonlat(128.0, 64.0, &r).unwrap();
        assert_relative_eq!(lon, TAU / 2.0);
        assert_relative_eq!(lat, PI / 2.0);
    }

    #[test]
    fn out_of_range_pixel_is_an_error() {
        let r = rig();
        assert!(pixel_to_lonlat(-0.1, 3.0, &r).is_err());
        assert!(pixel_to_lonlat(4.0, 64.5, &r).is_err());
    }

    #[test]
    fn lonlat_to_pixel_inverts_center_and_edge() {
        let r = rig();
        let (x, y) = lonlat_to_pixel(0.0, 0.0, &r).unwrap();
        assert_relative_eq!(x, 64.0);
        assert_relative_eq!(y, 32.0);
        let (x, y) = lonlat_to_pixel(-r.fov_w / 2.0, 0.0, &r).unwrap();
        assert_relative_eq!(x, 0.0);
        assert_relative_eq!(y, 32.0);
    }

    #[test]
    fn out_of_range_angle_is_an_error() {
        let r = rig();
        assert!(lonlat_to_pixel(4.0, 0.0, &r).is_err());
        assert!(lonlat_to_pixel(0.0, 2.0, &r).is_err());
    }

    #[test]
    fn pixel_angle_round_trip() {
        let r = rig();
        let mut rng = crate::rng::SplitMix64::new(11);
        for _ in 0..1000 {
            let x = rng.range_f64(0.0, r.width as f64);
            let y = rng.range_f64(0.0, r.height as f64);
            let (lon, lat) = pixel_to_lonlat(x, y, &r).unwrap();
            let (x2, y2) = lonlat_to_pixel(lon, lat, &r).unwrap();
            assert_relative_eq!(x, x2, max_relative = 1e-9, epsilon = 1e-9);
            assert_relative_eq!(y, y2, max_relative = 1e-9, epsilon = 1e-9);
        }
    }

    #[test]
    fn angle_matrix_three_rows_full_fov() {
        let r = RigConfig::new(1.0, 4, 3).unwrap();
        let m = angle_matrix(&r).unwrap();
        // Rows at -pi/2, 0, +pi/2: cosines 0, 1, 0.
        assert_relative_eq!(m.cos_lat(0), FRAC_PI_2.cos(), epsilon = 1e-15);
        assert_relative_eq!(m.cos_lat(1), 1.0);
        assert_relative_eq!(m.cos_lat(2), FRAC_PI_2.cos(), epsilon = 1e-15);
        assert_relative_eq!(m.latitudes[0], -FRAC_PI_2);
        assert_relative_eq!(m.latitudes[2], FRAC_PI_2);
    }

    #[test]
    fn angle_matrix_rows_constant_and_symmetric() {
        let r = RigConfig::new(1.0, 16, 9).unwrap();
        let m = angle_matrix(&r).unwrap();
        for y in 0..9 {
            for x in 0..16 {
                assert_eq!(m.values[y * 16 + x], m.cos_lat(y));
            }
            // cosine is even, so mirrored rows match exactly
            assert_relative_eq!(m.cos_lat(y), m.cos_lat(8 - y), epsilon = 1e-15);
        }
        assert_relative_eq!(m.cos_lat(4), 1.0);
    }

    #[test]
    fn angular_disparity_is_absolute_difference() {
        assert_relative_eq!(angular_disparity(0.2, 0.1), 0.1);
        assert_eq!(angular_disparity(0.37, 0.37), 0.0);
        assert_relative_eq!(angular_disparity(-0.1, 0.1), 0.2);
    }

    #[test]
    fn disparity_to_depth_examples() {
        let r = RigConfig::new(1.0, 8, 4).unwrap();
        assert_relative_eq!(disparity_to_depth(0.1, 1.0, &r), 10.0);
        let r = RigConfig::new(0.26, 8, 4).unwrap();
        assert_relative_eq!(disparity_to_depth(0.013, 0.5, &r), 10.0);
        // No parallax: sentinel, not infinity.
        assert_eq!(disparity_to_depth(0.0, 1.0, &r), 0.0);
        assert_eq!(disparity_to_depth(1e-9, 0.3, &r), 0.0);
    }

    #[test]
    fn depth_to_disparity_examples() {
        let r = RigConfig::new(1.0, 8, 4).unwrap();
        assert_relative_eq!(depth_to_disparity(10.0, 1.0, &r).unwrap(), 0.1);
        assert_eq!(depth_to_disparity(5.0, 0.0, &r).unwrap(), 0.0);
        assert!(depth_to_disparity(0.0, 1.0, &r).is_err());
        assert!(depth_to_disparity(-2.0, 1.0, &r).is_err());
    }

    #[test]
    fn disparity_depth_round_trip() {
        let r = RigConfig::new(0.26, 8, 4).unwrap();
        let mut rng = crate::rng::SplitMix64::new(5);
        for _ in 0..1000 {
            let depth = rng.range_f64(0.1, 50.0);
            let cos_lat = rng.range_f64(0.05, 1.0);
            let disp = depth_to_disparity(depth, cos_lat, &r).unwrap();
            let back = disparity_to_depth(disp, cos_lat, &r);
            assert_relative_eq!(back, depth, max_relative = 1e-9);
        }
    }

    #[test]
    fn depth_monotone_decreasing_in_disparity() {
        let r = RigConfig::new(0.26, 8, 4).unwrap();
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let d = i as f64 * 1e-3;
            let depth = disparity_to_depth(d, 0.8, &r);
            assert!(depth < prev);
            prev = depth;
        }
    }

    #[test]
    fn rig_validation_rejects_bad_fields() {
        assert!(RigConfig::new(0.0, 8, 4).is_ok(), "degenerate rig is allowed");
        assert!(RigConfig::new(-1.0, 8, 4).is_err());
        assert!(RigConfig::new(1.0, 1, 4).is_err());
        assert!(RigConfig::new(1.0, 8, 4).unwrap().with_fov(7.0, PI).is_err());
        assert!(RigConfig::new(1.0, 8, 4).unwrap().with_fov(TAU, 4.0).is_err());
    }
}

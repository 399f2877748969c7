//! Procedural indoor scenes with analytic ground truth.
//!
//! A scene is an axis-aligned room with textured walls, a few boxes and
//! spheres, and one point light. Rendering casts one ray per pixel center
//! of an equirectangular grid and records the Euclidean distance to the
//! nearest hit, so depth maps are exact by construction and disparity
//! ground truth follows from the rig geometry.
//!
//! Coordinates: +y is image-down (the floor is at positive y), the rig's
//! second camera sits at `origin + (0, baseline, 0)`, i.e. below the first.
//! A lower viewpoint sees every scene point at a smaller latitude, which
//! fixes the sign conventions used by the matcher and the losses: content
//! in the bottom view sits at smaller image y than in the top view.
//!
//! Wall texture is a smoothed checker; hard-edged checkers alias badly at
//! grazing angles and break photometric consistency between the views.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{self, RigConfig};
use crate::io;
use crate::panorama::{PanoKind, Panorama};
use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum ScenegenError {
    #[error("scene generation gave up after {0} retries: {1}")]
    RetriesExhausted(usize, String),
    #[error("camera position ({0}, {1}, {2}) violates scene invariants: {3}")]
    InvalidCamera(f64, f64, f64, String),
    #[error("dataset count must be >= 1")]
    EmptyDataset,
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Io(#[from] io::IoError),
}

pub type Vec3 = [f64; 3];

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}
fn scale3(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Solid object inside the room.
#[derive(Clone, Debug, PartialEq)]
pub enum SceneObject {
    Box { min: Vec3, max: Vec3, albedo: [f64; 3] },
    Sphere { center: Vec3, radius: f64, albedo: [f64; 3] },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointLight {
    pub position: Vec3,
    pub intensity: f64,
}

/// Smoothed two-tone checker applied to all six room faces.
#[derive(Clone, Debug, PartialEq)]
pub struct WallTexture {
    pub period: f64,
    pub albedo_a: [f64; 3],
    pub albedo_b: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    /// Room half-extents: the interior is `[-half[i], half[i]]` per axis.
    pub room_half: Vec3,
    /// Top-camera position; the bottom camera is `rig_origin + (0, b, 0)`.
    pub rig_origin: Vec3,
    pub objects: Vec<SceneObject>,
    pub light: PointLight,
    pub texture: WallTexture,
    pub seed: u64,
}

/// Bounds for [`generate_scene`]'s rejection sampling.
#[derive(Clone, Debug)]
pub struct GenParams {
    pub room_width: (f64, f64),
    pub room_depth: (f64, f64),
    pub room_height: (f64, f64),
    pub object_count: (usize, usize),
    pub object_size: (f64, f64),
    /// Minimum distance from either camera to any object surface.
    pub camera_clearance: f64,
    /// Minimum distance from either camera to the walls.
    pub wall_clearance: f64,
    /// Rig separation used when validating camera positions.
    pub baseline: f64,
    pub texture_period: f64,
    pub max_retries: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            room_width: (5.0, 7.0),
            room_depth: (5.0, 7.0),
            room_height: (3.2, 4.2),
            object_count: (2, 4),
            object_size: (0.4, 1.0),
            camera_clearance: 2.0,
            wall_clearance: 1.4,
            baseline: 0.26,
            texture_period: 0.5,
            max_retries: 200,
        }
    }
}

fn range(rng: &mut SplitMix64, r: (f64, f64)) -> f64 {
    rng.range_f64(r.0, r.1)
}

/// Deterministically generate a scene satisfying the placement invariants.
const SCENE_STREAM: u64 = 0x5ce7_e6e3_1a2b_4c5d;

pub fn generate_scene(seed: u64, params: &GenParams) -> Result<SceneSpec, ScenegenError> {
    let mut rng = SplitMix64::derive(seed, SCENE_STREAM);
    let room_half = [
        range(&mut rng, params.room_width) / 2.0,
        range(&mut rng, params.room_height) / 2.0,
        range(&mut rng, params.room_depth) / 2.0,
    ];

    // Rig near the room center, jittered, both endpoints clear of walls.
    let mut rig_origin = [0.0; 3];
    let mut placed = false;
    for _ in 0..params.max_retries {
        let candidate = [
            rng.range_f64(-0.25, 0.25) * room_half[0],
            rng.range_f64(-0.25, 0.25) * room_half[1],
            rng.range_f64(-0.25, 0.25) * room_half[2],
        ];
        let lower = add(candidate, [0.0, params.baseline, 0.0]);
        if inside_with_margin(candidate, room_half, params.wall_clearance)
            && inside_with_margin(lower, room_half, params.wall_clearance)
        {
            rig_origin = candidate;
            placed = true;
            break;
        }
    }
    if !placed {
        return Err(ScenegenError::RetriesExhausted(
            params.max_retries,
            "cannot place rig with the requested wall clearance".into(),
        ));
    }
    let rig_bottom = add(rig_origin, [0.0, params.baseline, 0.0]);

    let n_objects = params.object_count.0
        + rng.range_usize(params.object_count.1 - params.object_count.0 + 1);
    let mut objects = Vec::with_capacity(n_objects);
    for _ in 0..n_objects {
        let mut ok = false;
        for _ in 0..params.max_retries {
            let size = range(&mut rng, params.object_size);
            let albedo = [
                rng.range_f64(0.15, 0.95),
                rng.range_f64(0.15, 0.95),
                rng.range_f64(0.15, 0.95),
            ];
            let is_box = rng.next_u64() & 1 == 0;
            let center = [
                rng.range_f64(-room_half[0] + size, room_half[0] - size),
                rng.range_f64(-room_half[1] + size, room_half[1] - size),
                rng.range_f64(-room_half[2] + size, room_half[2] - size),
            ];
            let object = if is_box {
                let half = [
                    size * rng.range_f64(0.5, 1.0) / 2.0,
                    size * rng.range_f64(0.5, 1.0) / 2.0,
                    size * rng.range_f64(0.5, 1.0) / 2.0,
                ];
                SceneObject::Box {
                    min: sub(center, half),
                    max: add(center, half),
                    albedo,
                }
            } else {
                SceneObject::Sphere {
                    center,
                    radius: size / 2.0,
                    albedo,
                }
            };
            let fits = object_inside_room(&object, room_half)
                && distance_to_object(rig_origin, &object) >= params.camera_clearance
                && distance_to_object(rig_bottom, &object) >= params.camera_clearance;
            if fits {
                objects.push(object);
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(ScenegenError::RetriesExhausted(
                params.max_retries,
                "cannot place object inside the room with camera clearance".into(),
            ));
        }
    }

    // Light in the upper half of the room so floors are lit obliquely.
    let light = PointLight {
        position: [
            rng.range_f64(-0.4, 0.4) * room_half[0],
            rng.range_f64(-0.8, -0.4) * room_half[1],
            rng.range_f64(-0.4, 0.4) * room_half[2],
        ],
        intensity: rng.range_f64(4.0, 8.0),
    };

    // Two wall tones with guaranteed contrast.
    let base = rng.range_f64(0.25, 0.55);
    let texture = WallTexture {
        period: params.texture_period,
        albedo_a: [base, base * rng.range_f64(0.8, 1.1), base * rng.range_f64(0.8, 1.1)],
        albedo_b: [
            base + 0.35,
            (base + 0.35) * rng.range_f64(0.8, 1.1),
            (base + 0.35) * rng.range_f64(0.8, 1.1),
        ],
    };

    Ok(SceneSpec {
        room_half,
        rig_origin,
        objects,
        light,
        texture,
        seed,
    })
}

fn inside_with_margin(p: Vec3, half: Vec3, margin: f64) -> bool {
    (0..3).all(|i| p[i].abs() <= half[i] - margin)
}

fn object_inside_room(object: &SceneObject, half: Vec3) -> bool {
    match object {
        SceneObject::Box { min, max, .. } => {
            (0..3).all(|i| min[i] >= -half[i] && max[i] <= half[i] && min[i] < max[i])
        }
        SceneObject::Sphere { center, radius, .. } => {
            (0..3).all(|i| center[i] - radius >= -half[i] && center[i] + radius <= half[i])
        }
    }
}

/// Distance from a point to the object's surface (negative inside).
fn distance_to_object(p: Vec3, object: &SceneObject) -> f64 {
    match object {
        SceneObject::Sphere { center, radius, .. } => norm(sub(p, *center)) - radius,
        SceneObject::Box { min, max, .. } => {
            let mut outside = 0.0f64;
            let mut inside = f64::NEG_INFINITY;
            for i in 0..3 {
                let d_lo = min[i] - p[i];
                let d_hi = p[i] - max[i];
                let d = d_lo.max(d_hi);
                if d > 0.0 {
                    outside += d * d;
                }
                inside = inside.max(d);
            }
            if outside > 0.0 {
                outside.sqrt()
            } else {
                inside
            }
        }
    }
}

struct Hit {
    t: f64,
    normal: Vec3,
    albedo: [f64; 3],
}

/// Ray against the room interior: the exit point of the slab volume.
fn hit_room(scene: &SceneSpec, origin: Vec3, dir: Vec3) -> Hit {
    let mut t_exit = f64::INFINITY;
    let mut axis = 0;
    for i in 0..3 {
        if dir[i] != 0.0 {
            let bound = if dir[i] > 0.0 {
                scene.room_half[i]
            } else {
                -scene.room_half[i]
            };
            let t = (bound - origin[i]) / dir[i];
            if t < t_exit {
                t_exit = t;
                axis = i;
            }
        }
    }
    let hit_point = add(origin, scale3(dir, t_exit));
    let mut normal = [0.0; 3];
    normal[axis] = -dir[axis].signum();
    // Texture over the two in-plane coordinates of the face.
    let (u, v) = match axis {
        0 => (hit_point[1], hit_point[2]),
        1 => (hit_point[0], hit_point[2]),
        _ => (hit_point[0], hit_point[1]),
    };
    Hit {
        t: t_exit,
        normal,
        albedo: wall_albedo(&scene.texture, u, v),
    }
}

/// Smoothed square wave with period `t`: high on the first half-period,
/// low on the second, with smoothstep transitions of half-width 0.075·t.
fn soft_square(x: f64, t: f64) -> f64 {
    let p = (x / t).rem_euclid(1.0);
    // Circular distance to the center of the high plateau at p = 0.25.
    let d = (p - 0.25).abs().min(1.0 - (p - 0.25).abs());
    let w = 0.075;
    let s = ((d - (0.25 - w)) / (2.0 * w)).clamp(0.0, 1.0);
    1.0 - s * s * (3.0 - 2.0 * s)
}

fn wall_albedo(tex: &WallTexture, u: f64, v: f64) -> [f64; 3] {
    let su = soft_square(u, tex.period);
    let sv = soft_square(v, tex.period);
    // Soft XNOR: 1 where both waves agree (checker cells), 0 where they differ.
    let w = su * sv + (1.0 - su) * (1.0 - sv);
    [
        tex.albedo_a[0] + (tex.albedo_b[0] - tex.albedo_a[0]) * w,
        tex.albedo_a[1] + (tex.albedo_b[1] - tex.albedo_a[1]) * w,
        tex.albedo_a[2] + (tex.albedo_b[2] - tex.albedo_a[2]) * w,
    ]
}

fn hit_box(min: Vec3, max: Vec3, albedo: [f64; 3], origin: Vec3, dir: Vec3) -> Option<Hit> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    let mut axis = 0;
    for i in 0..3 {
        if dir[i] == 0.0 {
            if origin[i] < min[i] || origin[i] > max[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dir[i];
        let (t0, t1) = if inv > 0.0 {
            ((min[i] - origin[i]) * inv, (max[i] - origin[i]) * inv)
        } else {
            ((max[i] - origin[i]) * inv, (min[i] - origin[i]) * inv)
        };
        if t0 > t_enter {
            t_enter = t0;
            axis = i;
        }
        t_exit = t_exit.min(t1);
    }
    if t_enter <= t_exit && t_enter > 1e-9 {
        let mut normal = [0.0; 3];
        normal[axis] = -dir[axis].signum();
        Some(Hit {
            t: t_enter,
            normal,
            albedo,
        })
    } else {
        None
    }
}

fn hit_sphere(center: Vec3, radius: f64, albedo: [f64; 3], origin: Vec3, dir: Vec3) -> Option<Hit> {
    let oc = sub(origin, center);
    let b = dot(oc, dir);
    let c = dot(oc, oc) - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    if t <= 1e-9 {
        return None;
    }
    let hit_point = add(origin, scale3(dir, t));
    let normal = scale3(sub(hit_point, center), 1.0 / radius);
    Some(Hit {
        t,
        normal,
        albedo,
    })
}

fn trace(scene: &SceneSpec, origin: Vec3, dir: Vec3) -> Hit {
    let mut best = hit_room(scene, origin, dir);
    for object in &scene.objects {
        let candidate = match *object {
            SceneObject::Box { min, max, albedo } => hit_box(min, max, albedo, origin, dir),
            SceneObject::Sphere { center, radius, albedo } => {
                hit_sphere(center, radius, albedo, origin, dir)
            }
        };
        if let Some(h) = candidate {
            if h.t < best.t {
                best = h;
            }
        }
    }
    best
}

const AMBIENT: f64 = 0.30;

fn shade(scene: &SceneSpec, origin: Vec3, dir: Vec3, hit: &Hit) -> [f64; 3] {
    let point = add(origin, scale3(dir, hit.t));
    let to_light = sub(scene.light.position, point);
    let dist2 = dot(to_light, to_light);
    let l = scale3(to_light, 1.0 / dist2.sqrt().max(1e-12));
    let lambert = dot(hit.normal, l).max(0.0);
    let gain = AMBIENT + scene.light.intensity * lambert / (1.0 + dist2);
    [
        (hit.albedo[0] * gain).clamp(0.0, 1.0),
        (hit.albedo[1] * gain).clamp(0.0, 1.0),
        (hit.albedo[2] * gain).clamp(0.0, 1.0),
    ]
}

fn validate_camera(scene: &SceneSpec, origin: Vec3) -> Result<(), ScenegenError> {
    if !(0..3).all(|i| origin[i].abs() < scene.room_half[i]) {
        return Err(ScenegenError::InvalidCamera(
            origin[0],
            origin[1],
            origin[2],
            "outside the room".into(),
        ));
    }
    for object in &scene.objects {
        if distance_to_object(origin, object) <= 0.0 {
            return Err(ScenegenError::InvalidCamera(
                origin[0],
                origin[1],
                origin[2],
                "inside an object".into(),
            ));
        }
    }
    Ok(())
}

/// Render RGB and depth panoramas from `camera_origin`, one ray per pixel
/// center. Row-parallel; results do not depend on the thread count.
pub fn render_equirect(
    scene: &SceneSpec,
    camera_origin: Vec3,
    rig: &RigConfig,
) -> Result<(Panorama, Panorama), ScenegenError> {
    rig.validate()?;
    validate_camera(scene, camera_origin)?;
    let (w, h) = (rig.width, rig.height);
    let mut rgb = vec![0.0f64; w * h * 3];
    let mut depth = vec![0.0f64; w * h];

    rgb.par_chunks_mut(w * 3)
        .zip(depth.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (rgb_row, depth_row))| {
            for x in 0..w {
                let (lon, lat) =
                    geometry::pixel_to_lonlat(x as f64 + 0.5, y as f64 + 0.5, rig).unwrap();
                let dir = [lat.cos() * lon.sin(), lat.sin(), lat.cos() * lon.cos()];
                let hit = trace(scene, camera_origin, dir);
                let color = shade(scene, camera_origin, dir, &hit);
                rgb_row[x * 3] = color[0];
                rgb_row[x * 3 + 1] = color[1];
                rgb_row[x * 3 + 2] = color[2];
                depth_row[x] = hit.t;
            }
        });

    Ok((
        Panorama::new(w, h, 3, PanoKind::Rgb, rgb).expect("sized correctly"),
        Panorama::new(w, h, 1, PanoKind::Depth, depth).expect("sized correctly"),
    ))
}

/// One stereo training sample: both views, top-camera depth, and the
/// disparity ground truth derived from it.
#[derive(Clone, Debug)]
pub struct StereoSample {
    pub top_rgb: Panorama,
    pub bottom_rgb: Panorama,
    pub top_depth: Panorama,
    pub gt_disparity: Panorama,
    pub rig: RigConfig,
}

pub fn render_stereo_sample(
    scene: &SceneSpec,
    rig: &RigConfig,
) -> Result<StereoSample, ScenegenError> {
    let bottom_origin = add(scene.rig_origin, [0.0, rig.baseline, 0.0]);
    let (top_rgb, top_depth) = render_equirect(scene, scene.rig_origin, rig)?;
    let (bottom_rgb, _) = render_equirect(scene, bottom_origin, rig)?;

    let angles = geometry::angle_matrix(rig)?;
    let mut disp = vec![0.0f64; rig.width * rig.height];
    for y in 0..rig.height {
        let cos_lat = angles.cos_lat(y);
        for x in 0..rig.width {
            let d = top_depth.at(x, y);
            if d > 0.0 {
                disp[y * rig.width + x] = geometry::depth_to_disparity(d, cos_lat, rig)?;
            }
        }
    }
    let mut gt_disparity =
        Panorama::new(rig.width, rig.height, 1, PanoKind::Disparity, disp).expect("sized");
    gt_disparity.kind = PanoKind::Disparity;

    Ok(StereoSample {
        top_rgb,
        bottom_rgb,
        top_depth,
        gt_disparity,
        rig: rig.clone(),
    })
}

/// Manifest describing a generated dataset directory.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub rig: RigConfig,
    pub count: usize,
    /// (index, per-sample seed) pairs.
    pub samples: Vec<(usize, u64)>,
    pub path: PathBuf,
}

impl DatasetManifest {
    pub fn file_names(&self, index: usize) -> (String, String, String, String) {
        manifest_file_names(index)
    }
}

/// Generate and write `count` samples plus `manifest.txt`. Byte-identical
/// across reruns for a fixed seed.
pub fn make_dataset(
    seed: u64,
    count: usize,
    rig: &RigConfig,
    params: &GenParams,
    out_dir: &Path,
) -> Result<DatasetManifest, ScenegenError> {
    if count < 1 {
        return Err(ScenegenError::EmptyDataset);
    }
    rig.validate()?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| io::IoError::file(out_dir, e))?;

    let mut samples = Vec::with_capacity(count);
    for index in 0..count {
        let sample_seed = SplitMix64::derive(seed, index as u64 + 1).next_u64();
        let scene = generate_scene(sample_seed, params)?;
        let sample = render_stereo_sample(&scene, rig)?;
        let (top, bottom, depth, disp) = manifest_file_names(index);
        io::write_ppm(&sample.top_rgb, &out_dir.join(top))?;
        io::write_ppm(&sample.bottom_rgb, &out_dir.join(bottom))?;
        io::write_pfm(&sample.top_depth, &out_dir.join(depth))?;
        io::write_pfm(&sample.gt_disparity, &out_dir.join(disp))?;
        samples.push((index, sample_seed));
    }

    let manifest_path = out_dir.join("manifest.txt");
    let mut text = String::new();
    text.push_str("# panodepth dataset\n");
    text.push_str(&format!("baseline = {}\n", rig.baseline));
    text.push_str(&format!("width = {}\n", rig.width));
    text.push_str(&format!("height = {}\n", rig.height));
    text.push_str(&format!("fov_w = {}\n", rig.fov_w));
    text.push_str(&format!("fov_h = {}\n", rig.fov_h));
    text.push_str(&format!("count = {count}\n"));
    for (index, sample_seed) in &samples {
        let (top, bottom, depth, disp) = manifest_file_names(*index);
        text.push_str(&format!(
            "sample {index:04} seed {sample_seed} {top} {bottom} {depth} {disp}\n"
        ));
    }
    std::fs::write(&manifest_path, text).map_err(|e| io::IoError::file(&manifest_path, e))?;

    Ok(DatasetManifest {
        rig: rig.clone(),
        count,
        samples,
        path: manifest_path,
    })
}

fn manifest_file_names(index: usize) -> (String, String, String, String) {
    (
        format!("{index:04}_top.ppm"),
        format!("{index:04}_bottom.ppm"),
        format!("{index:04}_depth.pfm"),
        format!("{index:04}_disp.pfm"),
    )
}

/// Parse a `manifest.txt` written by [`make_dataset`].
pub fn parse_manifest(path: &Path) -> Result<DatasetManifest, ScenegenError> {
    let text = std::fs::read_to_string(path).map_err(|e| io::IoError::file(path, e))?;
    let mut baseline = None;
    let mut width = None;
    let mut height = None;
    let mut fov_w = None;
    let mut fov_h = None;
    let mut count = None;
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| {
            ScenegenError::Io(io::IoError::Config {
                path: path.display().to_string(),
                line: i + 1,
                message: msg.to_string(),
            })
        };
        if let Some(rest) = line.strip_prefix("sample ") {
            let mut parts = rest.split_whitespace();
            let index: usize = parts
                .next()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| bad("bad sample index"))?;
            let seed: u64 = match (parts.next(), parts.next()) {
                (Some("seed"), Some(s)) => s.parse().map_err(|_| bad("bad sample seed"))?,
                _ => return Err(bad("expected 'seed <n>'")),
            };
            samples.push((index, seed));
        } else if let Some((key, value)) = line.split_once('=') {
            let value = value.trim();
            match key.trim() {
                "baseline" => baseline = Some(value.parse().map_err(|_| bad("bad baseline"))?),
                "width" => width = Some(value.parse().map_err(|_| bad("bad width"))?),
                "height" => height = Some(value.parse().map_err(|_| bad("bad height"))?),
                "fov_w" => fov_w = Some(value.parse().map_err(|_| bad("bad fov_w"))?),
                "fov_h" => fov_h = Some(value.parse().map_err(|_| bad("bad fov_h"))?),
                "count" => count = Some(value.parse().map_err(|_| bad("bad count"))?),
                other => return Err(bad(&format!("unknown manifest key {other:?}"))),
            }
        } else {
            return Err(bad("unrecognized manifest line"));
        }
    }
    let missing = |what: &str| {
        ScenegenError::Io(io::IoError::Invalid {
            path: path.display().to_string(),
            message: format!("manifest missing {what}"),
        })
    };
    let rig = RigConfig {
        baseline: baseline.ok_or_else(|| missing("baseline"))?,
        width: width.ok_or_else(|| missing("width"))?,
        height: height.ok_or_else(|| missing("height"))?,
        fov_w: fov_w.ok_or_else(|| missing("fov_w"))?,
        fov_h: fov_h.ok_or_else(|| missing("fov_h"))?,
    };
    let count = count.ok_or_else(|| missing("count"))?;
    if samples.len() != count {
        return Err(ScenegenError::Io(io::IoError::Invalid {
            path: path.display().to_string(),
            message: format!("manifest lists {} samples, count says {count}", samples.len()),
        }));
    }
    Ok(DatasetManifest {
        rig,
        count,
        samples,
        path: path.to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn empty_room_scene(half: Vec3) -> SceneSpec {
        SceneSpec {
            room_half: half,
            rig_origin: [0.0, 0.0, 0.0],
            objects: vec![],
            light: PointLight {
                position: [0.0, -half[1] * 0.6, 0.0],
                intensity: 6.0,
            },
            texture: WallTexture {
                period: 0.5,
                albedo_a: [0.3, 0.3, 0.3],
                albedo_b: [0.8, 0.8, 0.8],
            },
            seed: 0,
        }
    }

    #[test]
    fn generate_is_deterministic() {
        let params = GenParams::default();
        let a = generate_scene(1, &params).unwrap();
        let b = generate_scene(1, &params).unwrap();
        assert_eq!(a, b);
        let c = generate_scene(2, &params).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_objects_gives_empty_textured_room() {
        let params = GenParams {
            object_count: (0, 0),
            ..GenParams::default()
        };
        let scene = generate_scene(3, &params).unwrap();
        assert!(scene.objects.is_empty());
        assert!(scene.texture.period > 0.0);
    }

    #[test]
    fn oversized_object_exhausts_retries() {
        let params = GenParams {
            object_size: (50.0, 60.0),
            object_count: (1, 1),
            max_retries: 20,
            ..GenParams::default()
        };
        assert!(matches!(
            generate_scene(4, &params),
            Err(ScenegenError::RetriesExhausted(..))
        ));
    }

    #[test]
    fn generated_scenes_satisfy_invariants() {
        let params = GenParams::default();
        for seed in 0..20 {
            let scene = generate_scene(seed, &params).unwrap();
            validate_camera(&scene, scene.rig_origin).unwrap();
            validate_camera(&scene, add(scene.rig_origin, [0.0, params.baseline, 0.0])).unwrap();
            for object in &scene.objects {
                assert!(object_inside_room(object, scene.room_half));
            }
        }
    }

    #[test]
    fn empty_room_axis_depths() {
        // 4x4x4 room, camera at center: equatorial axis directions hit walls
        // at exactly 2 m.
        let scene = empty_room_scene([2.0, 2.0, 2.0]);
        for (lon, lat) in [
            (0.0f64, 0.0f64),
            (std::f64::consts::FRAC_PI_2, 0.0),
            (std::f64::consts::PI - 1e-12, 0.0),
            (-std::f64::consts::FRAC_PI_2, 0.0),
        ] {
            let dir = [lat.cos() * lon.sin(), lat.sin(), lat.cos() * lon.cos()];
            let hit = trace(&scene, scene.rig_origin, dir);
            assert_relative_eq!(hit.t, 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn empty_room_diagonal_depth() {
        // Equator, longitude 45 degrees: wall at 2/cos(45) ~ 2.828 m.
        let scene = empty_room_scene([2.0, 2.0, 2.0]);
        let lon = std::f64::consts::FRAC_PI_4;
        let dir = [lon.sin(), 0.0, lon.cos()];
        let hit = trace(&scene, scene.rig_origin, dir);
        assert_relative_eq!(hit.t, 2.0 / lon.cos(), max_relative = 1e-12);
    }

    #[test]
    fn depths_bounded_by_room_geometry() {
        let params = GenParams::default();
        let rig = RigConfig::new(0.26, 32, 16).unwrap();
        for seed in 0..5 {
            let scene = generate_scene(seed, &params).unwrap();
            let (_, depth) = render_equirect(&scene, scene.rig_origin, &rig).unwrap();
            let o = scene.rig_origin;
            let h = scene.room_half;
            let nearest_wall = (0..3)
                .map(|i| (h[i] - o[i].abs()).min(h[i] + o[i].abs()))
                .fold(f64::INFINITY, f64::min);
            let far_corner = (0..3)
                .map(|i| (h[i] + o[i].abs()).powi(2))
                .sum::<f64>()
                .sqrt();
            for &d in &depth.data {
                assert!(d >= nearest_wall - 1e-9, "{d} < {nearest_wall}");
                assert!(d <= far_corner + 1e-9, "{d} > {far_corner}");
            }
        }
    }

    #[test]
    fn stereo_sample_consistency_with_rig_geometry() {
        let params = GenParams::default();
        let scene = generate_scene(7, &params).unwrap();
        let rig = RigConfig::new(0.26, 32, 16).unwrap();
        let sample = render_stereo_sample(&scene, &rig).unwrap();
        let angles = geometry::angle_matrix(&rig).unwrap();
        for y in 0..rig.height {
            for x in 0..rig.width {
                let depth = sample.top_depth.at(x, y);
                let disp = sample.gt_disparity.at(x, y);
                let expected = rig.baseline * angles.cos_lat(y) / depth;
                assert_relative_eq!(disp, expected, max_relative = 1e-6, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_baseline_gives_identical_views() {
        let params = GenParams {
            baseline: 0.0,
            ..GenParams::default()
        };
        let scene = generate_scene(9, &params).unwrap();
        let rig = RigConfig::new(0.0, 16, 8).unwrap();
        let sample = render_stereo_sample(&scene, &rig).unwrap();
        assert_eq!(sample.top_rgb.data, sample.bottom_rgb.data);
        assert!(sample.gt_disparity.data.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn object_below_midpoint_appears_higher_in_bottom_view() {
        // A sphere below the rig: its bottom-view silhouette must sit at
        // smaller y (nearer the image top) than its top-view silhouette.
        let mut scene = empty_room_scene([3.0, 2.0, 3.0]);
        scene.objects.push(SceneObject::Sphere {
            center: [0.0, 0.8, 1.5],
            radius: 0.4,
            albedo: [1.0, 0.0, 0.0],
        });
        let rig = RigConfig::new(0.3, 64, 32).unwrap();
        let top = render_equirect(&scene, scene.rig_origin, &rig).unwrap().1;
        let bottom = render_equirect(&scene, [0.0, 0.3, 0.0], &rig).unwrap().1;
        // Find the sphere in each depth map by looking for depths well under
        // anything else visible along the lon=0 column (walls >= 3 m, floor
        // >= 1.7 m from the lowered camera; sphere surface <= 1.4 m).
        let column = |pano: &Panorama| -> Vec<usize> {
            (0..rig.height)
                .filter(|&y| pano.at(rig.width / 2, y) < 1.5)
                .collect()
        };
        let top_rows = column(&top);
        let bottom_rows = column(&bottom);
        assert!(!top_rows.is_empty() && !bottom_rows.is_empty());
        let top_center = top_rows.iter().sum::<usize>() as f64 / top_rows.len() as f64;
        let bottom_center = bottom_rows.iter().sum::<usize>() as f64 / bottom_rows.len() as f64;
        assert!(
            bottom_center < top_center,
            "bottom view center row {bottom_center} should be above top view {top_center}"
        );
    }

    #[test]
    fn make_dataset_deterministic_and_complete() {
        let dir = tempfile::tempdir().unwrap();
        let rig = RigConfig::new(0.26, 16, 8).unwrap();
        let params = GenParams::default();

        let run = |out: &Path| make_dataset(7, 2, &rig, &params, out).unwrap();
        let a = run(&dir.path().join("a"));
        let b = run(&dir.path().join("b"));
        assert_eq!(a.samples, b.samples);
        for entry in std::fs::read_dir(dir.path().join("a")).unwrap() {
            let name = entry.unwrap().file_name();
            let bytes_a = std::fs::read(dir.path().join("a").join(&name)).unwrap();
            let bytes_b = std::fs::read(dir.path().join("b").join(&name)).unwrap();
            assert_eq!(bytes_a, bytes_b, "{name:?} differs between reruns");
        }

        let manifest = parse_manifest(&a.path).unwrap();
        assert_eq!(manifest.count, 2);
        assert_eq!(manifest.samples, a.samples);
        assert_eq!(manifest.rig, rig);
    }

    #[test]
    fn make_dataset_rejects_zero_count() {
        let dir = tempfile::tempdir().unwrap();
        let rig = RigConfig::new(0.26, 16, 8).unwrap();
        assert!(matches!(
            make_dataset(7, 0, &rig, &GenParams::default(), dir.path()),
            Err(ScenegenError::EmptyDataset)
        ));
    }
}

//! Top-down 2D world: convex obstacles, first-hit raycasting, a single-beam
//! LiDAR fan, and curtain imaging with camera-visibility occlusion and
//! optional sensor noise.

use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CurtainError, Result};
use crate::geometry::{build_rays, is_feasible, CameraModel, ConstraintGraph, Point2, Ray};
use crate::planner::CurtainPlacement;

/// Axis-aligned scene bounds in the xz-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Bounds {
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.z >= self.z_min && p.z <= self.z_max
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            x_min: -40.0,
            x_max: 40.0,
            z_min: 0.0,
            z_max: 70.4,
        }
    }
}

/// Convex obstacle: counterclockwise vertex loop, strictly in front of the
/// sensor (z > 0 everywhere).
#[derive(Debug, Clone)]
pub struct Obstacle {
    pub id: String,
    vertices: Vec<Point2>,
    pub is_target: bool,
}

impl Obstacle {
    pub fn new(id: impl Into<String>, vertices: Vec<Point2>, is_target: bool) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(CurtainError::InvalidArgument(format!(
                "obstacle needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let k = vertices.len();
        for i in 0..k {
            // negated comparison so NaN coordinates also fail the guard
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(vertices[i].z > 0.0) {
                return Err(CurtainError::InvalidArgument(format!(
                    "obstacle vertex ({}, {}) must have z > 0",
                    vertices[i].x, vertices[i].z
                )));
            }
            let a = vertices[i];
            let b = vertices[(i + 1) % k];
            let c = vertices[(i + 2) % k];
            let cross = (b - a).cross(c - b);
            if cross <= 1e-12 {
                return Err(CurtainError::InvalidArgument(
                    "obstacle must be strictly convex and counterclockwise".into(),
                ));
            }
        }
        Ok(Self {
            id: id.into(),
            vertices,
            is_target,
        })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }
}

/// Immutable scene: obstacles inside a bounding rectangle.
#[derive(Debug, Clone)]
pub struct Scene {
    objects: Vec<Obstacle>,
    bounds: Bounds,
}

impl Scene {
    pub fn new(bounds: Bounds, objects: Vec<Obstacle>) -> Result<Self> {
        for obj in &objects {
            for v in obj.vertices() {
                if !bounds.contains(*v) {
                    return Err(CurtainError::InvalidArgument(format!(
                        "obstacle {} leaves the scene bounds",
                        obj.id
                    )));
                }
            }
        }
        Ok(Self { objects, bounds })
    }

    pub fn objects(&self) -> &[Obstacle] {
        &self.objects
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn to_json_string(&self) -> String {
        let file = SceneFile {
            bounds: self.bounds,
            objects: self
                .objects
                .iter()
                .map(|o| ObstacleFile {
                    id: o.id.clone(),
                    vertices: o.vertices().iter().map(|v| [v.x, v.z]).collect(),
                    is_target: o.is_target,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("scene serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: SceneFile = serde_json::from_str(s)?;
        let objects = file
            .objects
            .into_iter()
            .map(|o| {
                Obstacle::new(
                    o.id,
                    o.vertices.iter().map(|v| Point2::new(v[0], v[1])).collect(),
                    o.is_target,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Scene::new(file.bounds, objects)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    bounds: Bounds,
    objects: Vec<ObstacleFile>,
}

#[derive(Serialize, Deserialize)]
struct ObstacleFile {
    id: String,
    vertices: Vec<[f64; 2]>,
    is_target: bool,
}

/// Provenance of a sensed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointSource {
    Lidar,
    Curtain(u32),
}

impl std::fmt::Display for PointSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PointSource::Lidar => write!(f, "lidar"),
            PointSource::Curtain(k) => write!(f, "curtain{k}"),
        }
    }
}

impl FromStr for PointSource {
    type Err = CurtainError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "lidar" {
            return Ok(PointSource::Lidar);
        }
        if let Some(k) = s.strip_prefix("curtain") {
            return k
                .parse()
                .map(PointSource::Curtain)
                .map_err(|e| CurtainError::Parse(format!("bad curtain index {k:?}: {e}")));
        }
        Err(CurtainError::Parse(format!("unknown point source {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub position: Point2,
    pub ray_index: usize,
    pub source: PointSource,
}

/// Union of all points sensed so far.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn extend_from(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("x,z,ray_index,source\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.position.x, p.position.z, p.ray_index, p.source
            ));
        }
        out
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        let mut lines = s.lines();
        match lines.next() {
            Some("x,z,ray_index,source") => {}
            other => {
                return Err(CurtainError::Parse(format!(
                    "unexpected point cloud header: {other:?}"
                )))
            }
        }
        let mut points = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(CurtainError::Parse(format!("bad point row: {line}")));
            }
            points.push(CloudPoint {
                position: Point2::new(
                    fields[0]
                        .parse()
                        .map_err(|e| CurtainError::Parse(format!("bad x: {e}")))?,
                    fields[1]
                        .parse()
                        .map_err(|e| CurtainError::Parse(format!("bad z: {e}")))?,
                ),
                ray_index: fields[2]
                    .parse()
                    .map_err(|e| CurtainError::Parse(format!("bad ray index: {e}")))?,
                source: fields[3].parse()?,
            });
        }
        Ok(Self { points })
    }
}

/// Curtain input noise: independent per-return dropout plus Gaussian range
/// jitter, reproducible under `seed`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub dropout_prob: f64,
    pub range_sigma: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(dropout_prob: f64, range_sigma: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&dropout_prob) {
            return Err(CurtainError::InvalidArgument(format!(
                "dropout probability {dropout_prob} outside [0, 1]"
            )));
        }
        if !(range_sigma >= 0.0 && range_sigma.is_finite()) {
            return Err(CurtainError::InvalidArgument(format!(
                "range sigma must be non-negative, got {range_sigma}"
            )));
        }
        Ok(Self {
            dropout_prob,
            range_sigma,
            seed,
        })
    }

    /// The 10%-noise preset: one-in-ten dropout plus 0.1 m range jitter.
    pub fn standard(seed: u64) -> Self {
        Self {
            dropout_prob: 0.1,
            range_sigma: 0.1,
            seed,
        }
    }
}

/// Minimum positive range at which `ray` (from the camera origin) enters any
/// obstacle, or None when nothing is hit.
pub fn raycast_first_hit(scene: &Scene, ray: &Ray) -> Option<f64> {
    let origin = Point2::new(0.0, 0.0);
    let dir = ray.unit_dir;
    let mut best: Option<f64> = None;
    for obj in scene.objects() {
        let verts = obj.vertices();
        let k = verts.len();
        for i in 0..k {
            let a = verts[i];
            let b = verts[(i + 1) % k];
            let edge = b - a;
            let denom = dir.cross(edge);
            if denom.abs() < 1e-15 {
                continue; // parallel
            }
            let ao = a - origin;
            let t = ao.cross(edge) / denom;
            let s = ao.cross(dir) / denom;
            if t > 1e-9 && (0.0..=1.0).contains(&s) {
                best = Some(best.map_or(t, |cur: f64| cur.min(t)));
            }
        }
    }
    best
}

/// Sparse single-beam scan: cast every `stride`-th camera ray and collect
/// first hits.
pub fn lidar_scan(scene: &Scene, camera: &CameraModel, stride: usize) -> PointCloud {
    assert!(stride >= 1, "stride must be at least 1");
    let mut cloud = PointCloud::new();
    for ray in build_rays(camera).iter().step_by(stride) {
        if let Some(range) = raycast_first_hit(scene, ray) {
            cloud.points.push(CloudPoint {
                position: ray.unit_dir * range,
                ray_index: ray.index,
                source: PointSource::Lidar,
            });
        }
    }
    cloud
}

/// Image a curtain: for each ray, a return appears at the first visible
/// surface iff that surface lies within `epsilon` of the curtain's control
/// point. Optional noise drops returns and jitters ranges (never past the
/// occluding surface).
pub fn image_curtain(
    scene: &Scene,
    graph: &ConstraintGraph,
    placement: &CurtainPlacement,
    epsilon: f64,
    noise: Option<&NoiseConfig>,
    curtain_index: u32,
) -> Result<PointCloud> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(CurtainError::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !is_feasible(graph, placement)? {
        return Err(CurtainError::InvalidArgument(
            "placement violates the curtain constraint graph".into(),
        ));
    }
    let mut rng = noise.map(|n| ChaCha8Rng::seed_from_u64(n.seed));
    let mut cloud = PointCloud::new();
    for point in placement.points() {
        let dir = point.position * (1.0 / point.range);
        let ray = Ray {
            index: point.ray_index,
            azimuth: dir.x.atan2(dir.z),
            unit_dir: dir,
        };
        let Some(hit) = raycast_first_hit(scene, &ray) else {
            continue;
        };
        if (hit - point.range).abs() > epsilon {
            continue;
        }
        let mut reported = hit;
        if let (Some(cfg), Some(rng)) = (noise, rng.as_mut()) {
            if rng.gen::<f64>() < cfg.dropout_prob {
                continue;
            }
            if cfg.range_sigma > 0.0 {
                let jitter = Normal::new(0.0, cfg.range_sigma)
                    .expect("sigma validated")
                    .sample(rng);
                // jitter along the ray, clamped so the report never lands
                // beyond the occluding surface
                reported = (hit + jitter).clamp(1e-9, hit);
            }
        }
        cloud.points.push(CloudPoint {
            position: dir * reported,
            ray_index: point.ray_index,
            source: PointSource::Curtain(curtain_index),
        });
    }
    Ok(cloud)
}

/// Separating-axis test for two convex polygons, with a clearance margin:
/// returns true when the shapes come closer than `clearance` along every
/// candidate axis.
fn convex_overlap(a: &[Point2], b: &[Point2], clearance: f64) -> bool {
    let axes = |poly: &[Point2]| -> Vec<Point2> {
        let k = poly.len();
        (0..k)
            .map(|i| {
                let e = poly[(i + 1) % k] - poly[i];
                let n = Point2::new(-e.z, e.x);
                let len = n.norm();
                Point2::new(n.x / len, n.z / len)
            })
            .collect()
    };
    for axis in axes(a).into_iter().chain(axes(b)) {
        let proj = |poly: &[Point2]| -> (f64, f64) {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for p in poly {
                let d = p.dot(axis);
                lo = lo.min(d);
                hi = hi.max(d);
            }
            (lo, hi)
        };
        let (a_lo, a_hi) = proj(a);
        let (b_lo, b_hi) = proj(b);
        if a_hi + clearance <= b_lo || b_hi + clearance <= a_lo {
            return false;
        }
    }
    true
}

/// Deterministic random scene: rotated rectangles for targets (car-sized),
/// convex blobs for clutter, pairwise disjoint with a clearance margin.
pub fn generate_scene(
    seed: u64,
    n_targets: usize,
    n_clutter: usize,
    bounds: Bounds,
) -> Result<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placed: Vec<Vec<Point2>> = Vec::new();
    let mut objects = Vec::new();
    const CLEARANCE: f64 = 0.8;
    const MAX_TRIES: usize = 400;

    let margin_x = 4.0;
    let z_lo = (bounds.z_min + 4.0).max(2.0);
    let z_hi = bounds.z_max - 6.0;

    let place = |rng: &mut ChaCha8Rng,
                 placed: &mut Vec<Vec<Point2>>,
                 make: &mut dyn FnMut(&mut ChaCha8Rng) -> Vec<Point2>|
     -> Result<Vec<Point2>> {
        for _ in 0..MAX_TRIES {
            let verts = make(rng);
            if !verts.iter().all(|v| {
                v.x > bounds.x_min + 0.5
                    && v.x < bounds.x_max - 0.5
                    && v.z > 0.2
                    && v.z < bounds.z_max - 0.5
            }) {
                continue;
            }
            if placed
                .iter()
                .any(|other| convex_overlap(&verts, other, CLEARANCE))
            {
                continue;
            }
            placed.push(verts.clone());
            return Ok(verts);
        }
        Err(CurtainError::SceneGeneration(format!(
            "could not place an object without overlap after {MAX_TRIES} tries"
        )))
    };

    for k in 0..n_targets {
        let verts = place(&mut rng, &mut placed, &mut |rng| {
            let cx = rng.gen_range(bounds.x_min + margin_x..bounds.x_max - margin_x);
            let cz = rng.gen_range(z_lo..z_hi);
            let half_w = rng.gen_range(0.8..1.1);
            let half_l = rng.gen_range(1.9..2.5);
            let yaw: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let (s, c) = yaw.sin_cos();
            [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
                .iter()
                .map(|&(sx, sz)| {
                    let lx = sx * half_w;
                    let lz = sz * half_l;
                    Point2::new(cx + c * lx - s * lz, cz + s * lx + c * lz)
                })
                .collect()
        })?;
        objects.push(Obstacle::new(format!("target_{k}"), verts, true)?);
    }

    for k in 0..n_clutter {
        let verts = place(&mut rng, &mut placed, &mut |rng| {
            let cx = rng.gen_range(bounds.x_min + margin_x..bounds.x_max - margin_x);
            let cz = rng.gen_range(z_lo..z_hi);
            let a = rng.gen_range(0.5..1.6);
            let b = rng.gen_range(0.5..1.6);
            let yaw: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let (s, c) = yaw.sin_cos();
            let sides = rng.gen_range(3..=6);
            // points on an ellipse in increasing parameter order are convex
            // and counterclockwise; keep a minimum angular gap
            let mut angles: Vec<f64> = (0..sides)
                .map(|i| {
                    i as f64 / sides as f64 * std::f64::consts::TAU
                        + rng.gen_range(0.0..0.6 * std::f64::consts::TAU / sides as f64)
                })
                .collect();
            angles.sort_by(|x, y| x.partial_cmp(y).unwrap());
            angles
                .iter()
                .map(|&phi| {
                    let ex = a * phi.cos();
                    let ez = b * phi.sin();
                    Point2::new(cx + c * ex - s * ez, cz + s * ex + c * ez)
                })
                .collect()
        })?;
        objects.push(Obstacle::new(format!("clutter_{k}"), verts, false)?);
    }

    Scene::new(bounds, objects)
}

//! Camera rays, laser geometry, candidate lattices, and the feasibility
//! graph induced by the galvanometer's maximum angular velocity.
//!
//! Everything lives in the xz-plane (top-down view): `z` is depth pointing
//! forward from the camera, `x` is lateral offset. The camera sits at the
//! origin; a rolling-shutter column `t` corresponds to a planar ray whose
//! azimuth is measured from the +z axis, positive toward +x. A curtain is a
//! choice of one control point per ray; consecutive control points must keep
//! the laser's angular step below `delta_theta_max`.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{CurtainError, Result};
use crate::planner::CurtainPlacement;

/// Point (or vector) in the xz-plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub z: f64,
}

impl Point2 {
    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.z)
    }

    /// 2D cross product (signed parallelogram area).
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.z - self.z * other.x
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.z * other.z
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.z - rhs.z)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.z + rhs.z)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.z * s)
    }
}

/// Rolling-shutter camera: `num_rays` pixel columns spread symmetrically
/// over `fov_deg` about the +z axis, origin fixed at (0, 0).
#[derive(Debug, Clone, Copy)]
pub struct CameraModel {
    num_rays: usize,
    fov_deg: f64,
}

impl CameraModel {
    pub fn new(num_rays: usize, fov_deg: f64) -> Result<Self> {
        if num_rays < 2 {
            return Err(CurtainError::InvalidArgument(format!(
                "camera needs at least 2 rays, got {num_rays}"
            )));
        }
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(CurtainError::InvalidArgument(format!(
                "fov must lie in (0, 180) degrees, got {fov_deg}"
            )));
        }
        Ok(Self { num_rays, fov_deg })
    }

    pub fn num_rays(&self) -> usize {
        self.num_rays
    }

    pub fn fov_deg(&self) -> f64 {
        self.fov_deg
    }

    pub fn origin(&self) -> Point2 {
        Point2::new(0.0, 0.0)
    }
}

/// Laser/galvanometer model. `delta_theta_max = omega_max * delta_t` holds
/// exactly by construction.
#[derive(Debug, Clone, Copy)]
pub struct LaserModel {
    position: Point2,
    omega_max: f64,
    delta_t: f64,
    delta_theta_max: f64,
}

impl LaserModel {
    /// Build from the physical pair: maximum angular velocity (rad/s) and
    /// the inter-column activation interval (s).
    pub fn from_velocity(position: Point2, omega_max: f64, delta_t: f64) -> Result<Self> {
        if !(omega_max > 0.0 && omega_max.is_finite()) {
            return Err(CurtainError::InvalidArgument(format!(
                "omega_max must be positive, got {omega_max}"
            )));
        }
        if !(delta_t > 0.0 && delta_t.is_finite()) {
            return Err(CurtainError::InvalidArgument(format!(
                "delta_t must be positive, got {delta_t}"
            )));
        }
        Ok(Self {
            position,
            omega_max,
            delta_t,
            delta_theta_max: omega_max * delta_t,
        })
    }

    /// Build directly from the per-column angular step (rad). `delta_t` is
    /// taken as 1 s so the product identity holds exactly.
    pub fn from_angle_step(position: Point2, delta_theta_max: f64) -> Result<Self> {
        Self::from_velocity(position, delta_theta_max, 1.0)
    }

    pub fn position(&self) -> Point2 {
        self.position
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn delta_t(&self) -> f64 {
        self.delta_t
    }

    pub fn delta_theta_max(&self) -> f64 {
        self.delta_theta_max
    }
}

/// One camera ray: azimuth from the +z axis (positive toward +x).
#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub index: usize,
    pub azimuth: f64,
    pub unit_dir: Point2,
}

/// Build the camera's rays, azimuths equally spaced over
/// [-fov/2, +fov/2], ordered left to right.
pub fn build_rays(camera: &CameraModel) -> Vec<Ray> {
    let t_count = camera.num_rays();
    let fov = camera.fov_deg().to_radians();
    let step = fov / (t_count - 1) as f64;
    (0..t_count)
        .map(|t| {
            let azimuth = -0.5 * fov + t as f64 * step;
            Ray {
                index: t,
                azimuth,
                unit_dir: Point2::new(azimuth.sin(), azimuth.cos()),
            }
        })
        .collect()
}

/// Azimuth of `p` as seen from the laser, measured from the +z axis.
/// This is the galvanometer angle the laser must take to illuminate `p`.
pub fn laser_angle(laser: &LaserModel, p: Point2) -> Result<f64> {
    let v = p - laser.position();
    // negated comparison so NaN coordinates also fail the guard
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(v.z > 0.0) {
        return Err(CurtainError::Domain(format!(
            "point ({}, {}) is not in front of the laser at ({}, {})",
            p.x, p.z, laser.position.x, laser.position.z
        )));
    }
    Ok(v.x.atan2(v.z))
}

/// Candidate curtain intersection on a camera ray: position, range along
/// the ray, and the laser angle needed to reach it (cached).
#[derive(Debug, Clone, Copy)]
pub struct ControlPoint {
    pub ray_index: usize,
    pub range: f64,
    pub position: Point2,
    pub laser_angle: f64,
}

/// Per-ray candidate control points: `points_per_ray` ranges equally spaced
/// in Euclidean distance between `r_min` and `r_max` on every ray.
#[derive(Debug, Clone)]
pub struct CandidateLattice {
    points_per_ray: usize,
    r_min: f64,
    r_max: f64,
    candidates: Vec<Vec<ControlPoint>>,
}

impl CandidateLattice {
    pub fn num_rays(&self) -> usize {
        self.candidates.len()
    }

    pub fn points_per_ray(&self) -> usize {
        self.points_per_ray
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn candidate(&self, ray: usize, index: usize) -> &ControlPoint {
        &self.candidates[ray][index]
    }

    pub fn ray_candidates(&self, ray: usize) -> &[ControlPoint] {
        &self.candidates[ray]
    }
}

/// Discretize each ray into `n` equally spaced candidate ranges and cache
/// each candidate's laser angle.
pub fn build_lattice(
    camera: &CameraModel,
    laser: &LaserModel,
    n: usize,
    r_min: f64,
    r_max: f64,
) -> Result<CandidateLattice> {
    if n < 2 {
        return Err(CurtainError::InvalidArgument(format!(
            "lattice needs at least 2 points per ray, got {n}"
        )));
    }
    if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
        return Err(CurtainError::InvalidArgument(format!(
            "range bounds must satisfy 0 < r_min < r_max, got [{r_min}, {r_max}]"
        )));
    }
    let step = (r_max - r_min) / (n - 1) as f64;
    let mut candidates = Vec::with_capacity(camera.num_rays());
    for ray in build_rays(camera) {
        let mut points = Vec::with_capacity(n);
        for k in 0..n {
            let range = r_min + k as f64 * step;
            let position = ray.unit_dir * range;
            let angle = laser_angle(laser, position).map_err(|_| {
                CurtainError::InvalidArgument(format!(
                    "lattice candidate at range {range} on ray {} lies behind the laser",
                    ray.index
                ))
            })?;
            points.push(ControlPoint {
                ray_index: ray.index,
                range,
                position,
                laser_angle: angle,
            });
        }
        candidates.push(points);
    }
    Ok(CandidateLattice {
        points_per_ray: n,
        r_min,
        r_max,
        candidates,
    })
}

/// Feasibility graph over the candidate lattice. A node is a candidate
/// control point; nodes on consecutive rays are connected when the laser
/// angle change stays within `delta_theta_max`.
///
/// Along a ray the laser angle is monotone in range, so each node's feasible
/// successors form a contiguous index interval; the graph stores those
/// intervals instead of explicit edge lists.
#[derive(Debug, Clone)]
pub struct ConstraintGraph {
    lattice: CandidateLattice,
    delta_theta_max: f64,
    /// Successor interval [lo, hi) on ray t+1 for node (t, i), flat-indexed
    /// t * points_per_ray + i, for t in 0..num_rays-1.
    successors: Vec<(u32, u32)>,
    avg_degree: f64,
}

impl ConstraintGraph {
    pub fn lattice(&self) -> &CandidateLattice {
        &self.lattice
    }

    pub fn delta_theta_max(&self) -> f64 {
        self.delta_theta_max
    }

    /// Mean number of outgoing edges per node over rays 0..T-1.
    pub fn avg_degree(&self) -> f64 {
        self.avg_degree
    }

    /// Successor candidate interval [lo, hi) on ray `ray + 1`.
    pub fn successor_range(&self, ray: usize, index: usize) -> (usize, usize) {
        let n = self.lattice.points_per_ray();
        debug_assert!(ray + 1 < self.lattice.num_rays());
        let (lo, hi) = self.successors[ray * n + index];
        (lo as usize, hi as usize)
    }

    pub fn is_edge(&self, ray: usize, from: usize, to: usize) -> bool {
        let (lo, hi) = self.successor_range(ray, from);
        lo <= to && to < hi
    }

    pub fn edge_count(&self) -> usize {
        self.successors
            .iter()
            .map(|&(lo, hi)| (hi - lo) as usize)
            .sum()
    }
}

/// Precompute the feasibility graph. Deterministic, and reusable across
/// planning calls: it depends only on the lattice and the laser.
pub fn build_constraint_graph(lattice: CandidateLattice, laser: &LaserModel) -> ConstraintGraph {
    let t_count = lattice.num_rays();
    let n = lattice.points_per_ray();
    let dmax = laser.delta_theta_max();
    let mut successors = Vec::with_capacity(t_count.saturating_sub(1) * n);
    let mut total_edges = 0usize;
    for t in 0..t_count.saturating_sub(1) {
        let cur = lattice.ray_candidates(t);
        let next = lattice.ray_candidates(t + 1);
        for point in cur.iter() {
            let mut lo = n;
            let mut hi = 0usize;
            let mut count = 0usize;
            for (j, succ) in next.iter().enumerate() {
                if (succ.laser_angle - point.laser_angle).abs() <= dmax {
                    lo = lo.min(j);
                    hi = hi.max(j + 1);
                    count += 1;
                }
            }
            if count == 0 {
                successors.push((0, 0));
            } else {
                // contiguity follows from angle monotonicity along the ray
                debug_assert_eq!(hi - lo, count);
                successors.push((lo as u32, hi as u32));
                total_edges += count;
            }
        }
    }
    let node_count = t_count.saturating_sub(1) * n;
    let avg_degree = if node_count > 0 {
        total_edges as f64 / node_count as f64
    } else {
        0.0
    };
    ConstraintGraph {
        lattice,
        delta_theta_max: dmax,
        successors,
        avg_degree,
    }
}

/// True iff every consecutive pair of the placement is an edge of the graph.
/// The placement must be drawn from the graph's lattice.
pub fn is_feasible(graph: &ConstraintGraph, placement: &CurtainPlacement) -> Result<bool> {
    let lattice = graph.lattice();
    let t_count = lattice.num_rays();
    let n = lattice.points_per_ray();
    if placement.len() != t_count {
        return Err(CurtainError::InvalidArgument(format!(
            "placement has {} points but the lattice has {} rays",
            placement.len(),
            t_count
        )));
    }
    let indices = placement.candidate_indices();
    for (t, (&idx, point)) in indices.iter().zip(placement.points()).enumerate() {
        if idx >= n {
            return Err(CurtainError::InvalidArgument(format!(
                "candidate index {idx} on ray {t} out of range (N = {n})"
            )));
        }
        if point.ray_index != t {
            return Err(CurtainError::InvalidArgument(format!(
                "placement point {t} carries ray index {}",
                point.ray_index
            )));
        }
        if (point.range - lattice.candidate(t, idx).range).abs() > 1e-9 {
            return Err(CurtainError::InvalidArgument(format!(
                "placement point {t} does not match its lattice candidate"
            )));
        }
    }
    for t in 0..t_count - 1 {
        if !graph.is_edge(t, indices[t], indices[t + 1]) {
            return Ok(false);
        }
    }
    Ok(true)
}

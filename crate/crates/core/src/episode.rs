//! The closed sense-plan-update loop: a single-beam LiDAR bootstrap followed
//! by K planned curtains, with the occupancy belief refreshed after every
//! sensing step and all points accumulated into one unified cloud.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{covered_cells, OccupancyBelief, SensingReport};
use crate::config::Rig;
use crate::error::{CurtainError, Result};
use crate::geometry::Point2;
use crate::planner::{objective, CurtainPlacement, PlanContext, Strategy};
use crate::sim::{image_curtain, lidar_scan, NoiseConfig, PointCloud, Scene};
use crate::uncertainty::{entropy_map, GridSpec};

/// Episode parameters. The sensor rig is passed separately so its constraint
/// graph is built once and shared across runs.
#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    /// Curtains per episode (K).
    pub k_max: usize,
    pub strategy: Strategy,
    pub noise: Option<NoiseConfig>,
    pub seed: u64,
    pub grid: GridSpec,
    pub prior_p: f64,
    /// Curtain hit tolerance, meters.
    pub curtain_epsilon: f64,
    pub lidar_stride: usize,
    /// Likelihoods for the softened belief update used when noise is on.
    pub hit_likelihood: f64,
    pub miss_likelihood: f64,
    /// z-range for the random frontoparallel baseline; defaults to the
    /// depths every ray can reach.
    pub random_z: Option<(f64, f64)>,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            k_max: 3,
            strategy: Strategy::Dp,
            noise: None,
            seed: 0,
            grid: GridSpec::default(),
            prior_p: 0.3,
            curtain_epsilon: 0.3,
            lidar_stride: 4,
            hit_likelihood: 0.9,
            miss_likelihood: 0.1,
            random_z: None,
        }
    }
}

/// Exported control point: one row of the placement export format.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlacementPoint {
    pub ray_index: usize,
    pub range_m: f64,
    pub x: f64,
    pub z: f64,
    pub laser_angle_rad: f64,
}

/// Placement plus its score, as stored in episode logs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlacementRecord {
    pub points: Vec<PlacementPoint>,
    pub total_entropy: f64,
    pub smoothness_penalty: f64,
}

impl PlacementRecord {
    pub fn from_placement(placement: &CurtainPlacement, total: f64, smooth: f64) -> Self {
        Self {
            points: placement
                .points()
                .iter()
                .map(|p| PlacementPoint {
                    ray_index: p.ray_index,
                    range_m: p.range,
                    x: p.position.x,
                    z: p.position.z,
                    laser_angle_rad: p.laser_angle,
                })
                .collect(),
            total_entropy: total,
            smoothness_penalty: smooth,
        }
    }
}

/// One sensing step: k = 0 is the LiDAR bootstrap, k >= 1 are curtains.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpisodeStep {
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub placement: Option<PlacementRecord>,
    pub points_added: usize,
    /// Belief entropy after this step's update, bits.
    pub entropy_bits: f64,
    /// Planner objective of this step's placement (0 for the LiDAR step).
    pub objective_bits: f64,
    pub smoothness_penalty: f64,
    /// Wall-clock planning time, seconds (0 for the LiDAR step).
    pub plan_time_s: f64,
    /// Wall-clock time of the whole step including sensing and the belief
    /// update, seconds.
    pub step_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpisodeLog {
    pub strategy: String,
    pub seed: u64,
    pub steps: Vec<EpisodeStep>,
}

impl EpisodeLog {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("log serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Plot-ready CSV: one row per step.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("k,entropy_bits,objective_bits,points_added,plan_time_s\n");
        for s in &self.steps {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.k, s.entropy_bits, s.objective_bits, s.points_added, s.plan_time_s
            ));
        }
        out
    }

    /// Parse the CSV form back (placements and step times are not part of
    /// the CSV schema and come back empty).
    pub fn from_csv_str(s: &str) -> Result<Self> {
        let mut lines = s.lines();
        match lines.next() {
            Some("k,entropy_bits,objective_bits,points_added,plan_time_s") => {}
            other => {
                return Err(CurtainError::Parse(format!(
                    "unexpected episode log header: {other:?}"
                )))
            }
        }
        let mut steps = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(CurtainError::Parse(format!("bad log row: {line}")));
            }
            let parse_f = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|e| CurtainError::Parse(format!("bad number {s:?}: {e}")))
            };
            steps.push(EpisodeStep {
                k: fields[0]
                    .parse()
                    .map_err(|e| CurtainError::Parse(format!("bad k: {e}")))?,
                placement: None,
                points_added: fields[3]
                    .parse()
                    .map_err(|e| CurtainError::Parse(format!("bad points_added: {e}")))?,
                entropy_bits: parse_f(fields[1])?,
                objective_bits: parse_f(fields[2])?,
                smoothness_penalty: 0.0,
                plan_time_s: parse_f(fields[4])?,
                step_time_s: 0.0,
            });
        }
        Ok(Self {
            strategy: String::new(),
            seed: 0,
            steps,
        })
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// splitmix64-style stream derivation so every stochastic consumer in an
/// episode gets an independent, reproducible seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Run the configured loop: LiDAR bootstrap, then `k_max` curtains.
pub fn run_episode(scene: &Scene, rig: &Rig, cfg: &EpisodeConfig) -> Result<EpisodeLog> {
    run_with_cloud(scene, rig, cfg, cfg.k_max).map(|(log, _)| log)
}

/// Run for `k_test` curtains regardless of the configured K; used to check
/// that improvement continues past the configured horizon.
pub fn run_generalization(
    scene: &Scene,
    rig: &Rig,
    cfg: &EpisodeConfig,
    k_test: usize,
) -> Result<EpisodeLog> {
    run_with_cloud(scene, rig, cfg, k_test).map(|(log, _)| log)
}

/// Draw k uniformly from {0..K} and return the unified cloud after k
/// curtains; the sampling scheme for online training data. The drawn k is
/// returned with the cloud so training code can log what it trained on.
pub fn generate_training_sample<R: Rng>(
    scene: &Scene,
    rig: &Rig,
    cfg: &EpisodeConfig,
    rng: &mut R,
) -> Result<(usize, PointCloud)> {
    let k = rng.gen_range(0..=cfg.k_max);
    run_with_cloud(scene, rig, cfg, k).map(|(_, cloud)| (k, cloud))
}

/// The engine behind all episode entry points: runs `curtains` sensing steps
/// after the LiDAR bootstrap and returns both the log and the unified cloud.
pub fn run_with_cloud(
    scene: &Scene,
    rig: &Rig,
    cfg: &EpisodeConfig,
    curtains: usize,
) -> Result<(EpisodeLog, PointCloud)> {
    if cfg.lidar_stride == 0 {
        return Err(CurtainError::InvalidArgument(
            "lidar stride must be >= 1".into(),
        ));
    }
    let mut belief = OccupancyBelief::new(cfg.grid, cfg.prior_p)?;
    let mut steps = Vec::with_capacity(curtains + 1);

    let t_step = Instant::now();
    let lidar = lidar_scan(scene, &rig.camera, cfg.lidar_stride);
    let report = lidar_report(&cfg.grid, rig, cfg.lidar_stride, &lidar);
    belief = belief.ideal_update(&report);
    steps.push(EpisodeStep {
        k: 0,
        placement: None,
        points_added: lidar.len(),
        entropy_bits: belief.total_entropy(),
        objective_bits: 0.0,
        smoothness_penalty: 0.0,
        plan_time_s: 0.0,
        step_time_s: t_step.elapsed().as_secs_f64(),
    });
    let mut unified = lidar;

    let random_z = cfg.random_z.unwrap_or_else(|| rig.default_random_z());
    for k in 1..=curtains {
        let t_step = Instant::now();
        let map = entropy_map(&belief.confidence_grid());

        let t_plan = Instant::now();
        let ctx = PlanContext {
            seed: derive_seed(cfg.seed, k as u64),
            random_z,
        };
        let placement = cfg
            .strategy
            .plan(&rig.graph, &map, &ctx)
            .map_err(|e| e.at_step(k))?;
        let plan_time_s = t_plan.elapsed().as_secs_f64();

        let score = objective(&placement, &map);
        let step_noise = cfg.noise.map(|n| NoiseConfig {
            seed: derive_seed(n.seed, k as u64),
            ..n
        });
        let returns = image_curtain(
            scene,
            &rig.graph,
            &placement,
            cfg.curtain_epsilon,
            step_noise.as_ref(),
            k as u32,
        )
        .map_err(|e| e.at_step(k))?;

        let report = curtain_report(&cfg.grid, &placement, &returns);
        belief = if cfg.noise.is_some() {
            belief
                .noisy_update(&report, cfg.hit_likelihood, cfg.miss_likelihood)
                .map_err(|e| e.at_step(k))?
        } else {
            belief.ideal_update(&report)
        };

        steps.push(EpisodeStep {
            k,
            placement: Some(PlacementRecord::from_placement(
                &placement,
                score.total_entropy,
                score.smoothness_penalty,
            )),
            points_added: returns.len(),
            entropy_bits: belief.total_entropy(),
            objective_bits: score.total_entropy,
            smoothness_penalty: score.smoothness_penalty,
            plan_time_s,
            step_time_s: t_step.elapsed().as_secs_f64(),
        });
        unified.extend_from(&returns);
    }

    Ok((
        EpisodeLog {
            strategy: cfg.strategy.to_string(),
            seed: cfg.seed,
            steps,
        },
        unified,
    ))
}

/// Belief report for a LiDAR scan: each sampled ray's hit cell (if any) plus
/// free-space carving — every cell whose center lies within half a cell of
/// the ray segment up to the hit (or up to the grid exit when nothing was
/// hit) is marked covered-without-return.
pub fn lidar_report(
    grid: &GridSpec,
    rig: &Rig,
    stride: usize,
    cloud: &PointCloud,
) -> SensingReport {
    let mut hit_range: Vec<Option<f64>> = vec![None; rig.camera.num_rays()];
    for p in &cloud.points {
        hit_range[p.ray_index] = Some(p.position.norm());
    }
    let mut covered = BTreeSet::new();
    let mut hits = BTreeSet::new();
    let radius = 0.5 * grid.dx().min(grid.dz());
    for ray in rig.rays.iter().step_by(stride) {
        let end = match hit_range[ray.index] {
            Some(r) => ray.unit_dir * r,
            None => match grid_exit(grid, ray.unit_dir) {
                Some(p) => p,
                None => continue,
            },
        };
        for cell in cells_near_segment(grid, Point2::new(0.0, 0.0), end, radius) {
            covered.insert(cell);
        }
        if let Some(r) = hit_range[ray.index] {
            if let Some((ix, iz)) = grid.nearest_cell(ray.unit_dir * r) {
                let cell = grid.flat(ix, iz);
                covered.insert(cell);
                hits.insert(cell);
            }
        }
    }
    SensingReport::new(covered, hits).expect("hits inserted into covered")
}

/// Belief report for a curtain: each control point covers its nearest cell;
/// the cell counts as hit when that ray produced a return.
pub fn curtain_report(
    grid: &GridSpec,
    placement: &CurtainPlacement,
    returns: &PointCloud,
) -> SensingReport {
    let mut returned = vec![false; placement.len()];
    for p in &returns.points {
        returned[p.ray_index] = true;
    }
    let covered = covered_cells(grid, placement);
    let mut hits = BTreeSet::new();
    for (slot, point) in returned.iter().zip(placement.points()) {
        if !slot {
            continue;
        }
        if let Some((ix, iz)) = grid.nearest_cell(point.position) {
            hits.insert(grid.flat(ix, iz));
        }
    }
    SensingReport::new(covered, hits).expect("hit cells come from covered points")
}

/// Farthest point along `dir` from the origin that still lies inside the
/// grid extent, or None when the ray never enters it.
fn grid_exit(grid: &GridSpec, dir: Point2) -> Option<Point2> {
    let mut t_enter = 0.0f64;
    let mut t_exit = f64::INFINITY;
    for (o, d, lo, hi) in [
        (0.0, dir.x, grid.x_min, grid.x_max),
        (0.0, dir.z, grid.z_min, grid.z_max),
    ] {
        if d.abs() < 1e-15 {
            if o < lo || o > hi {
                return None;
            }
            continue;
        }
        let (a, b) = ((lo - o) / d, (hi - o) / d);
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        t_enter = t_enter.max(a);
        t_exit = t_exit.min(b);
    }
    if t_exit <= t_enter {
        return None;
    }
    Some(dir * t_exit)
}

/// Flat indices of cells whose center lies within `radius` of segment ab.
fn cells_near_segment(grid: &GridSpec, a: Point2, b: Point2, radius: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let dz = grid.dz();
    let dx = grid.dx();
    let seg = b - a;
    let seg_len2 = seg.dot(seg);
    let z_lo = a.z.min(b.z) - radius;
    let z_hi = a.z.max(b.z) + radius;
    let iz_lo = (((z_lo - grid.z_min) / dz - 0.5).floor().max(0.0)) as usize;
    let iz_hi = (((z_hi - grid.z_min) / dz - 0.5).ceil().max(0.0) as usize).min(grid.nz - 1);
    for iz in iz_lo..=iz_hi {
        let zc = grid.z_min + (iz as f64 + 0.5) * dz;
        // x-extent of the segment within this row's z-slab, padded by radius
        let (x_lo, x_hi) = if seg.z.abs() < 1e-12 {
            (a.x.min(b.x), a.x.max(b.x))
        } else {
            let s0 = (((zc - radius) - a.z) / seg.z).clamp(0.0, 1.0);
            let s1 = (((zc + radius) - a.z) / seg.z).clamp(0.0, 1.0);
            let xa = a.x + s0 * seg.x;
            let xb = a.x + s1 * seg.x;
            (xa.min(xb), xa.max(xb))
        };
        let ix_lo = ((((x_lo - radius) - grid.x_min) / dx - 0.5).floor().max(0.0)) as usize;
        let ix_hi = (((((x_hi + radius) - grid.x_min) / dx - 0.5).ceil()).max(0.0) as usize)
            .min(grid.nx - 1);
        for ix in ix_lo..=ix_hi {
            let c = grid.cell_center(ix, iz);
            let to_c = c - a;
            let s = if seg_len2 > 0.0 {
                (to_c.dot(seg) / seg_len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let closest = a + seg * s;
            if (c - closest).norm() <= radius {
                out.push(grid.flat(ix, iz));
            }
        }
    }
    out
}

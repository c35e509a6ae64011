//! Sensor rig configuration files and the assembled runtime rig.

use serde::{Deserialize, Serialize};

use crate::error::{CurtainError, Result};
use crate::geometry::{
    build_constraint_graph, build_lattice, build_rays, CameraModel, ConstraintGraph, LaserModel,
    Point2, Ray,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraConfig {
    pub num_rays: usize,
    pub fov_deg: f64,
}

/// Laser placement and speed limit. Exactly one of `delta_theta_max_deg` or
/// the (`omega_max_deg_s`, `delta_t_us`) pair must be given.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaserConfig {
    pub x: f64,
    pub z: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_theta_max_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_max_deg_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_t_us: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub n: usize,
    pub r_min: f64,
    pub r_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorConfig {
    pub camera: CameraConfig,
    pub laser: LaserConfig,
    pub lattice: LatticeConfig,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            camera: CameraConfig {
                num_rays: 128,
                fov_deg: 80.0,
            },
            laser: LaserConfig {
                x: 0.2,
                z: 0.0,
                delta_theta_max_deg: Some(1.5),
                omega_max_deg_s: None,
                delta_t_us: None,
            },
            lattice: LatticeConfig {
                n: 80,
                r_min: 1.0,
                r_max: 70.4,
            },
        }
    }
}

impl SensorConfig {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn build_laser(&self) -> Result<LaserModel> {
        let pos = Point2::new(self.laser.x, self.laser.z);
        match (
            self.laser.delta_theta_max_deg,
            self.laser.omega_max_deg_s,
            self.laser.delta_t_us,
        ) {
            (Some(step), None, None) => LaserModel::from_angle_step(pos, step.to_radians()),
            (None, Some(omega), Some(dt_us)) => {
                LaserModel::from_velocity(pos, omega.to_radians(), dt_us * 1e-6)
            }
            _ => Err(CurtainError::InvalidArgument(
                "laser config needs either delta_theta_max_deg or both omega_max_deg_s and \
                 delta_t_us"
                    .into(),
            )),
        }
    }
}

/// Assembled sensor rig: camera, laser, rays, and the constraint graph,
/// built once and shared read-only by planners and the simulator.
#[derive(Debug, Clone)]
pub struct Rig {
    pub camera: CameraModel,
    pub laser: LaserModel,
    pub rays: Vec<Ray>,
    pub graph: ConstraintGraph,
}

impl Rig {
    pub fn from_config(cfg: &SensorConfig) -> Result<Self> {
        let camera = CameraModel::new(cfg.camera.num_rays, cfg.camera.fov_deg)?;
        let laser = cfg.build_laser()?;
        let lattice = build_lattice(
            &camera,
            &laser,
            cfg.lattice.n,
            cfg.lattice.r_min,
            cfg.lattice.r_max,
        )?;
        let graph = build_constraint_graph(lattice, &laser);
        let rays = build_rays(&camera);
        Ok(Self {
            camera,
            laser,
            rays,
            graph,
        })
    }

    pub fn lattice(&self) -> &crate::geometry::CandidateLattice {
        self.graph.lattice()
    }

    /// Default z-range for the random frontoparallel baseline: depths every
    /// ray can reach, restricted so nearest-z snapping stays feasible.
    ///
    /// A frontoparallel curtain at depth z changes the laser angle between
    /// consecutive rays by at most sec^2(fov/2) * az_step from the azimuth
    /// sweep plus |laser.x| * (range_step + r_max * az_step) / z^2 from
    /// range quantization; the lower z bound keeps the sum within the
    /// galvanometer limit.
    pub fn default_random_z(&self) -> (f64, f64) {
        let lattice = self.lattice();
        let half_fov = (self.camera.fov_deg() / 2.0).to_radians();
        let az_step = self.camera.fov_deg().to_radians() / (self.camera.num_rays() - 1) as f64;
        let range_step =
            (lattice.r_max() - lattice.r_min()) / (lattice.points_per_ray() - 1) as f64;
        let sweep = az_step / (half_fov.cos() * half_fov.cos());
        let slack = self.laser.delta_theta_max() - sweep;
        let z_hi = lattice.r_max() * half_fov.cos();
        let quant = self.laser.position().x.abs() * (range_step + lattice.r_max() * az_step);
        let z_lo = if slack > 0.0 && quant > 0.0 {
            (quant / slack).sqrt().clamp(lattice.r_min(), z_hi)
        } else {
            lattice.r_min()
        };
        (z_lo, z_hi)
    }
}

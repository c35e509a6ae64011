//! Uncertainty-guided placement of programmable light curtains.
//!
//! A light curtain is a controllable depth sensor that images one vertical
//! ruled surface per sweep; in the top-down plane that surface is a polyline
//! with one control point per camera ray, and the galvanometer bounds how
//! fast the laser angle may change between consecutive rays. This crate
//! provides:
//!
//! - [`geometry`]: rays, candidate lattices, and the constraint graph that
//!   encodes the angular-velocity bound,
//! - [`uncertainty`]: binary-entropy maps over the anchor grid with
//!   nearest-neighbor lookups,
//! - [`planner`]: the exact dynamic-programming placement optimizer, a
//!   brute-force oracle, and the baseline strategies,
//! - [`sim`]: a 2D top-down scene with first-hit raycasting, a single-beam
//!   LiDAR, and curtain imaging with optional noise,
//! - [`belief`]: the Bayesian occupancy belief that stands in for a
//!   detector as the source of uncertainty,
//! - [`episode`]: the closed sense-plan-update loop,
//! - [`config`]: sensor rig configuration files.

pub mod belief;
pub mod config;
pub mod episode;
pub mod error;
pub mod geometry;
pub mod planner;
pub mod sim;
pub mod uncertainty;

pub use error::{CurtainError, Result};

use thiserror::Error;

/// Errors produced by the planning, sensing, and episode machinery.
#[derive(Debug, Error)]
pub enum CurtainError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// No full left-to-right path exists in the constraint graph.
    #[error("no feasible curtain: ray {first_blocked_ray} is unreachable from ray 0")]
    NoFeasiblePath { first_blocked_ray: usize },

    /// Greedy planning reached a node with no outgoing edges.
    #[error("greedy planner dead end at ray {ray}, candidate {candidate}")]
    DeadEnd { ray: usize, candidate: usize },

    #[error(
        "instance too large for exhaustive search: N^T = {total_paths:.3e} exceeds {limit:.1e}"
    )]
    InstanceTooLarge { total_paths: f64, limit: f64 },

    #[error("scene generation failed: {0}")]
    SceneGeneration(String),

    /// Wraps an error with the episode step it occurred at.
    #[error("episode step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<CurtainError>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl CurtainError {
    pub(crate) fn at_step(self, step: usize) -> Self {
        CurtainError::AtStep {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, CurtainError>;

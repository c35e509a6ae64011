//! Curtain placement strategies.
//!
//! `optimize_dp` maximizes the summed entropy coverage exactly over all
//! feasible curtains via a backward/forward dynamic program on the
//! constraint graph, breaking coverage ties by curtain smoothness (sum of
//! squared laser-angle steps) and remaining ties by candidate index.
//! `brute_force_oracle` re-solves small instances by exhaustive enumeration
//! and is the reference the DP is tested against. The remaining functions
//! are the baseline strategies: greedy (two tie-break flavors), random and
//! fixed-depth frontoparallel curtains, and the frontoparallel sweep that
//! maximizes summed uncertainty over depth levels.

use std::collections::VecDeque;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CurtainError, Result};
use crate::geometry::{CandidateLattice, ConstraintGraph, ControlPoint};
use crate::uncertainty::{lookup_entropy, EntropyMap};

/// Entropy ties closer than this are treated as equal by the greedy
/// tie-break rules.
pub const GREEDY_TIE_EPS: f64 = 1e-9;

/// Guard for the exhaustive oracle: refuse instances with more than this
/// many raw index combinations.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// One control point per camera ray, drawn from a candidate lattice.
#[derive(Debug, Clone)]
pub struct CurtainPlacement {
    points: Vec<ControlPoint>,
    candidate_indices: Vec<usize>,
}

impl CurtainPlacement {
    /// Materialize a placement from per-ray candidate indices.
    pub fn from_indices(lattice: &CandidateLattice, indices: Vec<usize>) -> Result<Self> {
        if indices.len() != lattice.num_rays() {
            return Err(CurtainError::InvalidArgument(format!(
                "expected {} indices, got {}",
                lattice.num_rays(),
                indices.len()
            )));
        }
        let mut points = Vec::with_capacity(indices.len());
        for (t, &i) in indices.iter().enumerate() {
            if i >= lattice.points_per_ray() {
                return Err(CurtainError::InvalidArgument(format!(
                    "candidate index {i} on ray {t} out of range"
                )));
            }
            points.push(*lattice.candidate(t, i));
        }
        Ok(Self {
            points,
            candidate_indices: indices,
        })
    }

    pub fn points(&self) -> &[ControlPoint] {
        &self.points
    }

    pub fn candidate_indices(&self) -> &[usize] {
        &self.candidate_indices
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Score of a placement: covered entropy (the objective) and the smoothness
/// tie-break key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementScore {
    /// Sum of entropies looked up at the control points, bits.
    pub total_entropy: f64,
    /// Sum of squared laser-angle changes between consecutive rays, rad^2.
    pub smoothness_penalty: f64,
}

/// Evaluate a placement against an uncertainty map.
pub fn objective(placement: &CurtainPlacement, map: &EntropyMap) -> PlacementScore {
    let total_entropy = placement
        .points()
        .iter()
        .map(|p| lookup_entropy(map, p.position))
        .sum();
    let smoothness_penalty = placement
        .points()
        .windows(2)
        .map(|w| {
            let d = w[1].laser_angle - w[0].laser_angle;
            d * d
        })
        .sum();
    PlacementScore {
        total_entropy,
        smoothness_penalty,
    }
}

#[derive(Debug, Clone, Copy)]
struct NodeValue {
    /// Best achievable entropy sum from this node to the last ray.
    tail_entropy: f64,
    /// Smoothness of the smoothest tail among entropy-optimal tails.
    tail_smoothness: f64,
    successor: u32,
}

const NO_SUCCESSOR: u32 = u32::MAX;

/// Backward-pass table of tail values per node. Nodes without a full path
/// to the last ray hold no value.
#[derive(Debug, Clone)]
pub struct ValueTable {
    num_rays: usize,
    points_per_ray: usize,
    values: Vec<Option<NodeValue>>,
}

impl ValueTable {
    pub fn num_rays(&self) -> usize {
        self.num_rays
    }

    pub fn points_per_ray(&self) -> usize {
        self.points_per_ray
    }

    /// Best tail entropy sum from node (ray, index), if a full path exists.
    pub fn tail_entropy(&self, ray: usize, index: usize) -> Option<f64> {
        self.values[ray * self.points_per_ray + index].map(|v| v.tail_entropy)
    }

    pub fn tail_smoothness(&self, ray: usize, index: usize) -> Option<f64> {
        self.values[ray * self.points_per_ray + index].map(|v| v.tail_smoothness)
    }

    /// Argmax successor on the next ray, None on the last ray.
    pub fn successor(&self, ray: usize, index: usize) -> Option<usize> {
        self.values[ray * self.points_per_ray + index].and_then(|v| {
            if v.successor == NO_SUCCESSOR {
                None
            } else {
                Some(v.successor as usize)
            }
        })
    }

    pub fn has_path(&self, ray: usize, index: usize) -> bool {
        self.values[ray * self.points_per_ray + index].is_some()
    }
}

/// Exact constrained maximization of the covered-entropy objective.
///
/// Backward pass: tail values per node, computed with a monotone-deque
/// sliding maximum over each node's successor interval (amortized O(1) per
/// node on tie-free maps, O(B_avg) when ties must be broken by smoothness).
/// Forward pass: follow stored successors from the best first-ray node.
pub fn optimize_dp(
    graph: &ConstraintGraph,
    map: &EntropyMap,
) -> Result<(CurtainPlacement, PlacementScore, ValueTable)> {
    let lattice = graph.lattice();
    let t_count = lattice.num_rays();
    let n = lattice.points_per_ray();
    let mut values: Vec<Option<NodeValue>> = vec![None; t_count * n];

    for i in 0..n {
        let h = lookup_entropy(map, lattice.candidate(t_count - 1, i).position);
        values[(t_count - 1) * n + i] = Some(NodeValue {
            tail_entropy: h,
            tail_smoothness: 0.0,
            successor: NO_SUCCESSOR,
        });
    }

    for t in (0..t_count - 1).rev() {
        // Successor windows are contiguous index intervals that only move
        // forward with i, so a deque ordered by tail entropy serves the
        // window maximum; equal values stay queued so the smoothness
        // tie-break can scan the tied front run.
        let mut deque: VecDeque<u32> = VecDeque::new();
        let mut appended = 0usize;
        let mut prev_window = (0usize, 0usize);
        for i in 0..n {
            let (lo, hi) = graph.successor_range(t, i);
            if lo == hi {
                continue; // node has no outgoing edges
            }
            // windows slide forward because the laser angle is monotone in
            // the candidate index on both rays
            debug_assert!(lo >= prev_window.0 && hi >= prev_window.1);
            prev_window = (lo, hi);
            while appended < hi {
                if let Some(cand) = values[(t + 1) * n + appended] {
                    while let Some(&back) = deque.back() {
                        let back_val = values[(t + 1) * n + back as usize]
                            .expect("queued nodes have values")
                            .tail_entropy;
                        if back_val < cand.tail_entropy {
                            deque.pop_back();
                        } else {
                            break;
                        }
                    }
                    deque.push_back(appended as u32);
                }
                appended += 1;
            }
            while let Some(&front) = deque.front() {
                if (front as usize) < lo {
                    deque.pop_front();
                } else {
                    break;
                }
            }
            let Some(&front) = deque.front() else {
                continue; // every successor in the window is blocked
            };
            let theta_i = lattice.candidate(t, i).laser_angle;
            let best_entropy = values[(t + 1) * n + front as usize]
                .expect("queued nodes have values")
                .tail_entropy;
            let mut best_j = front;
            let mut best_smooth = f64::INFINITY;
            for &j in deque.iter() {
                let v = values[(t + 1) * n + j as usize].expect("queued nodes have values");
                if v.tail_entropy < best_entropy {
                    break; // deque entropy is non-increasing
                }
                let d = lattice.candidate(t + 1, j as usize).laser_angle - theta_i;
                let smooth = d * d + v.tail_smoothness;
                if smooth < best_smooth {
                    best_smooth = smooth;
                    best_j = j;
                }
            }
            let h = lookup_entropy(map, lattice.candidate(t, i).position);
            values[t * n + i] = Some(NodeValue {
                tail_entropy: h + best_entropy,
                tail_smoothness: best_smooth,
                successor: best_j,
            });
        }
    }

    let mut root: Option<usize> = None;
    for i in 0..n {
        let Some(v) = values[i] else { continue };
        root = match root {
            None => Some(i),
            Some(r) => {
                let rv = values[r].expect("root has value");
                if v.tail_entropy > rv.tail_entropy
                    || (v.tail_entropy == rv.tail_entropy && v.tail_smoothness < rv.tail_smoothness)
                {
                    Some(i)
                } else {
                    Some(r)
                }
            }
        };
    }
    let Some(root) = root else {
        return Err(CurtainError::NoFeasiblePath {
            first_blocked_ray: first_blocked_ray(graph),
        });
    };

    let mut indices = Vec::with_capacity(t_count);
    let mut cur = root;
    indices.push(cur);
    for t in 0..t_count - 1 {
        let succ = values[t * n + cur]
            .expect("path nodes have values")
            .successor as usize;
        indices.push(succ);
        cur = succ;
    }
    let root_value = values[root].expect("root has value");
    let score = PlacementScore {
        total_entropy: root_value.tail_entropy,
        smoothness_penalty: root_value.tail_smoothness,
    };
    let placement = CurtainPlacement::from_indices(lattice, indices)?;
    Ok((
        placement,
        score,
        ValueTable {
            num_rays: t_count,
            points_per_ray: n,
            values,
        },
    ))
}

/// Smallest ray index that cannot be reached from ray 0 along graph edges.
fn first_blocked_ray(graph: &ConstraintGraph) -> usize {
    let lattice = graph.lattice();
    let t_count = lattice.num_rays();
    let n = lattice.points_per_ray();
    let mut reach = vec![true; n];
    for t in 0..t_count - 1 {
        let mut next = vec![false; n];
        for (i, &r) in reach.iter().enumerate() {
            if !r {
                continue;
            }
            let (lo, hi) = graph.successor_range(t, i);
            for slot in next.iter_mut().take(hi).skip(lo) {
                *slot = true;
            }
        }
        if !next.iter().any(|&b| b) {
            return t + 1;
        }
        reach = next;
    }
    t_count - 1
}

/// Exhaustive reference solver: enumerates every feasible placement and
/// returns the best by (entropy, smoothness, lexicographic indices).
/// Refuses instances with N^T above `BRUTE_FORCE_LIMIT`.
pub fn brute_force_oracle(
    graph: &ConstraintGraph,
    map: &EntropyMap,
) -> Result<(CurtainPlacement, PlacementScore)> {
    let lattice = graph.lattice();
    let t_count = lattice.num_rays();
    let n = lattice.points_per_ray();
    let total_paths = (n as f64).powi(t_count as i32);
    if total_paths > BRUTE_FORCE_LIMIT {
        return Err(CurtainError::InstanceTooLarge {
            total_paths,
            limit: BRUTE_FORCE_LIMIT,
        });
    }

    let entropy: Vec<Vec<f64>> = (0..t_count)
        .map(|t| {
            (0..n)
                .map(|i| lookup_entropy(map, lattice.candidate(t, i).position))
                .collect()
        })
        .collect();

    struct Search<'a> {
        graph: &'a ConstraintGraph,
        entropy: &'a [Vec<f64>],
        t_count: usize,
        path: Vec<usize>,
        best: Option<(f64, f64, Vec<usize>)>,
    }

    impl Search<'_> {
        fn descend(&mut self, t: usize, i: usize, sum: f64, smooth: f64) {
            self.path.push(i);
            let sum = sum + self.entropy[t][i];
            if t + 1 == self.t_count {
                let better = match &self.best {
                    None => true,
                    Some((bj, bs, bpath)) => {
                        sum > *bj
                            || (sum == *bj && smooth < *bs)
                            || (sum == *bj && smooth == *bs && self.path < *bpath)
                    }
                };
                if better {
                    self.best = Some((sum, smooth, self.path.clone()));
                }
            } else {
                let (lo, hi) = self.graph.successor_range(t, i);
                let theta = self.graph.lattice().candidate(t, i).laser_angle;
                for j in lo..hi {
                    let d = self.graph.lattice().candidate(t + 1, j).laser_angle - theta;
                    self.descend(t + 1, j, sum, smooth + d * d);
                }
            }
            self.path.pop();
        }
    }

    let mut search = Search {
        graph,
        entropy: &entropy,
        t_count,
        path: Vec::with_capacity(t_count),
        best: None,
    };
    for i in 0..n {
        search.descend(0, i, 0.0, 0.0);
    }

    match search.best {
        Some((total_entropy, smoothness_penalty, indices)) => {
            let placement = CurtainPlacement::from_indices(lattice, indices)?;
            Ok((
                placement,
                PlacementScore {
                    total_entropy,
                    smoothness_penalty,
                },
            ))
        }
        None => Err(CurtainError::NoFeasiblePath {
            first_blocked_ray: first_blocked_ray(graph),
        }),
    }
}

/// Tie handling for the greedy baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GreedyTieBreak {
    /// Break entropy ties uniformly at random, seeded.
    Random { seed: u64 },
    /// Break entropy ties by the smallest laser-angle change (lowest
    /// candidate index on the first ray).
    MinAngleChange,
}

/// Greedy baseline: best candidate on the first ray, then the locally best
/// successor along graph edges.
pub fn greedy(
    graph: &ConstraintGraph,
    map: &EntropyMap,
    tie_break: GreedyTieBreak,
) -> Result<CurtainPlacement> {
    let lattice = graph.lattice();
    let t_count = lattice.num_rays();
    let n = lattice.points_per_ray();
    let mut rng = match tie_break {
        GreedyTieBreak::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        GreedyTieBreak::MinAngleChange => None,
    };

    let tied_candidates = |range: std::ops::Range<usize>, t: usize| -> Vec<usize> {
        let mut best = f64::NEG_INFINITY;
        for i in range.clone() {
            let h = lookup_entropy(map, lattice.candidate(t, i).position);
            if h > best {
                best = h;
            }
        }
        range
            .filter(|&i| {
                lookup_entropy(map, lattice.candidate(t, i).position) >= best - GREEDY_TIE_EPS
            })
            .collect()
    };

    let ties = tied_candidates(0..n, 0);
    let mut cur = match &mut rng {
        Some(rng) => ties[rng.gen_range(0..ties.len())],
        None => ties[0],
    };
    let mut indices = Vec::with_capacity(t_count);
    indices.push(cur);

    for t in 0..t_count - 1 {
        let (lo, hi) = graph.successor_range(t, cur);
        if lo == hi {
            return Err(CurtainError::DeadEnd {
                ray: t,
                candidate: cur,
            });
        }
        let ties = tied_candidates(lo..hi, t + 1);
        cur = match &mut rng {
            Some(rng) => ties[rng.gen_range(0..ties.len())],
            None => {
                let theta = lattice.candidate(t, cur).laser_angle;
                let mut best_j = ties[0];
                let mut best_d = f64::INFINITY;
                for &j in &ties {
                    let d = (lattice.candidate(t + 1, j).laser_angle - theta).abs();
                    if d < best_d {
                        best_d = d;
                        best_j = j;
                    }
                }
                best_j
            }
        };
        indices.push(cur);
    }
    CurtainPlacement::from_indices(lattice, indices)
}

/// Per-ray candidate whose z-coordinate is nearest to `z` (lowest index on
/// ties).
fn nearest_z_placement(lattice: &CandidateLattice, z: f64) -> CurtainPlacement {
    let indices = (0..lattice.num_rays())
        .map(|t| {
            let cands = lattice.ray_candidates(t);
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (i, c) in cands.iter().enumerate() {
                let d = (c.position.z - z).abs();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            best
        })
        .collect();
    CurtainPlacement::from_indices(lattice, indices).expect("indices valid by construction")
}

/// Frontoparallel curtain at a z-depth drawn uniformly from
/// [z_min, z_max]; deterministic under `seed`.
pub fn random_frontoparallel(
    seed: u64,
    z_min: f64,
    z_max: f64,
    lattice: &CandidateLattice,
) -> Result<CurtainPlacement> {
    if !(z_min <= z_max && z_min.is_finite() && z_max.is_finite()) {
        return Err(CurtainError::InvalidArgument(format!(
            "bad z range [{z_min}, {z_max}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = rng.gen_range(z_min..=z_max);
    Ok(nearest_z_placement(lattice, z))
}

/// Frontoparallel curtain at a fixed z-depth.
pub fn fixed_depth(z: f64, lattice: &CandidateLattice) -> CurtainPlacement {
    nearest_z_placement(lattice, z)
}

/// Frontoparallel curtain at the depth of maximum summed uncertainty: sweeps
/// the z-levels of the central ray's candidates, scoring each level's
/// nearest-z placement, and keeps the argmax (smallest z on ties).
pub fn frontoparallel_uncertainty(
    map: &EntropyMap,
    lattice: &CandidateLattice,
) -> CurtainPlacement {
    let t_count = lattice.num_rays();
    let n = lattice.points_per_ray();
    let central = lattice.ray_candidates(t_count / 2);

    // Per-ray cursors advance monotonically as the level z grows; the strict
    // improvement rule lands each cursor on the first (lowest-index) nearest
    // candidate, matching nearest_z_placement's tie rule.
    let mut cursor = vec![0usize; t_count];
    let mut best_z = central[0].position.z;
    let mut best_score = f64::NEG_INFINITY;
    for level in central.iter() {
        let z = level.position.z;
        let mut score = 0.0;
        for (t, cur) in cursor.iter_mut().enumerate() {
            let cands = lattice.ray_candidates(t);
            while *cur + 1 < n
                && (cands[*cur + 1].position.z - z).abs() < (cands[*cur].position.z - z).abs()
            {
                *cur += 1;
            }
            score += lookup_entropy(map, cands[*cur].position);
        }
        if score > best_score {
            best_score = score;
            best_z = z;
        }
    }
    nearest_z_placement(lattice, best_z)
}

/// Planner selector used by the episode loop and the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Dp,
    GreedyRandom,
    GreedyMinAngle,
    Random,
    Fixed(f64),
    FpUncertainty,
}

/// Per-call context for strategies that need randomness or a depth range.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext {
    pub seed: u64,
    /// z-range for the random frontoparallel baseline.
    pub random_z: (f64, f64),
}

impl Strategy {
    pub fn plan(
        &self,
        graph: &ConstraintGraph,
        map: &EntropyMap,
        ctx: &PlanContext,
    ) -> Result<CurtainPlacement> {
        match *self {
            Strategy::Dp => optimize_dp(graph, map).map(|(p, _, _)| p),
            Strategy::GreedyRandom => greedy(graph, map, GreedyTieBreak::Random { seed: ctx.seed }),
            Strategy::GreedyMinAngle => greedy(graph, map, GreedyTieBreak::MinAngleChange),
            Strategy::Random => {
                random_frontoparallel(ctx.seed, ctx.random_z.0, ctx.random_z.1, graph.lattice())
            }
            Strategy::Fixed(z) => Ok(fixed_depth(z, graph.lattice())),
            Strategy::FpUncertainty => Ok(frontoparallel_uncertainty(map, graph.lattice())),
        }
    }
}

impl FromStr for Strategy {
    type Err = CurtainError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dp" => Ok(Strategy::Dp),
            "greedy-random" => Ok(Strategy::GreedyRandom),
            "greedy-minangle" => Ok(Strategy::GreedyMinAngle),
            "random" => Ok(Strategy::Random),
            "fp-uncertainty" => Ok(Strategy::FpUncertainty),
            other => {
                if let Some(z) = other.strip_prefix("fixed:") {
                    let z: f64 = z
                        .parse()
                        .map_err(|e| CurtainError::Parse(format!("bad fixed depth {z:?}: {e}")))?;
                    Ok(Strategy::Fixed(z))
                } else {
                    Err(CurtainError::Parse(format!(
                        "unknown strategy {other:?}; expected dp, greedy-random, \
                         greedy-minangle, random, fixed:<z>, or fp-uncertainty"
                    )))
                }
            }
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Dp => write!(f, "dp"),
            Strategy::GreedyRandom => write!(f, "greedy-random"),
            Strategy::GreedyMinAngle => write!(f, "greedy-minangle"),
            Strategy::Random => write!(f, "random"),
            Strategy::Fixed(z) => write!(f, "fixed:{z}"),
            Strategy::FpUncertainty => write!(f, "fp-uncertainty"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        build_constraint_graph, build_lattice, is_feasible, CameraModel, LaserModel, Point2,
    };
    use crate::uncertainty::{entropy_map, ConfidenceGrid, GridSpec};

    /// Rig whose candidates land in individually addressable grid cells:
    /// T rays over a small fov, laser on-axis, one grid column per ray and
    /// one row per range level.
    fn rig(t_count: usize, n: usize, dmax_deg: f64) -> (ConstraintGraph, GridSpec) {
        let cam = CameraModel::new(t_count, 10.0).unwrap();
        let laser =
            LaserModel::from_angle_step(Point2::new(0.0, 0.0), dmax_deg.to_radians()).unwrap();
        let lattice = build_lattice(&cam, &laser, n, 5.0, 5.0 + (n as f64 - 1.0)).unwrap();
        let graph = build_constraint_graph(lattice, &laser);
        let spec = GridSpec::new(-3.0, 3.0, 4.5, 4.5 + n as f64, 3, n).unwrap();
        (graph, spec)
    }

    fn map_from(spec: GridSpec, confidences: Vec<f64>) -> crate::uncertainty::EntropyMap {
        entropy_map(&ConfidenceGrid::new(spec, confidences).unwrap())
    }

    #[test]
    fn objective_zero_map() {
        let (graph, spec) = rig(3, 4, 200.0);
        let map = map_from(spec, vec![0.0; spec.cell_count()]);
        let p = CurtainPlacement::from_indices(graph.lattice(), vec![0, 1, 2]).unwrap();
        let score = objective(&p, &map);
        assert_eq!(score.total_entropy, 0.0);
    }

    #[test]
    fn objective_constant_angle_has_zero_smoothness() {
        let (graph, _) = rig(3, 4, 200.0);
        // on-axis laser: equal candidate index -> equal range -> but angle
        // follows the ray azimuth, so constant angle needs the laser angle
        // itself constant; with the laser at the origin the angle equals the
        // azimuth, which differs per ray. Use a single-range sanity check on
        // smoothness arithmetic instead: smoothness of a 1-segment placement
        // with equal angles is zero.
        let lattice = graph.lattice();
        let same = CurtainPlacement::from_indices(lattice, vec![1, 1, 1]).unwrap();
        let manual: f64 = same
            .points()
            .windows(2)
            .map(|w| (w[1].laser_angle - w[0].laser_angle).powi(2))
            .sum();
        let spec = GridSpec::new(-3.0, 3.0, 4.5, 8.5, 3, 4).unwrap();
        let map = map_from(spec, vec![0.5; 12]);
        let score = objective(&same, &map);
        assert!((score.smoothness_penalty - manual).abs() < 1e-15);
    }

    #[test]
    fn objective_sums_lookups() {
        let spec = GridSpec::new(0.0, 2.0, 0.0, 2.0, 2, 2).unwrap();
        let map = map_from(spec, vec![0.5, 0.25, 0.9, 0.1]);
        // hand-built 3-point placement: reuse a small lattice but evaluate
        // lookups directly
        let (graph, _) = rig(3, 4, 200.0);
        let p = CurtainPlacement::from_indices(graph.lattice(), vec![0, 0, 0]).unwrap();
        let expected: f64 = p
            .points()
            .iter()
            .map(|c| lookup_entropy(&map, c.position))
            .sum();
        assert_eq!(objective(&p, &map).total_entropy, expected);
    }

    #[test]
    fn unconstrained_dp_picks_per_ray_argmax() {
        let (graph, spec) = rig(3, 4, 200.0);
        // central column (ix=1) carries per-row confidences; rays sit near
        // x=0 so every candidate reads its row of column ix=1
        let mut conf = vec![0.0; spec.cell_count()];
        let col = [0.45, 0.2, 0.35, 0.05]; // H: 0.993, 0.722, 0.934, 0.286
        for (iz, &p) in col.iter().enumerate() {
            for ix in 0..3 {
                conf[spec.flat(ix, iz)] = p;
            }
        }
        let map = map_from(spec, conf);
        let (placement, score, table) = optimize_dp(&graph, &map).unwrap();
        assert_eq!(placement.candidate_indices(), &[0, 0, 0]);
        let h_max = crate::uncertainty::binary_entropy(0.45).unwrap();
        assert!((score.total_entropy - 3.0 * h_max).abs() < 1e-9);
        // last-ray tail values equal the node entropies with zero smoothness
        for i in 0..4 {
            let h = lookup_entropy(&map, graph.lattice().candidate(2, i).position);
            assert_eq!(table.tail_entropy(2, i), Some(h));
            assert_eq!(table.tail_smoothness(2, i), Some(0.0));
        }
    }

    #[test]
    fn unconstrained_dp_breaks_value_ties_by_lowest_index() {
        let (graph, spec) = rig(2, 4, 200.0);
        let map = map_from(spec, vec![0.5; spec.cell_count()]);
        let (placement, _, _) = optimize_dp(&graph, &map).unwrap();
        // uniform map, unconstrained graph: smoothness prefers equal angles;
        // with an on-axis laser all candidates on a ray share one angle, so
        // every path ties and the lowest index wins
        assert_eq!(placement.candidate_indices(), &[0, 0]);
    }

    #[test]
    fn dp_matches_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..60 {
            let t_count = rng.gen_range(2..=4);
            let n = rng.gen_range(2..=5);
            let dmax = rng.gen_range(0.5..30.0);
            let (graph, spec) = rig(t_count, n, dmax);
            let conf: Vec<f64> = (0..spec.cell_count())
                .map(|_| rng.gen_range(0.0..1.0))
                .collect();
            let map = map_from(spec, conf);
            match (optimize_dp(&graph, &map), brute_force_oracle(&graph, &map)) {
                (Ok((dp_p, dp_s, _)), Ok((or_p, or_s))) => {
                    assert!(
                        (dp_s.total_entropy - or_s.total_entropy).abs() < 1e-9,
                        "case {case}: dp {} vs oracle {}",
                        dp_s.total_entropy,
                        or_s.total_entropy
                    );
                    assert!(
                        (dp_s.smoothness_penalty - or_s.smoothness_penalty).abs() < 1e-9,
                        "case {case}: smoothness mismatch"
                    );
                    assert!(is_feasible(&graph, &dp_p).unwrap());
                    assert!(is_feasible(&graph, &or_p).unwrap());
                }
                (
                    Err(CurtainError::NoFeasiblePath { .. }),
                    Err(CurtainError::NoFeasiblePath { .. }),
                ) => {}
                (dp, oracle) => panic!(
                    "case {case}: dp/oracle disagree on feasibility: {:?} vs {:?}",
                    dp.err(),
                    oracle.err()
                ),
            }
        }
    }

    #[test]
    fn dp_minimizes_smoothness_on_uniform_maps() {
        // azimuth step is 10/3 deg, so a 4 deg bound leaves a banded graph
        let (graph, spec) = rig(4, 5, 4.0);
        let map = map_from(spec, vec![0.5; spec.cell_count()]);
        let (_, dp_score, _) = optimize_dp(&graph, &map).unwrap();
        let (_, oracle_score) = brute_force_oracle(&graph, &map).unwrap();
        assert!((dp_score.total_entropy - oracle_score.total_entropy).abs() < 1e-9);
        assert!((dp_score.smoothness_penalty - oracle_score.smoothness_penalty).abs() < 1e-12);
    }

    #[test]
    fn oracle_single_forced_maximum() {
        let (graph, spec) = rig(2, 2, 200.0);
        // per-row confidences: row 0 high for ray pattern (1, 0), row 1 for (0, 1)
        let mut conf = vec![0.0; spec.cell_count()];
        for ix in 0..3 {
            conf[spec.flat(ix, 0)] = 0.5; // H = 1 at the near range
        }
        let map = map_from(spec, conf);
        let (placement, score) = brute_force_oracle(&graph, &map).unwrap();
        assert_eq!(placement.candidate_indices(), &[0, 0]);
        assert!((score.total_entropy - 2.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_rejects_huge_instances() {
        let cam = CameraModel::new(16, 10.0).unwrap();
        let laser = LaserModel::from_angle_step(Point2::new(0.0, 0.0), 1.0).unwrap();
        let lattice = build_lattice(&cam, &laser, 40, 1.0, 10.0).unwrap();
        let graph = build_constraint_graph(lattice, &laser);
        let spec = GridSpec::new(-3.0, 3.0, 0.0, 12.0, 2, 2).unwrap();
        let map = map_from(spec, vec![0.5; 4]);
        assert!(matches!(
            brute_force_oracle(&graph, &map),
            Err(CurtainError::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn planners_error_when_no_path_exists() {
        let cam = CameraModel::new(3, 10.0).unwrap();
        let laser = LaserModel::from_angle_step(Point2::new(0.2, 0.0), 1e-12).unwrap();
        let lattice = build_lattice(&cam, &laser, 3, 1.0, 9.0).unwrap();
        let graph = build_constraint_graph(lattice, &laser);
        let spec = GridSpec::new(-3.0, 3.0, 0.0, 10.0, 2, 2).unwrap();
        let map = map_from(spec, vec![0.5; 4]);
        assert!(matches!(
            optimize_dp(&graph, &map),
            Err(CurtainError::NoFeasiblePath {
                first_blocked_ray: 1
            })
        ));
        assert!(matches!(
            brute_force_oracle(&graph, &map),
            Err(CurtainError::NoFeasiblePath { .. })
        ));
        assert!(matches!(
            greedy(&graph, &map, GreedyTieBreak::MinAngleChange),
            Err(CurtainError::DeadEnd { ray: 0, .. })
        ));
    }

    /// Two-ray trap: the locally best first choice reaches only a poor
    /// successor. Geometry pinned by the successor-range assertions below.
    fn trap() -> (ConstraintGraph, crate::uncertainty::EntropyMap) {
        let cam = CameraModel::new(2, 10.0).unwrap();
        let laser =
            LaserModel::from_angle_step(Point2::new(0.2, 0.0), 10.2f64.to_radians()).unwrap();
        let lattice = build_lattice(&cam, &laser, 4, 5.0, 20.0).unwrap();
        let graph = build_constraint_graph(lattice, &laser);
        assert_eq!(graph.successor_range(0, 0), (0, 1));
        assert_eq!(graph.successor_range(0, 3), (0, 4));

        // grid: 2 columns (ray 0 at x<0, ray 1 at x>0), 4 range bands
        let spec = GridSpec::new(-4.0, 4.0, 4.75, 20.75, 2, 4).unwrap();
        let mut conf = vec![0.0; spec.cell_count()];
        conf[spec.flat(0, 0)] = 0.25; // ray 0 near: H = 0.811  (greedy bait)
        conf[spec.flat(0, 3)] = 0.20; // ray 0 far:  H = 0.722
        conf[spec.flat(1, 0)] = 0.02; // ray 1 near: H = 0.141  (the trap)
        conf[spec.flat(1, 3)] = 0.40; // ray 1 far:  H = 0.971
        let map = entropy_map(&ConfidenceGrid::new(spec, conf).unwrap());
        (graph, map)
    }

    #[test]
    fn greedy_falls_into_trap_dp_does_not() {
        let (graph, map) = trap();
        let g = greedy(&graph, &map, GreedyTieBreak::MinAngleChange).unwrap();
        let (d, d_score, _) = optimize_dp(&graph, &map).unwrap();
        let g_score = objective(&g, &map);
        assert!(g_score.total_entropy + 1e-9 < d_score.total_entropy);
        assert_eq!(d.candidate_indices(), &[3, 3]);
        assert_eq!(g.candidate_indices(), &[0, 0]);
        let (_, oracle_score) = brute_force_oracle(&graph, &map).unwrap();
        assert!((oracle_score.total_entropy - d_score.total_entropy).abs() < 1e-12);
    }

    #[test]
    fn greedy_no_ties_equals_per_ray_argmax() {
        let (graph, spec) = rig(3, 4, 200.0);
        let mut conf = vec![0.0; spec.cell_count()];
        let col = [0.48, 0.3, 0.2, 0.1];
        for (iz, &p) in col.iter().enumerate() {
            for ix in 0..3 {
                conf[spec.flat(ix, iz)] = p;
            }
        }
        let map = map_from(spec, conf);
        let g = greedy(&graph, &map, GreedyTieBreak::Random { seed: 3 }).unwrap();
        assert_eq!(g.candidate_indices(), &[0, 0, 0]);
    }

    #[test]
    fn greedy_min_angle_on_uniform_map_tracks_constant_angle() {
        // off-axis laser so candidate angles vary with range; hand-simulate
        // the min-|dtheta| walk from index 0 and compare
        let cam = CameraModel::new(3, 10.0).unwrap();
        let laser = LaserModel::from_angle_step(Point2::new(0.3, 0.0), 0.2).unwrap();
        let lattice = build_lattice(&cam, &laser, 5, 2.0, 12.0).unwrap();
        let graph = build_constraint_graph(lattice, &laser);
        let spec = GridSpec::new(-3.0, 3.0, 0.0, 13.0, 2, 2).unwrap();
        let map = map_from(spec, vec![0.5; 4]);

        let mut expect = vec![0usize];
        for t in 0..2 {
            let cur = *expect.last().unwrap();
            let theta = graph.lattice().candidate(t, cur).laser_angle;
            let (lo, hi) = graph.successor_range(t, cur);
            let j = (lo..hi)
                .min_by(|&a, &b| {
                    let da = (graph.lattice().candidate(t + 1, a).laser_angle - theta).abs();
                    let db = (graph.lattice().candidate(t + 1, b).laser_angle - theta).abs();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            expect.push(j);
        }
        let g = greedy(&graph, &map, GreedyTieBreak::MinAngleChange).unwrap();
        assert_eq!(g.candidate_indices(), expect.as_slice());
    }

    #[test]
    fn greedy_random_is_deterministic_per_seed() {
        let (graph, spec) = rig(4, 4, 200.0);
        let map = map_from(spec, vec![0.5; spec.cell_count()]);
        let a = greedy(&graph, &map, GreedyTieBreak::Random { seed: 11 }).unwrap();
        let b = greedy(&graph, &map, GreedyTieBreak::Random { seed: 11 }).unwrap();
        assert_eq!(a.candidate_indices(), b.candidate_indices());
    }

    #[test]
    fn random_frontoparallel_deterministic() {
        let (graph, _) = rig(4, 6, 200.0);
        let a = random_frontoparallel(9, 5.0, 10.0, graph.lattice()).unwrap();
        let b = random_frontoparallel(9, 5.0, 10.0, graph.lattice()).unwrap();
        assert_eq!(a.candidate_indices(), b.candidate_indices());
        for (t, &i) in a.candidate_indices().iter().enumerate() {
            // chosen candidate is the per-ray nearest-z: check by scan
            let z = graph.lattice().candidate(t, i).position.z;
            let drawn_best = graph
                .lattice()
                .ray_candidates(t)
                .iter()
                .map(|c| (c.position.z - z).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(drawn_best <= 1e-12);
        }
    }

    #[test]
    fn fixed_depth_snaps_to_nearest_z() {
        let (graph, _) = rig(3, 6, 200.0);
        let lattice = graph.lattice();
        // exact hit on the central ray when the requested z equals a candidate z
        let target = lattice.candidate(1, 2).position.z;
        let p = fixed_depth(target, lattice);
        assert_eq!(p.candidate_indices()[1], 2);
        // generic depth: verify minimality per ray by scanning
        let p45 = fixed_depth(7.3, lattice);
        for (t, &i) in p45.candidate_indices().iter().enumerate() {
            let chosen = (lattice.candidate(t, i).position.z - 7.3).abs();
            for c in lattice.ray_candidates(t) {
                assert!(chosen <= (c.position.z - 7.3).abs() + 1e-12);
            }
        }
    }

    #[test]
    fn fp_uncertainty_finds_hot_band() {
        let (graph, spec) = rig(3, 4, 200.0);
        let mut conf = vec![0.0; spec.cell_count()];
        for ix in 0..3 {
            conf[spec.flat(ix, 2)] = 0.5; // all mass in band iz=2
        }
        let map = map_from(spec, conf);
        let p = frontoparallel_uncertainty(&map, graph.lattice());
        assert_eq!(p.candidate_indices(), &[2, 2, 2]);
    }

    #[test]
    fn fp_uncertainty_uniform_takes_smallest_z() {
        let (graph, spec) = rig(3, 4, 200.0);
        let map = map_from(spec, vec![0.5; spec.cell_count()]);
        let p = frontoparallel_uncertainty(&map, graph.lattice());
        assert_eq!(p.candidate_indices(), &[0, 0, 0]);
    }

    #[test]
    fn fp_uncertainty_picks_heavier_band() {
        let (graph, spec) = rig(3, 4, 200.0);
        let mut conf = vec![0.0; spec.cell_count()];
        for ix in 0..3 {
            conf[spec.flat(ix, 1)] = 0.2; // H = 0.722
            conf[spec.flat(ix, 3)] = 0.45; // H = 0.993
        }
        let map = map_from(spec, conf);
        // verify by direct summation over both bands
        let sum = |iz: usize| -> f64 {
            (0..3)
                .map(|t| lookup_entropy(&map, graph.lattice().candidate(t, iz).position))
                .sum()
        };
        assert!(sum(3) > sum(1));
        let p = frontoparallel_uncertainty(&map, graph.lattice());
        assert_eq!(p.candidate_indices(), &[3, 3, 3]);
    }

    #[test]
    fn strategy_parsing_roundtrip() {
        for s in [
            "dp",
            "greedy-random",
            "greedy-minangle",
            "random",
            "fixed:15",
            "fp-uncertainty",
        ] {
            let strat: Strategy = s.parse().unwrap();
            assert_eq!(strat.to_string(), s);
        }
        assert!("nope".parse::<Strategy>().is_err());
        assert!("fixed:abc".parse::<Strategy>().is_err());
    }
}

//! Bayesian occupancy belief over the anchor grid.
//!
//! The belief plays the detector's role in the sense-plan loop: its per-cell
//! occupancy probabilities become the confidence grid the planner reads, and
//! sensing reports update it. The ideal update collapses covered cells to
//! certainty and leaves everything else untouched, which makes the expected
//! information gain of a curtain equal the summed entropy of the distinct
//! cells it covers.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{CurtainError, Result};
use crate::planner::CurtainPlacement;
use crate::uncertainty::{binary_entropy, ConfidenceGrid, GridSpec};

/// Sensing outcome for one action: the cells the action covered and the
/// subset that produced returns.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SensingReport {
    covered: BTreeSet<usize>,
    hits: BTreeSet<usize>,
}

impl SensingReport {
    pub fn new(covered: BTreeSet<usize>, hits: BTreeSet<usize>) -> Result<Self> {
        if !hits.is_subset(&covered) {
            return Err(CurtainError::InvalidArgument(
                "hit cells must be a subset of covered cells".into(),
            ));
        }
        Ok(Self { covered, hits })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn covered(&self) -> &BTreeSet<usize> {
        &self.covered
    }

    pub fn hits(&self) -> &BTreeSet<usize> {
        &self.hits
    }
}

/// Flat indices of the cells a placement covers: each control point covers
/// exactly its nearest cell; points outside the grid cover nothing.
pub fn covered_cells(spec: &GridSpec, placement: &CurtainPlacement) -> BTreeSet<usize> {
    placement
        .points()
        .iter()
        .filter_map(|p| spec.nearest_cell(p.position))
        .map(|(ix, iz)| spec.flat(ix, iz))
        .collect()
}

/// Per-cell occupancy probability with value semantics: updates return new
/// beliefs.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyBelief {
    spec: GridSpec,
    prior_p: f64,
    p: Vec<f64>,
}

impl OccupancyBelief {
    /// Uniform belief at `prior_p`. Degenerate priors (0 or 1) are rejected:
    /// they carry no entropy anywhere and would nullify planning.
    pub fn new(spec: GridSpec, prior_p: f64) -> Result<Self> {
        if !(prior_p > 0.0 && prior_p < 1.0) {
            return Err(CurtainError::InvalidArgument(format!(
                "prior must lie strictly inside (0, 1), got {prior_p}"
            )));
        }
        Ok(Self {
            spec,
            prior_p,
            p: vec![prior_p; spec.cell_count()],
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn prior_p(&self) -> f64 {
        self.prior_p
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn probability(&self, ix: usize, iz: usize) -> f64 {
        self.p[self.spec.flat(ix, iz)]
    }

    /// Noiseless sensing: covered cells collapse to certainty (1 on hit,
    /// 0 on miss); uncovered cells keep their exact previous value.
    pub fn ideal_update(&self, report: &SensingReport) -> OccupancyBelief {
        let mut next = self.clone();
        for &cell in report.covered() {
            next.p[cell] = 0.0;
        }
        for &cell in report.hits() {
            next.p[cell] = 1.0;
        }
        next
    }

    /// Bernoulli-likelihood Bayes update for covered cells: posterior odds
    /// are prior odds times (hit/miss likelihood ratio)^(+1) on a hit and
    /// ^(-1) on a miss. Cells already certain stay certain.
    pub fn noisy_update(
        &self,
        report: &SensingReport,
        hit_likelihood: f64,
        miss_likelihood: f64,
    ) -> Result<OccupancyBelief> {
        if !(hit_likelihood > 0.0 && hit_likelihood < 1.0)
            || !(miss_likelihood > 0.0 && miss_likelihood < 1.0)
        {
            return Err(CurtainError::InvalidArgument(format!(
                "likelihoods must lie in (0, 1), got hit {hit_likelihood}, miss {miss_likelihood}"
            )));
        }
        if hit_likelihood <= miss_likelihood {
            return Err(CurtainError::InvalidArgument(
                "hit likelihood must exceed miss likelihood (otherwise the sensor is uninformative)"
                    .into(),
            ));
        }
        let ratio = hit_likelihood / miss_likelihood;
        let mut next = self.clone();
        for &cell in report.covered() {
            let p = next.p[cell];
            if p == 0.0 || p == 1.0 {
                continue;
            }
            let odds = p / (1.0 - p);
            let odds = if report.hits().contains(&cell) {
                odds * ratio
            } else {
                odds / ratio
            };
            next.p[cell] = odds / (1.0 + odds);
        }
        Ok(next)
    }

    /// Copy the per-cell probabilities into a confidence grid.
    pub fn confidence_grid(&self) -> ConfidenceGrid {
        ConfidenceGrid::new(self.spec, self.p.clone()).expect("belief probabilities stay valid")
    }

    /// Total belief entropy in bits (compensated summation so that entropy
    /// differences of large grids stay trustworthy).
    pub fn total_entropy(&self) -> f64 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for &p in &self.p {
            let h = binary_entropy(p).expect("belief probabilities stay valid");
            let t = sum + h;
            if sum.abs() >= h.abs() {
                comp += (sum - t) + h;
            } else {
                comp += (h - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }

    /// Entropy removed by ideally sensing the cells the placement covers:
    /// prior entropy minus the entropy after an ideal update of those cells.
    /// Equals the summed entropy of the distinct covered cells.
    pub fn expected_information_gain(&self, placement: &CurtainPlacement) -> f64 {
        let covered = covered_cells(&self.spec, placement);
        let report = SensingReport::new(covered, BTreeSet::new()).expect("empty hits are a subset");
        let posterior = self.ideal_update(&report);
        self.total_entropy() - posterior.total_entropy()
    }

    pub fn to_snapshot_json(&self) -> String {
        serde_json::to_string(&BeliefSnapshot {
            prior_p: self.prior_p,
            spec: self.spec,
            values: self.p.clone(),
        })
        .expect("belief serializes")
    }

    pub fn from_snapshot_json(s: &str) -> Result<Self> {
        let snap: BeliefSnapshot = serde_json::from_str(s)?;
        if snap.values.len() != snap.spec.cell_count() {
            return Err(CurtainError::Parse(format!(
                "snapshot holds {} values for a {} cell grid",
                snap.values.len(),
                snap.spec.cell_count()
            )));
        }
        if !(snap.prior_p > 0.0 && snap.prior_p < 1.0) {
            return Err(CurtainError::Parse(format!(
                "snapshot prior {} is degenerate",
                snap.prior_p
            )));
        }
        if snap.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(CurtainError::Parse(
                "snapshot probability outside [0, 1]".into(),
            ));
        }
        Ok(Self {
            spec: snap.spec,
            prior_p: snap.prior_p,
            p: snap.values,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct BeliefSnapshot {
    prior_p: f64,
    #[serde(flatten)]
    spec: GridSpec,
    values: Vec<f64>,
}

//! Binary-entropy uncertainty maps over the ground-plane anchor grid.
//!
//! Per-cell confidence scores become per-cell entropies; the planner reads
//! them back through nearest-neighbor lookups at arbitrary control points.

use serde::{Deserialize, Serialize};

use crate::error::{CurtainError, Result};
use crate::geometry::Point2;

/// Geometry of a uniform grid over [x_min, x_max] x [z_min, z_max] with
/// `nx` by `nz` cells. Values are stored row-major with `iz` as the row:
/// flat index = iz * nx + ix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub nx: usize,
    pub nz: usize,
}

impl GridSpec {
    pub fn new(
        x_min: f64,
        x_max: f64,
        z_min: f64,
        z_max: f64,
        nx: usize,
        nz: usize,
    ) -> Result<Self> {
        if !(x_min < x_max && z_min < z_max) || nx == 0 || nz == 0 {
            return Err(CurtainError::InvalidArgument(format!(
                "degenerate grid [{x_min}, {x_max}] x [{z_min}, {z_max}], {nx} x {nz}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            z_min,
            z_max,
            nx,
            nz,
        })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dz(&self) -> f64 {
        (self.z_max - self.z_min) / self.nz as f64
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.nz
    }

    pub fn flat(&self, ix: usize, iz: usize) -> usize {
        debug_assert!(ix < self.nx && iz < self.nz);
        iz * self.nx + ix
    }

    pub fn cell_center(&self, ix: usize, iz: usize) -> Point2 {
        Point2::new(
            self.x_min + (ix as f64 + 0.5) * self.dx(),
            self.z_min + (iz as f64 + 0.5) * self.dz(),
        )
    }

    /// Cell whose center is nearest to `p`, or None when `p` falls outside
    /// the grid extent. Equidistant points take the lower cell index on each
    /// axis, so exact boundary points resolve deterministically.
    pub fn nearest_cell(&self, p: Point2) -> Option<(usize, usize)> {
        let inside =
            p.x >= self.x_min && p.x <= self.x_max && p.z >= self.z_min && p.z <= self.z_max;
        if !inside {
            return None;
        }
        Some((
            axis_cell(p.x, self.x_min, self.dx(), self.nx),
            axis_cell(p.z, self.z_min, self.dz(), self.nz),
        ))
    }
}

fn axis_cell(v: f64, lo: f64, step: f64, count: usize) -> usize {
    let u = (v - lo) / step;
    let mut idx = u.floor();
    // a point exactly on a shared boundary is equidistant to both centers;
    // take the lower index
    if u == idx && idx > 0.0 {
        idx -= 1.0;
    }
    (idx as usize).min(count - 1)
}

impl Default for GridSpec {
    /// The car-detection anchor grid: [-40, 40] x [0, 70.4] m at roughly
    /// 0.5 m per cell.
    fn default() -> Self {
        Self {
            x_min: -40.0,
            x_max: 40.0,
            z_min: 0.0,
            z_max: 70.4,
            nx: 160,
            nz: 141,
        }
    }
}

/// Binary entropy of a probability, in bits, with the limit convention
/// 0 log 0 = 0. Errors outside [0, 1].
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CurtainError::Domain(format!(
            "probability must lie in [0, 1], got {p}"
        )));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Per-cell detection confidence over the anchor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceGrid {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ConfidenceGrid {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.cell_count() {
            return Err(CurtainError::InvalidArgument(format!(
                "expected {} values, got {}",
                spec.cell_count(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(CurtainError::InvalidArgument(format!(
                "confidence {bad} outside [0, 1]"
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn constant(spec: GridSpec, p: f64) -> Result<Self> {
        let n = spec.cell_count();
        Self::new(spec, vec![p; n])
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, ix: usize, iz: usize) -> f64 {
        self.values[self.spec.flat(ix, iz)]
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&GridFile {
            spec: self.spec,
            values: self.values.clone(),
        })
        .expect("grid serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: GridFile = serde_json::from_str(s)?;
        Self::new(file.spec, file.values)
    }

    pub fn to_csv_string(&self) -> String {
        grid_to_csv(&self.spec, &self.values)
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        let (spec, values) = grid_from_csv(s)?;
        Self::new(spec, values)
    }
}

#[derive(Serialize, Deserialize)]
struct GridFile {
    #[serde(flatten)]
    spec: GridSpec,
    values: Vec<f64>,
}

fn grid_to_csv(spec: &GridSpec, values: &[f64]) -> String {
    let mut out = String::from("x_min,x_max,z_min,z_max,nx,nz\n");
    out.push_str(&format!(
        "{},{},{},{},{},{}\n",
        spec.x_min, spec.x_max, spec.z_min, spec.z_max, spec.nx, spec.nz
    ));
    for iz in 0..spec.nz {
        let row: Vec<String> = (0..spec.nx)
            .map(|ix| format!("{}", values[spec.flat(ix, iz)]))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn grid_from_csv(s: &str) -> Result<(GridSpec, Vec<f64>)> {
    let mut lines = s.lines();
    let header = lines
        .next()
        .ok_or_else(|| CurtainError::Parse("empty grid file".into()))?;
    if header.trim() != "x_min,x_max,z_min,z_max,nx,nz" {
        return Err(CurtainError::Parse(format!("unexpected header: {header}")));
    }
    let meta = lines
        .next()
        .ok_or_else(|| CurtainError::Parse("missing extent line".into()))?;
    let fields: Vec<&str> = meta.trim().split(',').collect();
    if fields.len() != 6 {
        return Err(CurtainError::Parse(format!("bad extent line: {meta}")));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| CurtainError::Parse(format!("bad number {s}: {e}")))
    };
    let spec = GridSpec::new(
        num(fields[0])?,
        num(fields[1])?,
        num(fields[2])?,
        num(fields[3])?,
        fields[4]
            .parse()
            .map_err(|e| CurtainError::Parse(format!("bad nx: {e}")))?,
        fields[5]
            .parse()
            .map_err(|e| CurtainError::Parse(format!("bad nz: {e}")))?,
    )?;
    let mut values = Vec::with_capacity(spec.cell_count());
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        for field in line.trim().split(',') {
            values.push(num(field)?);
        }
    }
    if values.len() != spec.cell_count() {
        return Err(CurtainError::Parse(format!(
            "expected {} values, found {}",
            spec.cell_count(),
            values.len()
        )));
    }
    Ok((spec, values))
}

/// Cell-wise binary entropy of a confidence grid, in bits.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyMap {
    spec: GridSpec,
    values: Vec<f64>,
}

impl EntropyMap {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, ix: usize, iz: usize) -> f64 {
        self.values[self.spec.flat(ix, iz)]
    }

    pub fn to_csv_string(&self) -> String {
        grid_to_csv(&self.spec, &self.values)
    }
}

/// Convert a confidence grid into its uncertainty map.
pub fn entropy_map(grid: &ConfidenceGrid) -> EntropyMap {
    let values = grid
        .values()
        .iter()
        .map(|&p| binary_entropy(p).expect("confidence grid values are valid probabilities"))
        .collect();
    EntropyMap {
        spec: *grid.spec(),
        values,
    }
}

/// Entropy at the cell nearest to `p`; points outside the grid carry no
/// anchors and return 0.
pub fn lookup_entropy(map: &EntropyMap, p: Point2) -> f64 {
    match map.spec.nearest_cell(p) {
        Some((ix, iz)) => map.values[map.spec.flat(ix, iz)],
        None => 0.0,
    }
}

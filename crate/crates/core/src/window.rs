//! Rectilinear spatial windows on which fields and sampled surfaces live.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minkowski::Vec3;

/// Nodes x = origin + i·spacing per axis, stored row-major with x1 slowest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialWindow {
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub n: [usize; 3],
}

impl SpatialWindow {
    pub fn new(origin: [f64; 3], spacing: [f64; 3], n: [usize; 3]) -> Result<Self> {
        if n.contains(&0) || spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter(format!("bad window n={n:?} spacing={spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidParameter("non-finite window origin".into()));
        }
        Ok(Self { origin, spacing, n })
    }

    /// Cell-centred nodes covering the box [lo, hi] with `n` cells per axis.
    pub fn cell_centered(lo: [f64; 3], hi: [f64; 3], n: usize) -> Result<Self> {
        let mut origin = [0.0; 3];
        let mut spacing = [0.0; 3];
        for a in 0..3 {
            if !(hi[a] > lo[a]) {
                return Err(Error::InvalidParameter(format!("empty window box on axis {a}")));
            }
            spacing[a] = (hi[a] - lo[a]) / n as f64;
            origin[a] = lo[a] + 0.5 * spacing[a];
        }
        Self::new(origin, spacing, [n; 3])
    }

    /// `n` cell-centred nodes per axis at spacing `dx`, centred on `center`.
    pub fn centered(center: [f64; 3], dx: f64, n: usize) -> Result<Self> {
        let half = 0.5 * dx * n as f64;
        Self::cell_centered(
            [center[0] - half, center[1] - half, center[2] - half],
            [center[0] + half, center[1] + half, center[2] + half],
            n,
        )
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis_coords(&self, a: usize) -> Vec<f64> {
        (0..self.n[a]).map(|i| self.origin[a] + i as f64 * self.spacing[a]).collect()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n[1] + j) * self.n[2] + k
    }

    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        [idx / (self.n[1] * self.n[2]), (idx / self.n[2]) % self.n[1], idx % self.n[2]]
    }

    pub fn node(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.unravel(idx);
        Vec3::new(
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
            self.origin[2] + k as f64 * self.spacing[2],
        )
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Lower and upper corners of the cells.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..3 {
            lo[a] = self.origin[a] - 0.5 * self.spacing[a];
            hi[a] = lo[a] + self.n[a] as f64 * self.spacing[a];
        }
        (lo, hi)
    }

    /// Whether the node lies on the outermost layer.
    pub fn on_boundary(&self, idx: usize) -> bool {
        let c = self.unravel(idx);
        (0..3).any(|a| c[a] == 0 || c[a] + 1 == self.n[a])
    }
}

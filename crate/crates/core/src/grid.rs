//! Uniform tensor grids over truncated boxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest number of axes a grid may carry (phase space over n = 2).
pub const MAX_AXES: usize = 4;

/// A uniform tensor grid. Both endpoints of every axis are nodes; the
/// spacing is always derived from `(hi - lo) / (points - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridSpec {
    lo: Vec<f64>,
    hi: Vec<f64>,
    points: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    points: Vec<usize>,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        GridSpec::new(raw.lo, raw.hi, raw.points)
    }
}

impl From<GridSpec> for RawGrid {
    fn from(g: GridSpec) -> Self {
        RawGrid {
            lo: g.lo,
            hi: g.hi,
            points: g.points,
        }
    }
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, points: Vec<usize>) -> Result<Self> {
        let dim = lo.len();
        if dim == 0 || dim > MAX_AXES {
            return Err(Error::InvalidInput(format!("grid dimension {dim} outside 1..={MAX_AXES}")));
        }
        if hi.len() != dim || points.len() != dim {
            return Err(Error::InvalidInput("lo/hi/points lengths differ".into()));
        }
        for j in 0..dim {
            if !(lo[j].is_finite() && hi[j].is_finite()) {
                return Err(Error::NonFinite(format!("grid bounds on axis {j}")));
            }
            if lo[j] >= hi[j] {
                return Err(Error::InvalidInput(format!("axis {j}: lo {} must be below hi {}", lo[j], hi[j])));
            }
            if points[j] < 2 {
                return Err(Error::InvalidInput(format!("axis {j}: need at least 2 points")));
            }
        }
        Ok(GridSpec { lo, hi, points })
    }

    /// One-dimensional grid.
    pub fn line(lo: f64, hi: f64, points: usize) -> Result<Self> {
        GridSpec::new(vec![lo], vec![hi], vec![points])
    }

    /// Same interval and point count on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, points: usize) -> Result<Self> {
        GridSpec::new(vec![lo; dim], vec![hi; dim], vec![points; dim])
    }

    /// Grid from an explicit lower corner, spacing and count per axis.
    pub fn from_spacing(lo: &[f64], spacing: &[f64], points: &[usize]) -> Result<Self> {
        let hi = lo
            .iter()
            .zip(spacing)
            .zip(points)
            .map(|((&l, &d), &n)| l + d * (n as f64 - 1.0))
            .collect();
        GridSpec::new(lo.to_vec(), hi, points.to_vec())
    }

    /// Cartesian product: axes of `self` followed by axes of `other`.
    pub fn product(&self, other: &GridSpec) -> Result<Self> {
        let cat = |a: &[f64], b: &[f64]| a.iter().chain(b).copied().collect::<Vec<_>>();
        GridSpec::new(
            cat(&self.lo, &other.lo),
            cat(&self.hi, &other.hi),
            self.points.iter().chain(&other.points).copied().collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.points[axis] - 1) as f64
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.points[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + i as f64 * self.spacing(axis)
        }
    }

    pub fn axis(&self, axis: usize) -> Vec<f64> {
        (0..self.points[axis]).map(|i| self.coord(axis, i)).collect()
    }

    /// Composite trapezoid weights along one axis.
    pub fn trapezoid_weights(&self, axis: usize) -> Vec<f64> {
        let d = self.spacing(axis);
        let n = self.points[axis];
        (0..n).map(|i| if i == 0 || i + 1 == n { 0.5 * d } else { d }).collect()
    }

    /// Row-major strides (last axis fastest).
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for j in (0..self.dim().saturating_sub(1)).rev() {
            s[j] = s[j + 1] * self.points[j + 1];
        }
        s
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for j in (0..self.dim()).rev() {
            idx[j] = flat % self.points[j];
            flat /= self.points[j];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum()
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().enumerate().map(|(j, &i)| self.coord(j, i)).collect()
    }

    /// Trapezoid weight of the node at `flat`.
    pub fn weight(&self, flat: usize) -> f64 {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(j, &i)| {
                let d = self.spacing(j);
                if i == 0 || i + 1 == self.points[j] {
                    0.5 * d
                } else {
                    d
                }
            })
            .product()
    }

    /// All trapezoid weights, row-major.
    pub fn weights(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = (0..self.dim()).map(|j| self.trapezoid_weights(j)).collect();
        (0..self.len())
            .map(|flat| self.multi_index(flat).iter().enumerate().map(|(j, &i)| per_axis[j][i]).product())
            .collect()
    }

    /// Axes `range` as their own grid.
    pub fn sub_grid(&self, range: std::ops::Range<usize>) -> Result<Self> {
        GridSpec::new(
            self.lo[range.clone()].to_vec(),
            self.hi[range.clone()].to_vec(),
            self.points[range].to_vec(),
        )
    }

    /// Largest node-to-node diagonal, used for conservative dilations.
    pub fn cell_diagonal(&self) -> f64 {
        (0..self.dim()).map(|j| self.spacing(j).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(j, &v)| v >= self.lo[j] && v <= self.hi[j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_is_derived() {
        let g = GridSpec::line(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.spacing(0), 0.5);
        assert_eq!(g.axis(0), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn rejects_degenerate_axes() {
        assert!(GridSpec::line(1.0, 1.0, 5).is_err());
        assert!(GridSpec::line(0.0, 1.0, 1).is_err());
        assert!(GridSpec::new(vec![0.0; 5], vec![1.0; 5], vec![2; 5]).is_err());
    }

    #[test]
    fn row_major_indexing() {
        let g = GridSpec::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![2, 3]).unwrap();
        assert_eq!(g.strides(), vec![3, 1]);
        assert_eq!(g.multi_index(4), vec![1, 1]);
        assert_eq!(g.flat_index(&[1, 2]), 5);
        assert_eq!(g.node(5), vec![1.0, 2.0]);
    }

    #[test]
    fn weights_sum_to_volume() {
        let g = GridSpec::new(vec![0.0, -1.0], vec![2.0, 1.0], vec![7, 9]).unwrap();
        let total: f64 = g.weights().iter().sum();
        assert!((total - 4.0).abs() < 1e-12);
    }

    #[test]
    fn serde_validates() {
        let bad = r#"{"lo":[1.0],"hi":[0.0],"points":[4]}"#;
        assert!(serde_json::from_str::<GridSpec>(bad).is_err());
        let extra = r#"{"lo":[0.0],"hi":[1.0],"points":[4],"x":1}"#;
        assert!(serde_json::from_str::<GridSpec>(extra).is_err());
    }
}

//! Complex fields sampled on a [`GridSpec`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// A complex function sampled row-major on every node of a grid.
///
/// Construction rejects a length mismatch and any NaN/Inf sample, so every
/// `SampledField` in circulation is valid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl SampledField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!("{} values for a grid of {} nodes", values.len(), grid.len())));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(format!("field value at flat index {i}")));
        }
        Ok(SampledField { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        SampledField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(&grid.node(k))).collect();
        SampledField::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<Complex64>) -> Result<Self> {
        SampledField::new(self.grid.clone(), values)
    }

    pub fn scale(&self, c: Complex64) -> Result<Self> {
        self.with_values(self.values.iter().map(|v| v * c).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Pointwise linear combination `a*self + b*other` on a shared grid.
    pub fn axpby(&self, a: Complex64, other: &SampledField, b: Complex64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::InvalidInput("fields live on different grids".into()));
        }
        self.with_values(self.values.iter().zip(&other.values).map(|(u, v)| a * u + b * v).collect())
    }
}

/// Trapezoid approximation of `(∫|u|²)^{1/2}`, summed serially in row-major
/// order so the result is reproducible bit for bit.
pub fn l2_norm(field: &SampledField) -> f64 {
    weighted_sq_sum(field.grid(), field.values()).sqrt()
}

/// `Σ w_k |v_k|²` with trapezoid weights, serial row-major order.
pub fn weighted_sq_sum(grid: &GridSpec, values: &[Complex64]) -> f64 {
    grid.weights().iter().zip(values).fold(0.0, |acc, (w, v)| acc + w * v.norm_sqr())
}

/// Trapezoid inner product `∫ a conj(b)` (linear in the first slot).
pub fn inner(grid: &GridSpec, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    grid.weights()
        .iter()
        .zip(a.iter().zip(b))
        .fold(Complex64::new(0.0, 0.0), |acc, (w, (x, y))| acc + x * y.conj() * *w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_has_zero_norm() {
        let g = GridSpec::line(-3.0, 5.0, 17).unwrap();
        assert_eq!(l2_norm(&SampledField::zeros(g)), 0.0);
    }

    #[test]
    fn constant_norm_is_exact() {
        let g = GridSpec::line(0.0, 1.0, 1001).unwrap();
        let u = SampledField::from_fn(g, |_| Complex64::new(1.0, 0.0)).unwrap();
        assert!((l2_norm(&u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_norm() {
        let g = GridSpec::line(-12.0, 12.0, 4096).unwrap();
        let u = SampledField::from_fn(g, |x| Complex64::new((-x[0] * x[0] / 2.0).exp(), 0.0)).unwrap();
        let expected = std::f64::consts::PI.powf(0.25);
        assert!((l2_norm(&u) - expected).abs() < 1e-12, "{}", l2_norm(&u));
    }

    #[test]
    fn rejects_non_finite() {
        let g = GridSpec::line(0.0, 1.0, 3).unwrap();
        let vals = vec![Complex64::new(0.0, 0.0), Complex64::new(f64::NAN, 0.0), Complex64::new(0.0, 0.0)];
        assert!(matches!(SampledField::new(g.clone(), vals), Err(Error::NonFinite(_))));
        assert!(SampledField::new(g, vec![Complex64::new(0.0, 0.0); 2]).is_err());
    }

    #[test]
    fn gaussian_norm_in_two_dims() {
        let g = GridSpec::cube(2, -10.0, 10.0, 401).unwrap();
        let u = SampledField::from_fn(g, |x| Complex64::new((-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp(), 0.0)).unwrap();
        assert!((l2_norm(&u) - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }
}

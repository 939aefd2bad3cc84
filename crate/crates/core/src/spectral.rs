//! Periodic spectral calculus on a [`GridSpec`].
//!
//! The box is extended periodically with period `points·spacing` along each
//! axis, so the last node and `lo + period` are distinct.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

/// Fraction of the spectrum (per axis, by `|k|/k_max`) treated as its top band.
pub const TAIL_BAND: f64 = 0.05;

pub struct Spectral {
    grid: GridSpec,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
    k: Vec<Vec<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let mut fwd = Vec::new();
        let mut inv = Vec::new();
        let mut k = Vec::new();
        for axis in 0..grid.dim() {
            let n = grid.points()[axis];
            fwd.push(planner.plan_fft_forward(n));
            inv.push(planner.plan_fft_inverse(n));
            let period = n as f64 * grid.spacing(axis);
            k.push(
                (0..n)
                    .map(|m| {
                        let m = if m <= (n - 1) / 2 { m as f64 } else { m as f64 - n as f64 };
                        2.0 * std::f64::consts::PI * m / period
                    })
                    .collect(),
            );
        }
        Spectral {
            grid: grid.clone(),
            fwd,
            inv,
            k,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Angular wavenumbers along `axis` in FFT order. For even counts the
    /// Nyquist mode is assigned the negative frequency.
    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.k[axis]
    }

    pub fn k_max(&self, axis: usize) -> f64 {
        std::f64::consts::PI / self.grid.spacing(axis)
    }

    fn is_nyquist(&self, axis: usize, m: usize) -> bool {
        let n = self.grid.points()[axis];
        n.is_multiple_of(2) && m == n / 2
    }

    fn transform(&self, v: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let pts = self.grid.points();
        let strides = self.grid.strides();
        for (axis, plan) in plans.iter().enumerate() {
            let n = pts[axis];
            let stride = strides[axis];
            if stride == 1 {
                for chunk in v.chunks_mut(n) {
                    plan.process(chunk);
                }
            } else {
                let mut line = vec![Complex64::new(0.0, 0.0); n];
                let outer = v.len() / (n * stride);
                for o in 0..outer {
                    for inner in 0..stride {
                        let base = o * n * stride + inner;
                        for (i, l) in line.iter_mut().enumerate() {
                            *l = v[base + i * stride];
                        }
                        plan.process(&mut line);
                        for (i, l) in line.iter().enumerate() {
                            v[base + i * stride] = *l;
                        }
                    }
                }
            }
        }
    }

    /// Unnormalized forward DFT in place.
    pub fn forward(&self, v: &mut [Complex64]) {
        self.transform(v, &self.fwd);
    }

    /// Inverse DFT in place, normalized so that `inverse∘forward = id`.
    pub fn inverse(&self, v: &mut [Complex64]) {
        self.transform(v, &self.inv);
        let s = 1.0 / v.len() as f64;
        for z in v.iter_mut() {
            *z *= s;
        }
    }

    /// Multiplies the spectrum by `m(k)` and transforms back.
    pub fn apply_multiplier(&self, v: &[Complex64], m: impl Fn(&[f64]) -> Complex64) -> Vec<Complex64> {
        let mut w = v.to_vec();
        self.forward(&mut w);
        let mut kk = vec![0.0; self.grid.dim()];
        for (flat, z) in w.iter_mut().enumerate() {
            let idx = self.grid.multi_index(flat);
            for (a, &i) in idx.iter().enumerate() {
                kk[a] = self.k[a][i];
            }
            *z *= m(&kk);
        }
        self.inverse(&mut w);
        w
    }

    /// `D^α v` with `D_j = −i∂_j`. Odd powers annihilate the Nyquist mode.
    pub fn derivative(&self, v: &[Complex64], alpha: &[usize]) -> Vec<Complex64> {
        let mut w = v.to_vec();
        self.forward(&mut w);
        for (flat, z) in w.iter_mut().enumerate() {
            let idx = self.grid.multi_index(flat);
            let mut f = 1.0;
            for (a, &i) in idx.iter().enumerate() {
                if alpha[a] % 2 == 1 && self.is_nyquist(a, i) {
                    f = 0.0;
                } else {
                    f *= self.k[a][i].powi(alpha[a] as i32);
                }
            }
            *z *= f;
        }
        self.inverse(&mut w);
        w
    }

    /// Fraction of `Σ|v̂|²` carried by modes in the top band of any axis.
    pub fn tail_fraction(&self, v: &[Complex64]) -> f64 {
        let mut w = v.to_vec();
        self.forward(&mut w);
        let mut total = 0.0;
        let mut tail = 0.0;
        for (flat, z) in w.iter().enumerate() {
            let e = z.norm_sqr();
            total += e;
            let idx = self.grid.multi_index(flat);
            if idx
                .iter()
                .enumerate()
                .any(|(a, &i)| self.k[a][i].abs() > (1.0 - TAIL_BAND) * self.k_max(a))
            {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_wave_derivatives() {
        let g = GridSpec::from_spacing(&[0.0], &[2.0 * std::f64::consts::PI / 64.0], &[64]).unwrap();
        let sp = Spectral::new(&g);
        let u: Vec<Complex64> = g.axis(0).iter().map(|&x| Complex64::new(0.0, 5.0 * x).exp()).collect();
        let d2 = sp.derivative(&u, &[2]);
        for (a, b) in d2.iter().zip(&u) {
            assert!((a - b * 25.0).norm() < 1e-11);
        }
        assert!(sp.tail_fraction(&u) < 1e-25);
    }

    #[test]
    fn two_d_mixed_derivative() {
        let p = 2.0 * std::f64::consts::PI;
        let g = GridSpec::from_spacing(&[0.0, 0.0], &[p / 32.0, p / 16.0], &[32, 16]).unwrap();
        let sp = Spectral::new(&g);
        let u: Vec<Complex64> = (0..g.len())
            .map(|i| {
                let x = g.node(i);
                Complex64::new(0.0, 3.0 * x[0] - 2.0 * x[1]).exp()
            })
            .collect();
        let d = sp.derivative(&u, &[1, 1]);
        for (a, b) in d.iter().zip(&u) {
            assert!((a + b * 6.0).norm() < 1e-11);
        }
        let mut w = u.clone();
        sp.forward(&mut w);
        sp.inverse(&mut w);
        assert!(w.iter().zip(&u).all(|(a, b)| (a - b).norm() < 1e-14));
    }
}

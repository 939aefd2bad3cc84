//! Bicharacteristics of `p(x,ξ) = ½ Σ a_{jk}(x) ξ_j ξ_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::jet::{bracket, Coefficient, Jet, JetOracle};
use crate::ode::{integrate, Tolerance};
use crate::params::GevreyParams;

/// Largest admissible relative energy drift along an accepted trajectory.
pub const ENERGY_DRIFT_LIMIT: f64 = 1e-8;

/// A symmetric metric; only the upper triangle is stored, so symmetry holds
/// by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMetric", into = "RawMetric")]
pub struct Metric {
    dim: usize,
    /// `a11` (n = 1) or `a11, a12, a22` (n = 2).
    upper: Vec<Jet>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetric {
    dim: usize,
    upper: Vec<Coefficient>,
}

impl TryFrom<RawMetric> for Metric {
    type Error = Error;
    fn try_from(r: RawMetric) -> Result<Self> {
        Metric::new(r.dim, r.upper)
    }
}

impl From<Metric> for RawMetric {
    fn from(m: Metric) -> Self {
        RawMetric {
            dim: m.dim,
            upper: m.upper.into_iter().map(|j| j.family).collect(),
        }
    }
}

impl Metric {
    /// Validates positive definiteness on a coarse sample of `[-10, 10]^n`.
    pub fn new(dim: usize, upper: Vec<Coefficient>) -> Result<Self> {
        let expected = dim * (dim + 1) / 2;
        if !(dim == 1 || dim == 2) || upper.len() != expected {
            return Err(Error::InvalidInput(format!(
                "metric of dimension {dim} needs {expected} upper-triangle entries"
            )));
        }
        let m = Metric {
            dim,
            upper: upper.into_iter().map(|c| Jet::new(dim, c)).collect(),
        };
        let sample = GridSpec::cube(dim, -10.0, 10.0, if dim == 1 { 201 } else { 41 })?;
        for k in 0..sample.len() {
            let x = sample.node(k);
            let ev = m.min_eigenvalue(&x)?;
            if !(ev > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "metric is not positive definite at {x:?} (min eigenvalue {ev})"
                )));
            }
        }
        Ok(m)
    }

    pub fn flat(dim: usize) -> Self {
        let upper = if dim == 1 {
            vec![Coefficient::Constant { value: 1.0 }]
        } else {
            vec![
                Coefficient::Constant { value: 1.0 },
                Coefficient::Zero,
                Coefficient::Constant { value: 1.0 },
            ]
        };
        Metric {
            dim,
            upper: upper.into_iter().map(|c| Jet::new(dim, c)).collect(),
        }
    }

    /// `a_{jk} = (1 + g(x)) δ_{jk}`.
    pub fn conformal(dim: usize, g: Coefficient) -> Result<Self> {
        let diag = Coefficient::Sum {
            terms: vec![Coefficient::Constant { value: 1.0 }, g],
        };
        let upper = if dim == 1 {
            vec![diag]
        } else {
            vec![diag.clone(), Coefficient::Zero, diag]
        };
        Metric::new(dim, upper)
    }

    /// `1 + amplitude·⟨x⟩^{−power}` (n = 1).
    pub fn bracket_perturbation(amplitude: f64, power: f64) -> Result<Self> {
        Metric::conformal(
            1,
            Coefficient::Bracket {
                amplitude,
                center: vec![0.0],
                power: -power,
            },
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn slot(&self, j: usize, k: usize) -> usize {
        let (a, b) = if j <= k { (j, k) } else { (k, j) };
        if self.dim == 1 {
            0
        } else {
            a * 2 + b - a * (a + 1) / 2
        }
    }

    /// The jet of `a_{jk}` (same object as `a_{kj}`).
    pub fn entry(&self, j: usize, k: usize) -> &Jet {
        &self.upper[self.slot(j, k)]
    }

    /// `a_{jk} − δ_{jk}` as a coefficient family.
    pub fn perturbation(&self, j: usize, k: usize) -> Coefficient {
        let a = self.entry(j, k).family.clone();
        if j == k {
            Coefficient::Sum {
                terms: vec![a, Coefficient::Constant { value: -1.0 }],
            }
        } else {
            a
        }
    }

    pub fn is_flat(&self) -> bool {
        (0..self.dim).all(|j| (0..self.dim).all(|k| self.entry(j, k).family.as_constant() == Some(if j == k { 1.0 } else { 0.0 })))
    }

    pub fn matrix(&self, x: &[f64]) -> Result<[[f64; 2]; 2]> {
        let mut a = [[0.0; 2]; 2];
        for j in 0..self.dim {
            for k in j..self.dim {
                let v = self.entry(j, k).value(x)?;
                a[j][k] = v;
                a[k][j] = v;
            }
        }
        Ok(a)
    }

    pub fn min_eigenvalue(&self, x: &[f64]) -> Result<f64> {
        let a = self.matrix(x)?;
        Ok(if self.dim == 1 {
            a[0][0]
        } else {
            let tr = a[0][0] + a[1][1];
            let det = a[0][0] * a[1][1] - a[0][1] * a[0][1];
            tr / 2.0 - ((tr / 2.0).powi(2) - det).max(0.0).sqrt()
        })
    }

    /// Worst ratio `|a_{jk}(x) − δ_{jk}| / (C0 ⟨x⟩^{−σ})` over the points.
    pub fn envelope_ratio(&self, params: &GevreyParams, points: &[Vec<f64>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for x in points {
            let a = self.matrix(x)?;
            for j in 0..self.dim {
                for k in 0..self.dim {
                    let d = (a[j][k] - if j == k { 1.0 } else { 0.0 }).abs();
                    if d > 0.0 {
                        worst = worst.max(d / (params.c0() * bracket(x).powf(-params.sigma())));
                    }
                }
            }
        }
        Ok(worst)
    }

    /// `sup |a_{jk} − δ_{jk}|` over the points.
    pub fn perturbation_sup(&self, points: &[Vec<f64>]) -> Result<f64> {
        let mut m: f64 = 0.0;
        for x in points {
            let a = self.matrix(x)?;
            for j in 0..self.dim {
                for k in 0..self.dim {
                    m = m.max((a[j][k] - if j == k { 1.0 } else { 0.0 }).abs());
                }
            }
        }
        Ok(m)
    }
}

/// `p(x, ξ)`.
pub fn hamiltonian(metric: &Metric, x: &[f64], xi: &[f64]) -> Result<f64> {
    let n = metric.dim();
    if x.len() != n || xi.len() != n {
        return Err(Error::InvalidInput(format!("x and xi must have {n} components")));
    }
    let a = metric.matrix(x)?;
    let mut p = 0.0;
    for j in 0..n {
        for k in 0..n {
            p += a[j][k] * xi[j] * xi[k];
        }
    }
    Ok(0.5 * p)
}

/// `(∂_ξ p, ∂_x p)` with the exact first-order jets of the metric.
pub fn hamilton_gradient(metric: &Metric, x: &[f64], xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = metric.dim();
    let a = metric.matrix(x)?;
    let dxi: Vec<f64> = (0..n).map(|j| (0..n).map(|k| a[j][k] * xi[k]).sum()).collect();
    let mut dx = vec![0.0; n];
    for j in 0..n {
        for k in j..n {
            let g = metric.entry(j, k).gradient(x)?;
            let w = if j == k { 0.5 * xi[j] * xi[k] } else { xi[j] * xi[k] };
            for (d, gi) in dx.iter_mut().zip(&g) {
                *d += w * gi;
            }
        }
    }
    Ok((dxi, dx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bicharacteristic {
    /// Sample times, starting at `0`.
    pub times: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
    pub energy: f64,
    pub energy_drift: f64,
}

impl Bicharacteristic {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with columns `t, y…, η…, p`.
    pub fn to_csv(&self, metric: &Metric) -> Result<String> {
        let n = metric.dim();
        let mut out = String::from("t");
        for j in 0..n {
            out.push_str(&format!(",y{j}"));
        }
        for j in 0..n {
            out.push_str(&format!(",eta{j}"));
        }
        out.push_str(",p\n");
        for i in 0..self.len() {
            out.push_str(&format!("{:.17e}", self.times[i]));
            for v in self.y[i].iter().chain(&self.eta[i]) {
                out.push_str(&format!(",{v:.17e}"));
            }
            out.push_str(&format!(",{:.17e}\n", hamiltonian(metric, &self.y[i], &self.eta[i])?));
        }
        Ok(out)
    }
}

/// Integrates the Hamilton system from `(y0, η0)` at `t = 0` through the
/// given sample times (monotone, either direction).
pub fn integrate_flow(metric: &Metric, y0: &[f64], eta0: &[f64], times: &[f64], tol: f64) -> Result<Bicharacteristic> {
    let n = metric.dim();
    if y0.len() != n || eta0.len() != n {
        return Err(Error::InvalidInput(format!("initial data must have {n} components")));
    }
    if !(1e-12..=1e-6).contains(&tol) {
        return Err(Error::Parameter(format!("tolerance {tol} outside [1e-12, 1e-6]")));
    }
    let state0: Vec<f64> = y0.iter().chain(eta0).copied().collect();
    let rhs = |_t: f64, s: &[f64], d: &mut [f64]| -> Result<()> {
        let (dxi, dx) = hamilton_gradient(metric, &s[..n], &s[n..])?;
        d[..n].copy_from_slice(&dxi);
        for j in 0..n {
            d[n + j] = -dx[j];
        }
        Ok(())
    };
    let mut samples: Vec<f64> = times.to_vec();
    let starts_at_zero = samples.first() == Some(&0.0);
    if starts_at_zero {
        samples.remove(0);
    }
    let states = integrate(rhs, 0.0, &state0, &samples, Tolerance::new(tol))?;
    let mut all = Vec::with_capacity(times.len());
    if starts_at_zero {
        all.push(state0.clone());
    }
    all.extend(states);
    let p0 = hamiltonian(metric, y0, eta0)?;
    let mut drift: f64 = 0.0;
    for s in &all {
        let p = hamiltonian(metric, &s[..n], &s[n..])?;
        drift = drift.max(if p0 > 0.0 { (p - p0).abs() / p0 } else { (p - p0).abs() });
    }
    if drift > ENERGY_DRIFT_LIMIT {
        return Err(Error::EnergyDrift {
            drift,
            limit: ENERGY_DRIFT_LIMIT,
        });
    }
    Ok(Bicharacteristic {
        times: times.to_vec(),
        y: all.iter().map(|s| s[..n].to_vec()).collect(),
        eta: all.iter().map(|s| s[n..].to_vec()).collect(),
        energy: p0,
        energy_drift: drift,
    })
}

/// Backward bicharacteristic sampled every `dt` on `[t_end, 0]`.
pub fn integrate_backward(metric: &Metric, y0: &[f64], eta0: &[f64], t_end: f64, dt: f64, tol: f64) -> Result<Bicharacteristic> {
    if !(t_end < 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidInput("need t_end < 0 and dt > 0".into()));
    }
    if eta0.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidInput("eta0 must be nonzero".into()));
    }
    let steps = (-t_end / dt).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=steps).map(|i| if i == steps { t_end } else { -(i as f64) * dt }).collect();
    integrate_flow(metric, y0, eta0, &times, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrapVerdict {
    Nontrapping,
    TrappedSoFar,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NontrapReport {
    pub verdict: TrapVerdict,
    pub escape_time: Option<f64>,
    pub eta_minus: Option<Vec<f64>>,
    /// `|η(horizon) − η(horizon/2)|`.
    pub eta_change: Option<f64>,
}

/// Finite-horizon nontrapping verdict.
///
/// Nontrapping when `|y|` has passed `escape_radius` and grows monotonically
/// from some escape time on, with that escape time in the first half of the
/// horizon; trapped-so-far when `|y|` never reaches the radius; inconclusive
/// otherwise.
pub fn classify_nontrapping(traj: &Bicharacteristic, escape_radius: f64, horizon: f64) -> Result<NontrapReport> {
    let last = *traj.times.last().ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
    if !(horizon < 0.0) || last > horizon + 1e-12 {
        return Err(Error::InvalidInput(format!("trajectory ends at {last}, horizon {horizon} not covered")));
    }
    let idx: Vec<usize> = (0..traj.len()).filter(|&i| traj.times[i] >= horizon - 1e-12).collect();
    let norms: Vec<f64> = idx.iter().map(|&i| traj.y[i].iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    if norms.iter().all(|&r| r < escape_radius) {
        return Ok(NontrapReport {
            verdict: TrapVerdict::TrappedSoFar,
            escape_time: None,
            eta_minus: None,
            eta_change: None,
        });
    }
    // earliest position from which |y| stays beyond the radius and keeps growing
    let mut start = norms.len();
    for i in (0..norms.len()).rev() {
        let ok = norms[i] >= escape_radius && (i + 1 == norms.len() || norms[i + 1] >= norms[i]);
        if !ok {
            break;
        }
        start = i;
    }
    if start == norms.len() {
        return Ok(NontrapReport {
            verdict: TrapVerdict::Inconclusive,
            escape_time: None,
            eta_minus: None,
            eta_change: None,
        });
    }
    let t_escape = traj.times[idx[start]];
    if t_escape < horizon / 2.0 {
        return Ok(NontrapReport {
            verdict: TrapVerdict::Inconclusive,
            escape_time: Some(t_escape),
            eta_minus: None,
            eta_change: None,
        });
    }
    let i_end = *idx.last().unwrap();
    let i_half = idx
        .iter()
        .copied()
        .min_by(|&a, &b| (traj.times[a] - horizon / 2.0).abs().total_cmp(&(traj.times[b] - horizon / 2.0).abs()))
        .unwrap();
    let eta_minus = traj.eta[i_end].clone();
    let change = eta_minus.iter().zip(&traj.eta[i_half]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(NontrapReport {
        verdict: TrapVerdict::Nontrapping,
        escape_time: Some(t_escape),
        eta_minus: Some(eta_minus),
        eta_change: Some(change),
    })
}

impl NontrapReport {
    /// JSON verdict `{nontrapping, verdict, eta_minus, eta_change, energy_drift}`.
    pub fn verdict_json(&self, energy_drift: f64) -> serde_json::Value {
        serde_json::json!({
            "nontrapping": self.verdict == TrapVerdict::Nontrapping,
            "verdict": self.verdict,
            "escape_time": self.escape_time,
            "eta_minus": self.eta_minus,
            "eta_change": self.eta_change,
            "energy_drift": energy_drift,
        })
    }
}

/// `η(−T)` at `T = horizon·2^k`, `k = 0..=doublings`, from one backward run,
/// with the successive changes `|η(−2T) − η(−T)|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumConvergence {
    pub horizons: Vec<f64>,
    pub eta: Vec<Vec<f64>>,
    pub changes: Vec<f64>,
    pub energy_drift: f64,
}

impl MomentumConvergence {
    pub fn monotone(&self) -> bool {
        self.changes.windows(2).all(|w| w[1] < w[0])
    }
}

pub fn momentum_convergence(metric: &Metric, y0: &[f64], eta0: &[f64], horizon: f64, doublings: usize, tol: f64) -> Result<MomentumConvergence> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    let horizons: Vec<f64> = (0..=doublings).map(|k| horizon * 2f64.powi(k as i32)).collect();
    let times: Vec<f64> = horizons.iter().map(|t| -t).collect();
    let tr = integrate_flow(metric, y0, eta0, &times, tol)?;
    let changes = tr
        .eta
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .collect();
    Ok(MomentumConvergence {
        horizons,
        eta: tr.eta,
        changes,
        energy_drift: tr.energy_drift,
    })
}

/// Membership in `Γ_ε = ∪_{t≤0} {x : |x − y(t)| ≤ ε(1+|t|)}` over the
/// sampled times, dilated by half the largest gap between consecutive
/// samples so the test errs on the side of inclusion.
pub fn corridor_contains(traj: &Bicharacteristic, eps: f64, x: &[f64]) -> bool {
    let dil = corridor_dilation(traj, eps);
    traj.times.iter().zip(&traj.y).any(|(t, y)| {
        let d = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        d <= eps * (1.0 + t.abs()) + dil
    })
}

fn corridor_dilation(traj: &Bicharacteristic, eps: f64) -> f64 {
    let mut gap: f64 = 0.0;
    for i in 1..traj.len() {
        let dy = traj.y[i].iter().zip(&traj.y[i - 1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        gap = gap.max(dy + eps * (traj.times[i] - traj.times[i - 1]).abs());
    }
    0.5 * gap
}

/// Grid indicator of the corridor, row-major over `grid`.
pub fn corridor_mask(traj: &Bicharacteristic, eps: f64, grid: &GridSpec) -> Vec<bool> {
    (0..grid.len()).map(|k| corridor_contains(traj, eps, &grid.node(k))).collect()
}

/// Radius of a stable circular orbit of the conformal metric `1 + g(|x|)`
/// in the plane: a local minimum of `(1+g)/r²` on `(r_lo, r_hi)` located by
/// bisection on the derivative. Initial data `((r,0), (0,1))` then stays on
/// the circle.
pub fn stable_circular_orbit(metric: &Metric, r_lo: f64, r_hi: f64) -> Result<Option<f64>> {
    if metric.dim() != 2 {
        return Err(Error::InvalidInput("circular orbits need a planar metric".into()));
    }
    // d/dr (g/r²) ∝ r g'(r) − 2 g(r), sampled along the first axis
    let f = |r: f64| -> Result<f64> {
        let a = metric.entry(0, 0);
        let v = a.value(&[r, 0.0])?;
        let d = a.gradient(&[r, 0.0])?[0];
        Ok(r * d - 2.0 * v)
    };
    let n = 2000;
    let mut prev = f(r_lo)?;
    for i in 1..=n {
        let r = r_lo + (r_hi - r_lo) * i as f64 / n as f64;
        let cur = f(r)?;
        if prev < 0.0 && cur >= 0.0 {
            let (mut a, mut b) = (r - (r_hi - r_lo) / n as f64, r);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if f(m)? < 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Ok(Some(0.5 * (a + b)));
        }
        prev = cur;
    }
    Ok(None)
}

/// Planar conformal metric with a radial ring bump strong enough to hold a
/// stable circular orbit.
pub fn trapping_metric() -> Result<Metric> {
    Metric::conformal(
        2,
        Coefficient::Ring {
            amplitude: 2.0,
            radius: 1.0,
            width: 0.5,
        },
    )
}

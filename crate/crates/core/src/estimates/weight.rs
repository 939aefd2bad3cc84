//! The transport weight `ψ = δφ(t/h, x, ξ)` and the cutoff `f`.

use serde::{Deserialize, Serialize};

use super::step::GevreyStep;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::hamflow::{hamilton_gradient, Metric};
use crate::jet::bracket;

/// A phase-space weight with gradients and a gradient cap `ν`.
pub trait PhaseWeight: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64], xi: &[f64]) -> f64;
    /// `(∂_x ψ, ∂_ξ ψ)`.
    fn gradient(&self, x: &[f64], xi: &[f64]) -> (Vec<f64>, Vec<f64>);
    /// Strict upper bound for `|∂_x ψ|` and `|∂_ξ ψ|`.
    fn nu(&self) -> f64;
    /// Center `(x, ξ)` and half-widths of a box holding the support;
    /// `None` when the weight vanishes identically.
    fn support_box(&self) -> Option<(Vec<f64>, Vec<f64>, f64, f64)>;
    /// Sampled (W1) verdict in the `T_{h,μ}` phase space.
    fn satisfies_w1(&self, mu: f64, k0: f64) -> Result<bool>;
}

/// `ψ ≡ 0` with a nominal gradient cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroWeight {
    pub dim: usize,
    pub nu: f64,
}

impl PhaseWeight for ZeroWeight {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _: &[f64], _: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, _: &[f64], _: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.dim], vec![0.0; self.dim])
    }
    fn nu(&self) -> f64 {
        self.nu
    }
    fn support_box(&self) -> Option<(Vec<f64>, Vec<f64>, f64, f64)> {
        None
    }
    fn satisfies_w1(&self, _: f64, _: f64) -> Result<bool> {
        Ok(true)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `φ(τ,x,ξ) = χ₁(|x−τξ|/(δ₁|τ|)) χ₁(|ξ−η₋|/δ₁)` for `τ < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transport {
    pub delta1: f64,
    pub eta_minus: Vec<f64>,
    pub step: GevreyStep,
}

/// Values and first derivatives of `φ` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportJet {
    pub value: f64,
    pub dx: Vec<f64>,
    pub dxi: Vec<f64>,
    pub dtau: f64,
}

impl Transport {
    pub fn eval(&self, tau: f64, x: &[f64], xi: &[f64]) -> TransportJet {
        let n = x.len();
        let d1 = self.delta1;
        let at = tau.abs();
        let z: Vec<f64> = (0..n).map(|j| x[j] - tau * xi[j]).collect();
        let e: Vec<f64> = (0..n).map(|j| xi[j] - self.eta_minus[j]).collect();
        let (nz, ne) = (norm(&z), norm(&e));
        let r1 = nz / (d1 * at);
        let r2 = ne / d1;
        let c1 = self.step.derivatives(r1, 1);
        let c2 = self.step.derivatives(r2, 1);
        let value = c1[0] * c2[0];
        let mut dx = vec![0.0; n];
        let mut dxi = vec![0.0; n];
        let mut dtau = 0.0;
        if c1[1] != 0.0 && nz > 0.0 {
            let k = c1[1] * c2[0] / (d1 * at);
            let mut zxi = 0.0;
            for j in 0..n {
                let u = z[j] / nz;
                dx[j] += k * u;
                dxi[j] -= k * tau * u;
                zxi += u * xi[j];
            }
            // ∂_τ r1 = (−u·ξ/δ₁ + r1)/|τ| for τ < 0
            dtau = c1[1] * c2[0] * (-zxi / d1 + r1) / at;
        }
        if c2[1] != 0.0 && ne > 0.0 {
            let k = c1[0] * c2[1] / d1;
            for j in 0..n {
                dxi[j] += k * e[j] / ne;
            }
        }
        TransportJet { value, dx, dxi, dtau }
    }

    /// `sup |χ₁′(r1)|χ₁(r2) + χ₁(r1)|χ₁′(r2)|` over `[½,1]²`, sampled.
    fn mixed_slope(&self) -> f64 {
        let m = 200;
        let vals: Vec<(f64, f64)> = (0..=m)
            .map(|i| {
                let r = 0.5 + 0.5 * i as f64 / m as f64;
                (self.step.eval(r), self.step.derivative(r).abs())
            })
            .collect();
        let mut best: f64 = 0.0;
        for a in &vals {
            for b in &vals {
                best = best.max(a.1 * b.0 + a.0 * b.1);
            }
        }
        best
    }
}

/// `ψ(x,ξ) = δ φ(t/h, x, ξ)` frozen at a time `t < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportWeight {
    pub t: f64,
    pub h: f64,
    pub delta: f64,
    pub transport: Transport,
    nu: f64,
}

/// Default `δ` as a fraction of [`TransportWeight::max_delta`].
pub const DEFAULT_DELTA_FRACTION: f64 = 0.5;

/// `(s−1)/(4(K0ν)^{1/(s−1)})`, the cap on `sup ψ`.
pub fn size_cap(s: f64, k0: f64, nu: f64) -> f64 {
    (s - 1.0) / (4.0 * (k0 * nu).powf(1.0 / (s - 1.0)))
}

impl TransportWeight {
    /// Builds the weight with `δ₁ = δ/4`, a gradient cap `ν` from the
    /// step's slope, and enforces the size cap for the given `K0`.
    pub fn new(t: f64, h: f64, delta: f64, eta_minus: &[f64], step: &GevreyStep, k0: f64) -> Result<Self> {
        if !(t < 0.0) || !(h > 0.0 && h <= 1.0) || !(delta > 0.0) || !(k0 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "need t < 0, h in (0,1], delta > 0, K0 > 0 (t={t}, h={h}, delta={delta})"
            )));
        }
        if norm(eta_minus) <= delta {
            return Err(Error::InvalidInput(format!(
                "|eta_minus| = {} must exceed delta = {delta}",
                norm(eta_minus)
            )));
        }
        let transport = Transport {
            delta1: delta / 4.0,
            eta_minus: eta_minus.to_vec(),
            step: step.clone(),
        };
        let nu = Self::gradient_cap(&transport, delta, (t / h).abs());
        let s = step.s();
        let cap = size_cap(s, k0, nu);
        if delta >= cap {
            // ν ∝ δ/δ₁ is independent of δ, so the cap is the largest admissible δ
            return Err(Error::Parameter(format!(
                "delta = {delta} violates the weight size cap; the largest admissible delta is {cap:.6}"
            )));
        }
        Ok(TransportWeight { t, h, delta, transport, nu })
    }

    fn gradient_cap(tr: &Transport, delta: f64, at: f64) -> f64 {
        let ratio = delta / tr.delta1;
        let gx = ratio * tr.step.max_slope() / at;
        let gxi = ratio * tr.mixed_slope();
        1.01 * gx.max(gxi)
    }

    /// Largest admissible `δ` for the given step and `K0` (any `t`, `h`
    /// with `|t|/h ≥ 1`).
    pub fn max_delta(step: &GevreyStep, k0: f64) -> f64 {
        let tr = Transport {
            delta1: 0.25,
            eta_minus: vec![0.0],
            step: step.clone(),
        };
        size_cap(step.s(), k0, Self::gradient_cap(&tr, 1.0, 1.0))
    }

    pub fn tau(&self) -> f64 {
        self.t / self.h
    }

    pub fn eta_minus(&self) -> &[f64] {
        &self.transport.eta_minus
    }

    /// `∂_t ψ = (δ/h) ∂_τ φ`.
    pub fn time_derivative(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.delta / self.h * self.transport.eval(self.tau(), x, xi).dtau
    }

    /// Center `(τη₋, η₋)` and half-widths `(2δ₁|τ|, δ₁)` of a box holding the support.
    pub fn support(&self) -> (Vec<f64>, Vec<f64>, f64, f64) {
        let tau = self.tau();
        let d1 = self.transport.delta1;
        let e = &self.transport.eta_minus;
        (e.iter().map(|v| tau * v).collect(), e.clone(), 2.0 * d1 * tau.abs(), d1)
    }
}

impl PhaseWeight for TransportWeight {
    fn dim(&self) -> usize {
        self.transport.eta_minus.len()
    }
    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.delta * self.transport.eval(self.tau(), x, xi).value
    }
    fn gradient(&self, x: &[f64], xi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let j = self.transport.eval(self.tau(), x, xi);
        (
            j.dx.iter().map(|v| v * self.delta).collect(),
            j.dxi.iter().map(|v| v * self.delta).collect(),
        )
    }
    fn nu(&self) -> f64 {
        self.nu
    }
    fn support_box(&self) -> Option<(Vec<f64>, Vec<f64>, f64, f64)> {
        Some(self.support())
    }
    fn satisfies_w1(&self, mu: f64, k0: f64) -> Result<bool> {
        Ok(validate_w1(self, mu, k0, 64)?.pass)
    }
}

/// `f = χ₂(|μx|)² χ₂(|ξ|)²`, so that `√f = χ₂(|μx|) χ₂(|ξ|)` is smooth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffF {
    pub mu: f64,
    pub a: f64,
    pub step: GevreyStep,
}

impl CutoffF {
    pub fn new(mu: f64, a: f64, step: &GevreyStep) -> Result<Self> {
        if !(mu > 0.0 && mu <= 1.0) || !(a > 1.0) {
            return Err(Error::InvalidInput(format!("need mu in (0,1] and A > 1 (mu={mu}, A={a})")));
        }
        Ok(CutoffF { mu, a, step: step.clone() })
    }

    pub fn sqrt(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.step.plateau(self.a, self.mu * norm(x)) * self.step.plateau(self.a, norm(xi))
    }

    pub fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.sqrt(x, xi).powi(2)
    }

    /// `C₂` of the support annulus.
    pub fn c2(&self) -> f64 {
        2.0 * self.a + 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<(String, bool)>,
    pub pass: bool,
}

impl ValidationReport {
    fn new(checks: Vec<(String, bool)>) -> Self {
        let pass = checks.iter().all(|c| c.1);
        ValidationReport { checks, pass }
    }
}

/// Sample grid covering the weight's support box, enlarged by 25%, with
/// `per_axis` points on each of the `2n` axes.
pub fn support_samples(w: &TransportWeight, per_axis: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let (xc, xic, rx, rxi) = w.support();
    let n = xc.len();
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for j in 0..n {
        lo.push(xc[j] - 1.25 * rx);
        hi.push(xc[j] + 1.25 * rx);
    }
    for j in 0..n {
        lo.push(xic[j] - 1.25 * rxi);
        hi.push(xic[j] + 1.25 * rxi);
    }
    let g = GridSpec::new(lo, hi, vec![per_axis; 2 * n])?;
    Ok((0..g.len())
        .map(|k| {
            let p = g.node(k);
            (p[..n].to_vec(), p[n..].to_vec())
        })
        .collect())
}

/// Sampled (W1) check for a weight in the `T_{h,μ}` phase space.
pub fn validate_w1(w: &TransportWeight, mu: f64, k0: f64, per_axis: usize) -> Result<ValidationReport> {
    let pts = support_samples(w, per_axis)?;
    let nu = w.nu();
    let (xc, xic, rx, rxi) = w.support();
    let c1 = {
        // annulus constant covering the support box
        let xi_lo = norm(&xic) - rxi;
        let xi_hi = norm(&xic) + rxi;
        let x_lo = (norm(&xc) - rx).max(0.0);
        let x_hi = norm(&xc) + rx;
        let bx_lo = (1.0 + x_lo * x_lo).sqrt();
        let bx_hi = (1.0 + x_hi * x_hi).sqrt();
        [1.0 / xi_lo, xi_hi, 1.0 / (mu * bx_lo), bx_hi * mu].into_iter().fold(1.0f64, f64::max) * 1.0001
    };
    let mut grad_ok = true;
    let mut size_ok = true;
    let mut support_ok = true;
    let mut sup_psi: f64 = 0.0;
    for (x, xi) in &pts {
        let v = w.value(x, xi);
        sup_psi = sup_psi.max(v.abs());
        let (gx, gxi) = w.gradient(x, xi);
        if !(norm(&gx) < nu && norm(&gxi) < nu) {
            grad_ok = false;
        }
        if v != 0.0 {
            let bx = bracket(x);
            let ax = norm(xi);
            if !(ax >= 1.0 / c1 && ax <= c1 && bx >= 1.0 / (c1 * mu) && bx <= c1 / mu) {
                support_ok = false;
            }
            // outside the box the weight must vanish
            let inside = x.iter().zip(&xc).all(|(a, b)| (a - b).abs() <= rx) && xi.iter().zip(&xic).all(|(a, b)| (a - b).abs() <= rxi);
            support_ok &= inside;
        }
    }
    if !(sup_psi < size_cap(w.transport.step.s(), k0, nu)) {
        size_ok = false;
    }
    Ok(ValidationReport::new(vec![
        ("gradient_cap".into(), grad_ok),
        ("size_cap".into(), size_ok),
        ("support_annulus".into(), support_ok),
    ]))
}

/// Sampled (W2) check: `0 ≤ f ≤ 1`, `f ≡ 1` on the weight's support.
pub fn validate_w2(f: &CutoffF, w: &TransportWeight, per_axis: usize) -> Result<ValidationReport> {
    let pts = support_samples(w, per_axis)?;
    let mut one_ok = true;
    let mut range_ok = true;
    for (x, xi) in &pts {
        let v = f.value(x, xi);
        range_ok &= (0.0..=1.0).contains(&v);
        if w.value(x, xi) != 0.0 {
            one_ok &= v == 1.0;
        }
    }
    Ok(ValidationReport::new(vec![
        ("unit_on_weight_support".into(), one_ok),
        ("range".into(), range_ok),
    ]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportReport {
    pub times: Vec<f64>,
    /// `max (∂_τφ + H_pφ)·|τ|^{1+σ}` per time.
    pub scaled_max: Vec<f64>,
}

impl TransportReport {
    pub fn max(&self) -> f64 {
        self.scaled_max.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `(∂_τφ + H_pφ)|τ|^{1+σ}` maximized over a sample grid of the support
/// of `φ(τ,·,·)` for each `τ`.
pub fn check_transport_inequality(transport: &Transport, metric: &Metric, sigma: f64, times: &[f64], per_axis: usize) -> Result<TransportReport> {
    let n = metric.dim();
    if transport.eta_minus.len() != n {
        return Err(Error::InvalidInput("weight and metric dimensions differ".into()));
    }
    let mut scaled_max = Vec::with_capacity(times.len());
    for &tau in times {
        if !(tau < 0.0) {
            return Err(Error::InvalidInput("transport times must be negative".into()));
        }
        let d1 = transport.delta1;
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for j in 0..n {
            lo.push(tau * transport.eta_minus[j] - 2.5 * d1 * tau.abs());
            hi.push(tau * transport.eta_minus[j] + 2.5 * d1 * tau.abs());
        }
        for j in 0..n {
            lo.push(transport.eta_minus[j] - 1.25 * d1);
            hi.push(transport.eta_minus[j] + 1.25 * d1);
        }
        let g = GridSpec::new(lo, hi, vec![per_axis; 2 * n])?;
        let mut best = f64::NEG_INFINITY;
        for k in 0..g.len() {
            let p = g.node(k);
            let (x, xi) = (&p[..n], &p[n..]);
            let j = transport.eval(tau, x, xi);
            let (dp_dxi, dp_dx) = hamilton_gradient(metric, x, xi)?;
            let hp: f64 = (0..n).map(|i| dp_dxi[i] * j.dx[i] - dp_dx[i] * j.dxi[i]).sum();
            best = best.max((j.dtau + hp) * tau.abs().powf(1.0 + sigma));
        }
        scaled_max.push(best);
    }
    Ok(TransportReport {
        times: times.to_vec(),
        scaled_max,
    })
}

//! The weighted energy `F(t)` along a propagated solution and the
//! Gronwall check of its differential inequality.

use serde::{Deserialize, Serialize};

use super::checks::{phase_integrals, PhaseWindow};
use super::step::GevreyStep;
use super::weight::{CutoffF, TransportWeight};
use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::schrod::SchrodingerOperator;

/// Parameters of the time-dependent weight and cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    pub t0: f64,
    pub h: f64,
    pub delta: f64,
    pub eta_minus: Vec<f64>,
    /// Annulus constant `A` of the cutoff.
    #[serde(default = "default_a")]
    pub a: f64,
}

fn default_a() -> f64 {
    4.0
}

impl FlowParams {
    /// `μ(t) = t0·h/|t|`.
    pub fn mu(&self, t: f64) -> f64 {
        self.t0 * self.h / t.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    pub mu: f64,
    pub f: f64,
}

/// Coarse-window resolution used by [`energy_series`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyResolution {
    pub min_points: usize,
    pub max_points: usize,
    pub fine: [usize; 2],
}

impl Default for EnergyResolution {
    fn default() -> Self {
        EnergyResolution {
            min_points: 128,
            max_points: 2048,
            fine: [512, 128],
        }
    }
}

impl EnergyResolution {
    pub fn refined(&self) -> Self {
        EnergyResolution {
            min_points: 2 * self.min_points,
            max_points: 2 * self.max_points,
            fine: [2 * self.fine[0], 2 * self.fine[1]],
        }
    }
}

/// `F(t) = ‖√f e^{ψ/h^{1/s}} T_{h,μ(t)} u(t+t0)‖²` at each snapshot, where
/// `snapshots` pairs the time `t < 0` with `u(t+t0)`.
pub fn energy_series(
    snapshots: &[(f64, SampledField)],
    op: &SchrodingerOperator,
    flow: &FlowParams,
    res: &EnergyResolution,
    strict: bool,
) -> Result<Vec<EnergySample>> {
    let env = op.envelope();
    let step = GevreyStep::new(env.s())?;
    let mut out = Vec::with_capacity(snapshots.len());
    for (t, u) in snapshots {
        let t = *t;
        if !(t < 0.0) {
            return Err(Error::InvalidInput(format!("snapshot time t = {t} must be negative")));
        }
        let mu = flow.mu(t);
        if mu > 1.0 {
            return Err(Error::Parameter(format!(
                "mu(t) = {mu} > 1 at t = {t}; t is too close to 0 for h = {}",
                flow.h
            )));
        }
        let weight = TransportWeight::new(t, flow.h, flow.delta, &flow.eta_minus, &step, env.k0())?;
        let cutoff = CutoffF::new(mu, flow.a, &step)?;
        let reach = 2.0 * flow.a;
        let clip = ([-reach / mu, reach / mu], [-reach, reach]);
        let f = match PhaseWindow::auto(u, flow.h, mu, res.min_points, res.max_points, Some(clip))? {
            Some(win) => {
                let mut win = resolve_cutoff(win, mu, flow.a, res.max_points);
                win.fine = res.fine;
                phase_integrals(u, op, &weight, &cutoff, flow.h, mu, &win, false, strict)?.weighted_norm_sq
            }
            None => 0.0,
        };
        out.push(EnergySample { t, mu, f });
    }
    Ok(out)
}

/// Nodes per transition layer of the cutoff.
const LAYER_NODES: f64 = 8.0;

/// Refines `win` where it overlaps the inner transition layers of `f`,
/// which are `1/(2Aμ)` wide in x and `1/(2A)` wide in ξ.
fn resolve_cutoff(win: PhaseWindow, mu: f64, a: f64, max_points: usize) -> PhaseWindow {
    let overlaps = |r: [f64; 2], edge: f64| r[0] < edge && r[1] > -edge;
    let dx = if overlaps(win.x, 1.0 / (a * mu)) {
        1.0 / (2.0 * a * mu * LAYER_NODES)
    } else {
        f64::INFINITY
    };
    let dxi = if overlaps(win.xi, 1.0 / a) {
        1.0 / (2.0 * a * LAYER_NODES)
    } else {
        f64::INFINITY
    };
    win.resolving(dx, dxi, max_points)
}

/// Profiles `a(t)`, `b(t)` with `A = C·a` and `B = C·b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallProfile {
    pub h: f64,
    pub sigma: f64,
    pub s: f64,
}

impl GronwallProfile {
    /// `h^{−1/s+σ}|t|^{−1−σ} + h^{2−2/s}|t|^{−2}`.
    pub fn a(&self, t: f64) -> f64 {
        let at = t.abs();
        self.h.powf(self.sigma - 1.0 / self.s) * at.powf(-1.0 - self.sigma) + self.h.powf(2.0 - 2.0 / self.s) / (at * at)
    }

    /// `|t|^{−1} + h²|t|^{−2}`.
    pub fn b(&self, t: f64) -> f64 {
        let at = t.abs();
        1.0 / at + self.h * self.h / (at * at)
    }

    /// `∫_{t1}^{t2} a` for `t1 ≤ t2 < 0`.
    pub fn int_a(&self, t1: f64, t2: f64) -> f64 {
        let (p, q) = (t1.abs(), t2.abs());
        self.h.powf(self.sigma - 1.0 / self.s) * (q.powf(-self.sigma) - p.powf(-self.sigma)) / self.sigma
            + self.h.powf(2.0 - 2.0 / self.s) * (1.0 / q - 1.0 / p)
    }

    /// `∫_{t1}^{t2} b` for `t1 ≤ t2 < 0`.
    pub fn int_b(&self, t1: f64, t2: f64) -> f64 {
        let (p, q) = (t1.abs(), t2.abs());
        (p / q).ln() + self.h * self.h * (1.0 / q - 1.0 / p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub c: f64,
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    pub envelope: Vec<f64>,
    pub pass: bool,
}

/// Smallest `C` with `dF/dt ≤ C(a F + b‖u‖²)` at the interior samples
/// (centered differences, of `ln F` when `F > 0`), and the resulting
/// Gronwall envelope.
pub fn check_gronwall(series: &[EnergySample], h: f64, sigma: f64, s: f64, u_norm_sup: f64) -> Result<GronwallReport> {
    if series.len() < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 samples, got {}", series.len())));
    }
    if series.windows(2).any(|w| !(w[0].t < w[1].t)) || series.last().is_none_or(|e| e.t >= 0.0) {
        return Err(Error::InvalidInput("sample times must increase and stay negative".into()));
    }
    let prof = GronwallProfile { h, sigma, s };
    let u2 = u_norm_sup * u_norm_sup;
    // F is exponential in t to leading order, so ln F is differenced when
    // it is available; F' = F (ln F)'
    let logs = series.iter().all(|e| e.f > 0.0);
    let mut c: f64 = 0.0;
    for w in series.windows(3) {
        let (l, m, r) = (&w[0], &w[1], &w[2]);
        let (d1, d2) = (m.t - l.t, r.t - m.t);
        let diff = |a: f64, b: f64, c: f64| (-d2 / (d1 * (d1 + d2))) * a + ((d2 - d1) / (d1 * d2)) * b + (d1 / (d2 * (d1 + d2))) * c;
        let df = if logs {
            m.f * diff(l.f.ln(), m.f.ln(), r.f.ln())
        } else {
            diff(l.f, m.f, r.f)
        };
        let q = prof.a(m.t) * m.f + prof.b(m.t) * u2;
        if df > 0.0 {
            if q <= 0.0 {
                return Err(Error::UndefinedRatio(format!("F grows at t = {} where the right side vanishes", m.t)));
            }
            c = c.max(df / q);
        }
    }
    let t_start = series[0].t;
    let f_start = series[0].f;
    let envelope: Vec<f64> = series
        .iter()
        .map(|e| (c * prof.int_a(t_start, e.t)).exp() * (f_start + c * u2 * prof.int_b(t_start, e.t)))
        .collect();
    let pass = series.iter().zip(&envelope).all(|(e, v)| e.f <= v * (1.0 + 1e-12) + 1e-300);
    Ok(GronwallReport {
        c,
        times: series.iter().map(|e| e.t).collect(),
        f: series.iter().map(|e| e.f).collect(),
        envelope,
        pass,
    })
}

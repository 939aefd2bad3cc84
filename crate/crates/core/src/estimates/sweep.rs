//! Constants of the weighted estimates for a packet sitting on the weight's
//! support, over a sweep of `h` with `μ` proportional to `h`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::checks::{check_corollary36, check_theorem31, Corollary36Report, PhaseWindow, Theorem31Report, DEFAULT_D};
use super::step::GevreyStep;
use super::symbol::{check_lemma_taylor, LemmaReport};
use super::weight::{support_samples, CutoffF, PhaseWeight, TransportWeight, DEFAULT_DELTA_FRACTION};
use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::grid::GridSpec;
use crate::schrod::SchrodingerOperator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PacketSweep {
    pub hs: Vec<f64>,
    /// `μ = mu_factor·h`.
    pub mu_factor: f64,
    /// Time slice of the transport weight (negative).
    pub t: f64,
    pub eta: f64,
    /// `δ` as a fraction of [`TransportWeight::max_delta`].
    pub delta_fraction: f64,
    /// Cutoff constant `A` of `f`.
    pub cutoff_a: f64,
    pub window_points: usize,
    pub lemma_samples: usize,
}

impl Default for PacketSweep {
    fn default() -> Self {
        PacketSweep {
            hs: vec![0.1, 0.05, 0.025],
            mu_factor: 2.0,
            t: -1.0,
            eta: 1.0,
            delta_fraction: DEFAULT_DELTA_FRACTION,
            cutoff_a: 4.0,
            window_points: 256,
            lemma_samples: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketSweepRow {
    pub theorem31: Theorem31Report,
    pub lemma37: LemmaReport,
    pub corollary36: Corollary36Report,
}

/// For each `h`: the packet `e^{iηy/h − (y−x_c)²/2}` with `x_c = tη/h`, the
/// transport weight at `t`, and the three constants on a window around it.
pub fn packet_sweep(op: &SchrodingerOperator, cfg: &PacketSweep, strict: bool) -> Result<Vec<PacketSweepRow>> {
    if op.dim() != 1 {
        return Err(Error::InvalidInput("packet sweeps are one-dimensional".into()));
    }
    if !(cfg.t < 0.0) || cfg.eta == 0.0 || !(cfg.mu_factor > 0.0) {
        return Err(Error::InvalidInput("need t < 0, eta != 0 and mu_factor > 0".into()));
    }
    if !(cfg.delta_fraction > 0.0 && cfg.delta_fraction <= 1.0) {
        return Err(Error::InvalidInput("delta_fraction must lie in (0, 1]".into()));
    }
    let env = op.envelope();
    let step = GevreyStep::new(env.s())?;
    let delta = cfg.delta_fraction * TransportWeight::max_delta(&step, env.k0());
    cfg.hs
        .iter()
        .map(|&h| {
            let mu = cfg.mu_factor * h;
            let w = TransportWeight::new(cfg.t, h, delta, &[cfg.eta], &step, env.k0())?;
            let f = CutoffF::new(mu, cfg.cutoff_a, &step)?;
            let xc = cfg.t / h * cfg.eta;
            let k = cfg.eta.abs() / h + 12.0;
            let dy = std::f64::consts::PI / (2.0 * k);
            let n = (40.0 / dy).ceil() as usize;
            let g = GridSpec::line(xc - 20.0, xc + 20.0, n)?;
            let u = SampledField::from_fn(g, |y| Complex64::from_polar((-(y[0] - xc).powi(2) / 2.0).exp(), cfg.eta * y[0] / h))?;
            let win = PhaseWindow::around(xc, cfg.eta, 12.0, 10.0 * h + 8.0 * (h * mu).sqrt(), cfg.window_points);
            let theorem31 = check_theorem31(&u, op, &w, &f, h, mu, &win, DEFAULT_D, strict)?;
            let corollary36 = check_corollary36(&u, op, &w, &f, h, mu, &win, DEFAULT_D, strict)?;
            let samples = support_samples(&w, cfg.lemma_samples)?;
            let lemma37 = check_lemma_taylor(op, &w as &dyn PhaseWeight, h, mu, &samples)?;
            Ok(PacketSweepRow {
                theorem31,
                lemma37,
                corollary36,
            })
        })
        .collect()
}

//! Numerical wave-front-set tests: decay of `T_{h,μ}u` on a phase region
//! as `h → 0`, homogeneous decay along a cone at `h = 1`, and factorial
//! growth of mixed-momentum norms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::GevreyStep;
use crate::fbi::{fbi_grid, lattice_xi_grid, Method, TransformParams};
use crate::field::SampledField;
use crate::fit::{clamped_logs, fit_decay, least_squares, line_fit, AbscissaKind, DecayFit};
use crate::grid::GridSpec;
use crate::schrod::ALIASING_LIMIT;
use crate::spectral::Spectral;

pub const DEFAULT_SLOPE_THRESHOLD: f64 = 0.05;
pub const DEFAULT_DELTAS: [f64; 4] = [0.05, 0.1, 0.2, 0.4];
pub const MAX_MIXED_ORDER: usize = 12;

/// Unweighted annulus norms below this fraction of the largest one are at
/// round-off and count as decayed.
const RESOLUTION_FLOOR: f64 = 1e-12;
/// Nodes per FBI scale on the phase grids.
const NODES_PER_SCALE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseRegion {
    /// `{|x − x0| ≤ r_x} × {|ξ − ξ0| ≤ r_ξ}`.
    Ball {
        center_x: Vec<f64>,
        center_xi: Vec<f64>,
        radius_x: f64,
        radius_xi: f64,
    },
    Box {
        x_lo: Vec<f64>,
        x_hi: Vec<f64>,
        xi_lo: Vec<f64>,
        xi_hi: Vec<f64>,
    },
    /// Points of `ℝ^{2n}` within `aperture` radians of the axis `(x, ξ)`.
    Cone { axis_x: Vec<f64>, axis_xi: Vec<f64>, aperture: f64 },
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}

impl PhaseRegion {
    pub fn ball(center_x: f64, center_xi: f64, radius_x: f64, radius_xi: f64) -> Self {
        PhaseRegion::Ball {
            center_x: vec![center_x],
            center_xi: vec![center_xi],
            radius_x,
            radius_xi,
        }
    }

    pub fn cone(axis_x: f64, axis_xi: f64, aperture: f64) -> Self {
        PhaseRegion::Cone {
            axis_x: vec![axis_x],
            axis_xi: vec![axis_xi],
            aperture,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PhaseRegion::Ball { center_x, .. } => center_x.len(),
            PhaseRegion::Box { x_lo, .. } => x_lo.len(),
            PhaseRegion::Cone { axis_x, .. } => axis_x.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|a| a.is_finite());
        let n = self.dim();
        if n == 0 {
            return Err(Error::InvalidInput("phase region has dimension 0".into()));
        }
        match self {
            PhaseRegion::Ball {
                center_x,
                center_xi,
                radius_x,
                radius_xi,
            } => {
                if center_xi.len() != n || !finite(center_x) || !finite(center_xi) {
                    return Err(Error::InvalidInput("ball centre must be finite with matching dimensions".into()));
                }
                if !(*radius_x > 0.0 && *radius_xi > 0.0 && radius_x.is_finite() && radius_xi.is_finite()) {
                    return Err(Error::InvalidInput("ball radii must be positive".into()));
                }
            }
            PhaseRegion::Box { x_lo, x_hi, xi_lo, xi_hi } => {
                if [x_hi, xi_lo, xi_hi].iter().any(|v| v.len() != n) {
                    return Err(Error::InvalidInput("box bounds differ in dimension".into()));
                }
                let ok = |lo: &[f64], hi: &[f64]| lo.iter().zip(hi).all(|(a, b)| a.is_finite() && b.is_finite() && a < b);
                if !ok(x_lo, x_hi) || !ok(xi_lo, xi_hi) {
                    return Err(Error::InvalidInput("box bounds must be finite with lo < hi".into()));
                }
            }
            PhaseRegion::Cone { axis_x, axis_xi, aperture } => {
                if axis_xi.len() != n || !finite(axis_x) || !finite(axis_xi) {
                    return Err(Error::InvalidInput("cone axis must be finite with matching dimensions".into()));
                }
                if norm(axis_x) == 0.0 && norm(axis_xi) == 0.0 {
                    return Err(Error::InvalidInput("cone axis is zero".into()));
                }
                if !(*aperture > 0.0 && *aperture < std::f64::consts::FRAC_PI_2) {
                    return Err(Error::InvalidInput(format!("cone aperture {aperture} must lie in (0, π/2)")));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64], xi: &[f64]) -> bool {
        match self {
            PhaseRegion::Ball {
                center_x,
                center_xi,
                radius_x,
                radius_xi,
            } => dist(x, center_x) <= *radius_x && dist(xi, center_xi) <= *radius_xi,
            PhaseRegion::Box { x_lo, x_hi, xi_lo, xi_hi } => {
                let inside = |v: &[f64], lo: &[f64], hi: &[f64]| v.iter().zip(lo.iter().zip(hi)).all(|(a, (l, h))| a >= l && a <= h);
                inside(x, x_lo, x_hi) && inside(xi, xi_lo, xi_hi)
            }
            PhaseRegion::Cone { aperture, .. } => self.cone_angle(x, xi).is_some_and(|a| a <= *aperture),
        }
    }

    /// Angle between `(x, ξ)` and the cone axis; `None` for other regions
    /// and for the origin.
    pub fn cone_angle(&self, x: &[f64], xi: &[f64]) -> Option<f64> {
        let PhaseRegion::Cone { axis_x, axis_xi, .. } = self else {
            return None;
        };
        let z2: f64 = x.iter().chain(xi).map(|a| a * a).sum();
        if z2 == 0.0 {
            return None;
        }
        let a2: f64 = axis_x.iter().chain(axis_xi).map(|a| a * a).sum();
        let dot: f64 = x.iter().zip(axis_x).chain(xi.iter().zip(axis_xi)).map(|(p, q)| p * q).sum();
        Some((dot / (z2 * a2).sqrt()).clamp(-1.0, 1.0).acos())
    }

    /// Product box `(x_lo, x_hi, ξ_lo, ξ_hi)` of a ball or box region.
    fn product_box(&self) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        match self {
            PhaseRegion::Ball {
                center_x,
                center_xi,
                radius_x,
                radius_xi,
            } => Some((
                center_x.iter().map(|c| c - radius_x).collect(),
                center_x.iter().map(|c| c + radius_x).collect(),
                center_xi.iter().map(|c| c - radius_xi).collect(),
                center_xi.iter().map(|c| c + radius_xi).collect(),
            )),
            PhaseRegion::Box { x_lo, x_hi, xi_lo, xi_hi } => Some((x_lo.clone(), x_hi.clone(), xi_lo.clone(), xi_hi.clone())),
            PhaseRegion::Cone { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WfVerdict {
    Regular,
    Singular,
    /// Every norm fell below the floor.
    SaturatedRegular,
}

/// `log n ≈ c + α log h + β h^{−1/s}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoTermFit {
    pub constant: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r_squared: f64,
}

pub fn two_term_fit(hs: &[f64], log_norms: &[f64], s: f64) -> Result<TwoTermFit> {
    if hs.len() != log_norms.len() || hs.len() < 4 {
        return Err(Error::InvalidInput("two-term fit needs at least 4 matched samples".into()));
    }
    let rows: Vec<Vec<f64>> = hs.iter().map(|&h| vec![1.0, h.ln(), h.powf(-1.0 / s)]).collect();
    let c = least_squares(&rows, log_norms)?;
    let mean = log_norms.iter().sum::<f64>() / log_norms.len() as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (r, y) in rows.iter().zip(log_norms) {
        let f = c[0] + c[1] * r[1] + c[2] * r[2];
        ss_res += (y - f).powi(2);
        ss_tot += (y - mean).powi(2);
    }
    let r_squared = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(TwoTermFit {
        constant: c[0],
        alpha: c[1],
        beta: c[2],
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WfOptions {
    pub threshold: f64,
    pub min_points: usize,
    pub max_points: usize,
    pub method: Method,
    pub strict: bool,
}

impl Default for WfOptions {
    fn default() -> Self {
        WfOptions {
            threshold: DEFAULT_SLOPE_THRESHOLD,
            min_points: 48,
            max_points: 400,
            method: Method::Auto,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WfReport {
    pub region: PhaseRegion,
    pub mu: f64,
    pub s: f64,
    /// Ascending `h^{−1/s}`, with `hs` and `norms` in the same order.
    pub abscissae: Vec<f64>,
    pub hs: Vec<f64>,
    pub norms: Vec<f64>,
    pub fit: DecayFit,
    pub two_term: TwoTermFit,
    pub verdict: WfVerdict,
    pub caveats: Vec<String>,
}

/// `‖T_{h,μ}u‖_{L²(U)}` for one `h`, on a product-box region.
pub fn region_norm(u: &SampledField, region: &PhaseRegion, h: f64, mu: f64, opts: &WfOptions) -> Result<f64> {
    region.validate()?;
    let n = u.dim();
    if region.dim() != n {
        return Err(Error::InvalidInput("region and field differ in dimension".into()));
    }
    let (x_lo, x_hi, xi_lo, xi_hi) = region
        .product_box()
        .ok_or_else(|| Error::InvalidInput("decay fits need a ball or box region".into()))?;
    let p = TransformParams::new(h, mu)?;
    let sp = Spectral::new(u.grid());
    for j in 0..n {
        let need = xi_lo[j].abs().max(xi_hi[j].abs()) / h;
        if sp.k_max(j) < need {
            return Err(Error::Precondition(format!(
                "grid resolves frequencies up to {:.3} but the region needs {need:.3} at h = {h}",
                sp.k_max(j)
            )));
        }
    }
    let points = |width: f64, scale: f64| ((width * NODES_PER_SCALE / scale).ceil() as usize + 1).clamp(opts.min_points, opts.max_points);
    let x_points: Vec<usize> = (0..n).map(|j| points(x_hi[j] - x_lo[j], (h / mu).sqrt())).collect();
    let xi_points = (0..n).map(|j| points(xi_hi[j] - xi_lo[j], (h * mu).sqrt())).max().unwrap_or(2);
    let x_grid = GridSpec::new(x_lo, x_hi, x_points)?;
    let xi_grid = lattice_xi_grid(u.grid(), h, &xi_lo, &xi_hi, xi_points)?;
    let t = fbi_grid(u, &x_grid, &xi_grid, &p, opts.method, opts.strict)?;
    Ok(t.l2_norm())
}

/// Fits `log ‖T_{h,μ}u‖_{L²(U)}` against `h^{−1/s}` over the sweep. The
/// verdict keys on `β` of the two-term fit, which separates exponential
/// decay from a power of `h`.
pub fn wf_decay_fit(u: &SampledField, region: &PhaseRegion, mu: f64, hs: &[f64], s: f64, opts: &WfOptions) -> Result<WfReport> {
    if !(s > 1.0) {
        return Err(Error::UnsupportedOrder(s));
    }
    if hs.len() < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 values of h, got {}", hs.len())));
    }
    if hs.iter().any(|&h| !(h > 0.0 && h <= 1.0)) {
        return Err(Error::Parameter("every h must lie in (0, 1]".into()));
    }
    let mut hs_sorted = hs.to_vec();
    hs_sorted.sort_by(|a, b| b.total_cmp(a));
    if hs_sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("duplicate h in sweep".into()));
    }
    let norms = hs_sorted
        .iter()
        .map(|&h| region_norm(u, region, h, mu, opts))
        .collect::<Result<Vec<_>>>()?;
    let abscissae: Vec<f64> = hs_sorted.iter().map(|h| h.powf(-1.0 / s)).collect();
    let (logs, clamped) = clamped_logs(&norms)?;
    let mut fit = fit_decay(&abscissae, &logs, AbscissaKind::HPow)?;
    fit.clamped = clamped;
    let two_term = two_term_fit(&hs_sorted, &logs, s)?;
    let mut caveats = Vec::new();
    let verdict = if clamped == norms.len() {
        caveats.push("every norm underflowed; regular only at the tested resolution".into());
        WfVerdict::SaturatedRegular
    } else {
        if clamped > 0 {
            caveats.push(format!("{clamped} norm(s) clamped at the floor"));
        }
        if two_term.beta <= -opts.threshold {
            WfVerdict::Regular
        } else {
            WfVerdict::Singular
        }
    };
    Ok(WfReport {
        region: region.clone(),
        mu,
        s,
        abscissae,
        hs: hs_sorted,
        norms,
        fit,
        two_term,
        verdict,
        caveats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HwfVerdict {
    NotInHwf,
    InHwf,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwfOptions {
    pub deltas: Vec<f64>,
    /// Inner radius of the first annulus.
    pub r_min: f64,
    pub max_points: usize,
    pub method: Method,
    pub strict: bool,
}

impl Default for HwfOptions {
    fn default() -> Self {
        HwfOptions {
            deltas: DEFAULT_DELTAS.to_vec(),
            r_min: 1.0,
            max_points: 512,
            method: Method::Auto,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwfDelta {
    pub delta: f64,
    pub annulus_norms: Vec<f64>,
    /// `n_{j+1}/n_j`, zero once the annulus is below resolution.
    pub ratios: Vec<f64>,
    /// Slope of `log n_j` against `j`.
    pub growth_rate: f64,
    pub weighted_norm: f64,
    pub decays: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwfReport {
    pub region: PhaseRegion,
    pub mu: f64,
    pub s: f64,
    /// `[r_lo, r_hi]` support of each annulus weight.
    pub annuli: Vec<[f64; 2]>,
    /// Unweighted annulus norms.
    pub plain_norms: Vec<f64>,
    pub per_delta: Vec<HwfDelta>,
    pub verdict: HwfVerdict,
    pub caveats: Vec<String>,
}

/// Smooth step from 0 at `τ ≤ 0` to 1 at `τ ≥ 1`.
fn rise(step: &GevreyStep, tau: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else if tau >= 1.0 {
        1.0
    } else {
        1.0 - step.eval(0.5 + 0.5 * tau)
    }
}

/// Largest radius at which the cone still lies inside the box. `None` when
/// the origin is not interior to the box.
fn cone_reach(theta0: f64, aperture: f64, lo: [f64; 2], hi: [f64; 2]) -> Option<f64> {
    if !(lo[0] < 0.0 && hi[0] > 0.0 && lo[1] < 0.0 && hi[1] > 0.0) {
        return None;
    }
    let samples = 257;
    let mut reach = f64::INFINITY;
    for k in 0..samples {
        let th = theta0 - aperture + 2.0 * aperture * k as f64 / (samples - 1) as f64;
        let d = [th.cos(), th.sin()];
        for a in 0..2 {
            if d[a] > 1e-15 {
                reach = reach.min(hi[a] / d[a]);
            } else if d[a] < -1e-15 {
                reach = reach.min(lo[a] / d[a]);
            }
        }
    }
    Some(reach)
}

/// Homogeneous test at `h = 1`: weighted norms of `T_{1,μ}u` on dyadic
/// annuli of the cone, for each `δ`. The point is outside `HWF_s` when for
/// some `δ` the tail ratios stay below one and do not increase out to the
/// box edge, i.e. a geometric series dominates the rest of the cone.
pub fn hwf_test(u: &SampledField, cone: &PhaseRegion, mu: f64, s: f64, opts: &HwfOptions) -> Result<HwfReport> {
    cone.validate()?;
    let PhaseRegion::Cone { axis_x, axis_xi, aperture } = cone else {
        return Err(Error::InvalidInput("hwf_test needs a cone region".into()));
    };
    if u.dim() != 1 || cone.dim() != 1 {
        return Err(Error::InvalidInput("hwf_test is implemented for n = 1".into()));
    }
    if !(s > 1.0) {
        return Err(Error::UnsupportedOrder(s));
    }
    if opts.deltas.is_empty() || opts.deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidInput("delta sweep must be non-empty and positive".into()));
    }
    if !(opts.r_min > 0.0) {
        return Err(Error::InvalidInput("r_min must be positive".into()));
    }
    let p = TransformParams::new(1.0, mu)?;
    let step = GevreyStep::new(s)?;
    let g = u.grid();
    let m = p.window_margin();
    let k_edge = 0.9 * Spectral::new(g).k_max(0);
    let lo = [g.lo()[0] + m, -k_edge];
    let hi = [g.hi()[0] - m, k_edge];
    let theta0 = axis_xi[0].atan2(axis_x[0]);
    let mut caveats = vec!["verdict holds at the tested resolution".to_string()];
    let inconclusive = |caveats: Vec<String>| HwfReport {
        region: cone.clone(),
        mu,
        s,
        annuli: vec![],
        plain_norms: vec![],
        per_delta: vec![],
        verdict: HwfVerdict::Inconclusive,
        caveats,
    };
    let Some(reach) = cone_reach(theta0, *aperture, lo, hi) else {
        caveats.push("the phase box does not contain the origin".into());
        return Ok(inconclusive(caveats));
    };
    // annulus j has weight support [r_min 2^j, r_min 2^{j+2}]
    let count = ((reach / opts.r_min).log2().floor() as i64 - 1).max(0) as usize;
    if count < 3 {
        caveats.push(format!("only {count} annuli fit inside the phase box"));
        return Ok(inconclusive(caveats));
    }
    let r_top = opts.r_min * 2f64.powi(count as i32 + 1);
    let annuli: Vec<[f64; 2]> = (0..count)
        .map(|j| [opts.r_min * 2f64.powi(j as i32), opts.r_min * 2f64.powi(j as i32 + 2)])
        .collect();

    // bounding box of the truncated cone
    let mut b_lo = [f64::INFINITY; 2];
    let mut b_hi = [f64::NEG_INFINITY; 2];
    for &r in &[opts.r_min, r_top] {
        for k in 0..=256 {
            let th = theta0 - aperture + 2.0 * aperture * k as f64 / 256.0;
            let z = [r * th.cos(), r * th.sin()];
            for a in 0..2 {
                b_lo[a] = b_lo[a].min(z[a]);
                b_hi[a] = b_hi[a].max(z[a]);
            }
        }
    }
    for a in 0..2 {
        b_lo[a] = b_lo[a].max(lo[a]);
        b_hi[a] = b_hi[a].min(hi[a]);
    }
    let scale = [1.0 / mu.sqrt(), mu.sqrt()];
    let pts = |a: usize| (((b_hi[a] - b_lo[a]) * NODES_PER_SCALE / scale[a]).ceil() as usize + 1).clamp(16, opts.max_points);
    if pts(0) == opts.max_points || pts(1) == opts.max_points {
        caveats.push("phase grid capped at max_points".into());
    }
    let x_grid = GridSpec::line(b_lo[0], b_hi[0], pts(0))?;
    let xi_grid = lattice_xi_grid(g, 1.0, &[b_lo[1]], &[b_hi[1]], pts(1))?;
    let t = fbi_grid(u, &x_grid, &xi_grid, &p, opts.method, opts.strict)?;
    let phase = t.phase_grid();

    let nd = opts.deltas.len();
    let mut plain = vec![0.0; count];
    let mut weighted = vec![vec![0.0; count]; nd];
    for (k, v) in t.values().iter().enumerate() {
        let (x, xi) = t.point(k);
        let Some(angle) = cone.cone_angle(&x, &xi) else { continue };
        let taper = step.eval(angle / aperture);
        if taper == 0.0 {
            continue;
        }
        let r = (x[0] * x[0] + xi[0] * xi[0]).sqrt();
        let tau = (r / opts.r_min).log2();
        let base = phase.weight(k) * taper * v.norm_sqr();
        let homog = x[0].abs().powf(1.0 / s) + xi[0].abs().powf(1.0 / s);
        for j in 0..count {
            let w = rise(&step, tau - j as f64) - rise(&step, tau - j as f64 - 1.0);
            if w == 0.0 {
                continue;
            }
            plain[j] += base * w;
            for (d, &delta) in opts.deltas.iter().enumerate() {
                weighted[d][j] += base * w * (2.0 * delta * homog).exp();
            }
        }
    }
    let plain: Vec<f64> = plain.into_iter().map(f64::sqrt).collect();
    let plain_max = plain.iter().cloned().fold(0.0, f64::max);
    let resolved: Vec<bool> = plain.iter().map(|&n| n > RESOLUTION_FLOOR * plain_max).collect();
    if resolved.iter().any(|r| !r) {
        caveats.push("outer annuli are below round-off and count as decayed".into());
    }
    let tail = (count - 1).div_ceil(2);
    let tail = tail.max(2).min(count - 1);
    let idx: Vec<f64> = (0..count).map(|j| j as f64).collect();
    let per_delta: Vec<HwfDelta> = opts
        .deltas
        .iter()
        .zip(weighted)
        .map(|(&delta, sq)| {
            let norms: Vec<f64> = sq.into_iter().map(f64::sqrt).collect();
            let ratios: Vec<f64> = (0..count - 1)
                .map(|j| {
                    if !resolved[j + 1] {
                        0.0
                    } else if norms[j] > 0.0 {
                        norms[j + 1] / norms[j]
                    } else {
                        f64::INFINITY
                    }
                })
                .collect();
            let last = &ratios[ratios.len() - tail..];
            let decays = last.iter().all(|&q| q < 1.0) && last.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
            let logs: Vec<f64> = norms.iter().map(|&n| n.max(crate::fit::NORM_FLOOR).ln()).collect();
            let (growth_rate, _, _) = line_fit(&idx, &logs);
            let weighted_norm = norms.iter().map(|n| n * n).sum::<f64>().sqrt();
            HwfDelta {
                delta,
                annulus_norms: norms,
                ratios,
                growth_rate,
                weighted_norm,
                decays,
            }
        })
        .collect();
    let verdict = if plain_max == 0.0 || per_delta.iter().any(|d| d.decays) {
        HwfVerdict::NotInHwf
    } else {
        HwfVerdict::InHwf
    };
    Ok(HwfReport {
        region: cone.clone(),
        mu,
        s,
        annuli,
        plain_norms: plain,
        per_delta,
        verdict,
        caveats,
    })
}

/// `ψ(ξ) = χ₁(∠(ξ, η)/aperture)·(1 − χ₁(4|ξ|/|η|))`: conic around `η` and
/// zero below `|η|/8`, one above `|η|/4` inside half the aperture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicMultiplier {
    pub eta: Vec<f64>,
    pub aperture: f64,
    step: GevreyStep,
}

impl ConicMultiplier {
    pub fn new(eta: Vec<f64>, aperture: f64, s: f64) -> Result<Self> {
        if eta.is_empty() || norm(&eta) == 0.0 || eta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("η must be finite and non-zero".into()));
        }
        if !(aperture > 0.0 && aperture <= std::f64::consts::PI) {
            return Err(Error::InvalidInput(format!("aperture {aperture} must lie in (0, π]")));
        }
        Ok(ConicMultiplier {
            eta,
            aperture,
            step: GevreyStep::new(s)?,
        })
    }

    pub fn value(&self, xi: &[f64]) -> f64 {
        let r = norm(xi);
        let e = norm(&self.eta);
        if r == 0.0 {
            return 0.0;
        }
        let dot: f64 = xi.iter().zip(&self.eta).map(|(a, b)| a * b).sum();
        let angle = (dot / (r * e)).clamp(-1.0, 1.0).acos();
        self.step.eval(angle / self.aperture) * (1.0 - self.step.eval(4.0 * r / e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedMomentum {
    /// `‖(x·D)^l ψ(D)u0‖_{L²(Γ)}` for `l = 0..norms.len()`.
    pub norms: Vec<f64>,
    pub tail_fractions: Vec<f64>,
    /// First order whose iterate left the resolved band; the sequence stops
    /// before it.
    pub aliased_at: Option<usize>,
}

fn masked_norm(grid: &GridSpec, v: &[Complex64], mask: &[bool]) -> f64 {
    v.iter()
        .enumerate()
        .filter(|(k, _)| mask[*k])
        .map(|(k, z)| grid.weight(k) * z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Mixed-momentum norms on a corridor mask; `D = −i∂` is applied
/// spectrally and `x` pointwise.
pub fn mixed_momentum_norms(u0: &SampledField, psi: &ConicMultiplier, l_max: usize, mask: &[bool]) -> Result<MixedMomentum> {
    let g = u0.grid();
    let n = g.dim();
    if psi.eta.len() != n {
        return Err(Error::InvalidInput("multiplier and field differ in dimension".into()));
    }
    if mask.len() != g.len() {
        return Err(Error::InvalidInput("corridor mask does not match the grid".into()));
    }
    if l_max > MAX_MIXED_ORDER {
        return Err(Error::InvalidInput(format!("l_max = {l_max} exceeds {MAX_MIXED_ORDER}")));
    }
    let sp = Spectral::new(g);
    let mut w = sp.apply_multiplier(u0.values(), |k| Complex64::new(psi.value(k), 0.0));
    let mut norms = Vec::with_capacity(l_max + 1);
    let mut tails = Vec::with_capacity(l_max + 1);
    let mut aliased_at = None;
    for l in 0..=l_max {
        if l > 0 {
            let mut next = vec![Complex64::new(0.0, 0.0); w.len()];
            for j in 0..n {
                let mut alpha = vec![0; n];
                alpha[j] = 1;
                let d = sp.derivative(&w, &alpha);
                for (k, z) in next.iter_mut().enumerate() {
                    *z += g.node(k)[j] * d[k];
                }
            }
            w = next;
        }
        let tail = sp.tail_fraction(&w);
        if tail > ALIASING_LIMIT {
            log::warn!("mixed-momentum iterate {l} carries {tail:.2e} of its energy in the top band; truncating");
            aliased_at = Some(l);
            break;
        }
        tails.push(tail);
        norms.push(masked_norm(g, &w, mask));
    }
    Ok(MixedMomentum {
        norms,
        tail_fractions: tails,
        aliased_at,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub s: f64,
    pub a0: f64,
    pub a1: f64,
    /// Smallest `A0` for which `norm_l ≤ A0·A1^l·(l!)^{2s}` holds on the data.
    pub a0_envelope: f64,
    /// Slope of the increments of `log norm_l − 2s log l!`; positive means
    /// faster than any such envelope.
    pub increment_trend: f64,
    pub residuals: Vec<f64>,
    pub used: Vec<usize>,
    pub pass: bool,
}

const TREND_TOL: f64 = 1e-8;

fn ln_factorial(l: usize) -> f64 {
    (2..=l).map(|k| (k as f64).ln()).sum()
}

/// Least squares of `log norm_l − 2s log l!` against `l`.
pub fn factorial_envelope_fit(norms: &[f64], s: f64) -> Result<EnvelopeFit> {
    if !(s > 1.0) {
        return Err(Error::UnsupportedOrder(s));
    }
    let used: Vec<usize> = (0..norms.len()).filter(|&l| norms[l].is_finite() && norms[l] > 0.0).collect();
    if used.len() < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 usable norms, got {}", used.len())));
    }
    let ls: Vec<f64> = used.iter().map(|&l| l as f64).collect();
    let ys: Vec<f64> = used.iter().map(|&l| norms[l].ln() - 2.0 * s * ln_factorial(l)).collect();
    let (slope, intercept, _) = line_fit(&ls, &ys);
    let residuals: Vec<f64> = ls.iter().zip(&ys).map(|(l, y)| y - (intercept + slope * l)).collect();
    let worst = residuals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mids: Vec<f64> = ls.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let incs: Vec<f64> = ys.windows(2).zip(ls.windows(2)).map(|(y, l)| (y[1] - y[0]) / (l[1] - l[0])).collect();
    let (increment_trend, _, _) = line_fit(&mids, &incs);
    let scale = 1.0 + incs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let a1 = slope.exp();
    let pass = a1.is_finite() && increment_trend <= TREND_TOL * scale;
    Ok(EnvelopeFit {
        s,
        a0: intercept.exp(),
        a1,
        a0_envelope: (intercept + worst).exp(),
        increment_trend,
        residuals,
        used,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_field(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> Complex64) -> SampledField {
        SampledField::from_fn(GridSpec::line(lo, hi, n).unwrap(), |x| f(x[0])).unwrap()
    }

    #[test]
    fn cone_membership_is_scale_invariant() {
        let c = PhaseRegion::cone(-2.0, 1.0, 0.2);
        assert!(c.contains(&[-2.0], &[1.0]));
        assert!(c.contains(&[-20.0], &[10.1]));
        assert!(!c.contains(&[2.0], &[1.0]));
        assert!(!c.contains(&[0.0], &[0.0]));
    }

    #[test]
    fn ball_membership() {
        let b = PhaseRegion::ball(4.0, 1.0, 0.5, 0.25);
        assert!(b.contains(&[4.4], &[1.2]));
        assert!(!b.contains(&[4.6], &[1.0]));
        assert!(PhaseRegion::ball(0.0, 0.0, -1.0, 1.0).validate().is_err());
    }

    #[test]
    fn two_term_recovers_coefficients() {
        let hs = [0.2, 0.1, 0.05, 0.025, 0.0125];
        let ys: Vec<f64> = hs.iter().map(|h: &f64| 0.3 + 0.75 * h.ln() - 0.4 * h.powf(-0.5)).collect();
        let f = two_term_fit(&hs, &ys, 2.0).unwrap();
        assert!((f.alpha - 0.75).abs() < 1e-9 && (f.beta + 0.4).abs() < 1e-9 && (f.constant - 0.3).abs() < 1e-9);
    }

    #[test]
    fn gaussian_off_support_decays() {
        let u = line_field(-20.0, 20.0, 2048, |x| Complex64::new((-x * x / 2.0).exp(), 0.0));
        let r = wf_decay_fit(
            &u,
            &PhaseRegion::ball(4.0, 1.0, 0.5, 0.5),
            1.0,
            &[0.2, 0.1, 0.05, 0.025],
            2.0,
            &WfOptions::default(),
        )
        .unwrap();
        assert!(r.fit.slope < -0.1, "{r:?}");
        assert_eq!(r.verdict, WfVerdict::Regular);
    }

    #[test]
    fn jump_is_singular() {
        // deep enough in h that the O(hμ/ξ²) smoothing correction is small
        let u = line_field(-8.0, 8.0, 32768, |x| Complex64::new(x.signum() * (-x * x).exp(), 0.0));
        let hs = [0.05, 0.025, 0.0125, 0.00625];
        let r = wf_decay_fit(&u, &PhaseRegion::ball(0.0, 2.0, 1.0, 0.5), 1.0, &hs, 2.0, &WfOptions::default()).unwrap();
        assert!(r.two_term.beta.abs() <= 0.02, "{:?}", r.two_term);
        assert_eq!(r.verdict, WfVerdict::Singular);
    }

    #[test]
    fn zero_field_saturates() {
        let u = line_field(-20.0, 20.0, 1024, |_| Complex64::new(0.0, 0.0));
        let r = wf_decay_fit(
            &u,
            &PhaseRegion::ball(0.0, 1.0, 0.5, 0.5),
            1.0,
            &[0.2, 0.1, 0.05, 0.025],
            2.0,
            &WfOptions::default(),
        )
        .unwrap();
        assert_eq!(r.verdict, WfVerdict::SaturatedRegular);
    }

    #[test]
    fn unresolved_frequency_is_rejected() {
        let u = line_field(-20.0, 20.0, 256, |x| Complex64::new((-x * x / 2.0).exp(), 0.0));
        let e = wf_decay_fit(
            &u,
            &PhaseRegion::ball(0.0, 1.0, 0.5, 0.5),
            1.0,
            &[0.2, 0.1, 0.05, 0.025],
            2.0,
            &WfOptions::default(),
        );
        assert!(matches!(e, Err(Error::Precondition(_))));
    }

    #[test]
    fn hwf_gaussian_is_outside() {
        let u = line_field(-60.0, 60.0, 1200, |x| Complex64::new((-x * x / 2.0).exp(), 0.0));
        let r = hwf_test(&u, &PhaseRegion::cone(-2.0, 1.0, 0.3), 1.0, 2.0, &HwfOptions::default()).unwrap();
        assert_eq!(r.verdict, HwfVerdict::NotInHwf, "{r:?}");
    }

    #[test]
    fn hwf_slow_decay_is_inside() {
        let w = 1.0;
        let u = line_field(-300.0, 300.0, 3000, |x| Complex64::from_polar(1.0 / (1.0 + x * x).sqrt(), w * x));
        let r = hwf_test(&u, &PhaseRegion::cone(1.0, 0.0, 0.3), 1.0, 2.0, &HwfOptions::default()).unwrap();
        assert_eq!(r.verdict, HwfVerdict::InHwf, "{r:?}");
    }

    #[test]
    fn hwf_small_box_is_inconclusive() {
        let u = line_field(-12.0, 12.0, 64, |x| Complex64::new((-x * x / 2.0).exp(), 0.0));
        let r = hwf_test(&u, &PhaseRegion::cone(1.0, 1.0, 0.3), 1.0, 2.0, &HwfOptions::default()).unwrap();
        assert_eq!(r.verdict, HwfVerdict::Inconclusive);
    }

    #[test]
    fn envelope_recovers_manufactured_constants() {
        let s = 2.0;
        let norms: Vec<f64> = (0..=10)
            .map(|l| 3.0 * 5f64.powi(l as i32) * ln_factorial(l).exp().powf(2.0 * s))
            .collect();
        let f = factorial_envelope_fit(&norms, s).unwrap();
        assert!((f.a0 - 3.0).abs() < 1e-6 * 3.0 && (f.a1 - 5.0).abs() < 1e-6 * 5.0, "{f:?}");
        assert!(f.pass);
        let faster: Vec<f64> = (0..=10).map(|l| ln_factorial(l).exp().powf(2.0 * s + 1.0)).collect();
        assert!(!factorial_envelope_fit(&faster, s).unwrap().pass);
        assert!(factorial_envelope_fit(&norms[..3], s).is_err());
    }

    #[test]
    fn mixed_momentum_first_order_is_exact() {
        // u = e^{12ix − x²/2}: (x·D)u = x(12 + ix)u
        let u = line_field(-20.0, 20.0, 1024, |x| Complex64::from_polar((-x * x / 2.0).exp(), 12.0 * x));
        let g = u.grid().clone();
        let psi = ConicMultiplier::new(vec![12.0], std::f64::consts::FRAC_PI_4, 2.0).unwrap();
        let mask: Vec<bool> = (0..g.len()).map(|k| g.node(k)[0] < 0.5).collect();
        let m = mixed_momentum_norms(&u, &psi, 1, &mask).unwrap();
        let exact: Vec<Complex64> = (0..g.len())
            .map(|k| {
                let x = g.node(k)[0];
                x * Complex64::new(12.0, x) * u.values()[k]
            })
            .collect();
        let want = masked_norm(&g, &exact, &mask);
        assert!((m.norms[1] - want).abs() < 1e-10 * want, "{} vs {want}", m.norms[1]);
        assert!((m.norms[0] - masked_norm(&g, u.values(), &mask)).abs() < 1e-10);
    }

    #[test]
    fn multiplier_cuts_low_and_opposite_frequencies() {
        let psi = ConicMultiplier::new(vec![1.0], 0.5, 2.0).unwrap();
        assert_eq!(psi.value(&[0.1]), 0.0);
        assert_eq!(psi.value(&[0.3]), 1.0);
        assert_eq!(psi.value(&[-1.0]), 0.0);
    }
}

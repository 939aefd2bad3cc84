//! Phase-space pairings behind the weighted estimates.
//!
//! Every integral `∫ f e^{2ψ/h^{1/s}} G` is split as `∫ f G` on a coarse
//! window plus `∫ f (e^{2ψ/h^{1/s}} − 1) G` on a fine grid over the support
//! box of `ψ`, so the thin transition layers of the weight are resolved
//! without refining the whole window.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::symbol::{hamilton_derivative, lemma_scale, DistortedSymbol};
use super::weight::{CutoffF, PhaseWeight};
use crate::error::{Error, Result};
use crate::fbi::{fbi_grid, lattice_xi_grid, Method, PhaseField, TransformParams};
use crate::field::{l2_norm, SampledField};
use crate::grid::GridSpec;
use crate::schrod::{apply_p, SchrodingerOperator};
use crate::spectral::Spectral;

/// Relative amplitude marking the bulk of a field for automatic windows.
const BULK: f64 = 1e-10;

/// Default cap on `h/μ`.
pub const DEFAULT_D: f64 = 1.0;

/// A one-dimensional phase window `[x_lo, x_hi] × [xi_lo, xi_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseWindow {
    pub x: [f64; 2],
    pub xi: [f64; 2],
    pub points: usize,
    /// Points along x and ξ on the fine grid over the weight's support.
    #[serde(default = "default_fine")]
    pub fine: [usize; 2],
}

fn default_fine() -> [usize; 2] {
    [1024, 256]
}

impl PhaseWindow {
    pub fn new(x: [f64; 2], xi: [f64; 2], points: usize) -> Self {
        PhaseWindow {
            x,
            xi,
            points,
            fine: default_fine(),
        }
    }

    /// Window of `±half` around `(x, ξ)`.
    pub fn around(x: f64, xi: f64, half_x: f64, half_xi: f64, points: usize) -> Self {
        Self::new([x - half_x, x + half_x], [xi - half_xi, xi + half_xi], points)
    }

    /// Window around the bulk of `u` in space and in `h`-scaled frequency,
    /// widened by the transform's reach and clipped to `clip` when given.
    /// The coarse count is raised until each axis has four nodes per FBI
    /// scale, up to `max_points`.
    pub fn auto(u: &SampledField, h: f64, mu: f64, min_points: usize, max_points: usize, clip: Option<([f64; 2], [f64; 2])>) -> Result<Option<Self>> {
        if u.dim() != 1 {
            return Err(Error::InvalidInput("automatic windows are one-dimensional".into()));
        }
        let g = u.grid();
        let peak = u.max_abs();
        if peak == 0.0 {
            return Ok(None);
        }
        let xs = g.axis(0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (x, v) in xs.iter().zip(u.values()) {
            if v.norm() > BULK * peak {
                lo = lo.min(*x);
                hi = hi.max(*x);
            }
        }
        let sp = Spectral::new(g);
        let mut hat = u.values().to_vec();
        sp.forward(&mut hat);
        let hpeak = hat.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let (mut klo, mut khi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (k, z) in sp.wavenumbers(0).iter().zip(&hat) {
            if z.norm() > BULK * hpeak {
                klo = klo.min(h * k);
                khi = khi.max(h * k);
            }
        }
        let sx = (h / mu).sqrt();
        let sk = (h * mu).sqrt();
        let mut x = [lo - 8.0 * sx, hi + 8.0 * sx];
        let mut xi = [klo - 8.0 * sk, khi + 8.0 * sk];
        if let Some((cx, ck)) = clip {
            x = [x[0].max(cx[0]), x[1].min(cx[1])];
            xi = [xi[0].max(ck[0]), xi[1].min(ck[1])];
            if !(x[0] < x[1] && xi[0] < xi[1]) {
                return Ok(None);
            }
        }
        let need = ((x[1] - x[0]) / (0.25 * sx)).max((xi[1] - xi[0]) / (0.25 * sk)).ceil() as usize + 1;
        let points = need.clamp(min_points, max_points.max(min_points));
        Ok(Some(Self::new(x, xi, points)))
    }

    /// Raises the coarse count so that the spacing is at most `dx` in x and
    /// `dxi` in ξ, up to `max_points`.
    pub fn resolving(mut self, dx: f64, dxi: f64, max_points: usize) -> Self {
        let need = ((self.x[1] - self.x[0]) / dx).max((self.xi[1] - self.xi[0]) / dxi).ceil() as usize + 1;
        self.points = self.points.max(need.min(max_points));
        self
    }

    /// Same window with every point count doubled.
    pub fn refined(&self) -> Self {
        PhaseWindow {
            points: 2 * self.points,
            fine: [2 * self.fine[0], 2 * self.fine[1]],
            ..self.clone()
        }
    }

    fn grids(&self, u_grid: &GridSpec, h: f64) -> Result<(GridSpec, GridSpec)> {
        if self.points < 2 || !(self.x[0] < self.x[1]) || !(self.xi[0] < self.xi[1]) {
            return Err(Error::InvalidInput(format!("degenerate phase window {self:?}")));
        }
        let xg = GridSpec::line(self.x[0], self.x[1], self.points)?;
        let kg = lattice_xi_grid(u_grid, h, &[self.xi[0]], &[self.xi[1]], self.points)?;
        Ok((xg, kg))
    }
}

/// The integrals entering the estimates, with `⟨u,v⟩ = ∫ u v̄`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseIntegrals {
    /// `‖√f e^{ψ/h^{1/s}} Tu‖²`.
    pub weighted_norm_sq: f64,
    /// `⟨e^{ψ/h^{1/s}}Tu, f e^{ψ/h^{1/s}}T(Pu)⟩`.
    pub pair_p: Complex64,
    /// `⟨e^{ψ/h^{1/s}}Tu, f a_ψ e^{ψ/h^{1/s}}Tu⟩`.
    pub pair_a: Complex64,
    /// `⟨e^{ψ/h^{1/s}}Tu, f h^{−1−1/s}H_pψ e^{ψ/h^{1/s}}Tu⟩`.
    pub pair_hp: f64,
}

impl std::ops::AddAssign for PhaseIntegrals {
    fn add_assign(&mut self, o: Self) {
        self.weighted_norm_sq += o.weighted_norm_sq;
        self.pair_p += o.pair_p;
        self.pair_a += o.pair_a;
        self.pair_hp += o.pair_hp;
    }
}

struct Setup<'a> {
    op: &'a SchrodingerOperator,
    weight: &'a dyn PhaseWeight,
    cutoff: &'a CutoffF,
    h: f64,
    mu: f64,
}

fn quadrature_weights(xg: &GridSpec, kg: &GridSpec) -> Vec<f64> {
    let wx = xg.weights();
    let wk = kg.weights();
    let mut out = Vec::with_capacity(wx.len() * wk.len());
    for a in &wx {
        for b in &wk {
            out.push(a * b);
        }
    }
    out
}

fn transforms(
    u: &SampledField,
    pu: Option<&SampledField>,
    xg: &GridSpec,
    kg: &GridSpec,
    p: &TransformParams,
    strict: bool,
) -> Result<(PhaseField, Option<PhaseField>)> {
    let tu = fbi_grid(u, xg, kg, p, Method::Auto, strict)?;
    let tpu = match pu {
        Some(pu) => Some(fbi_grid(pu, xg, kg, p, Method::Auto, strict)?),
        None => None,
    };
    Ok((tu, tpu))
}

/// `∫ f G` over the coarse window, with `ψ` ignored.
fn coarse_part(s: &Setup, u: &SampledField, pu: Option<&SampledField>, win: &PhaseWindow, strict: bool) -> Result<PhaseIntegrals> {
    let p = TransformParams::new(s.h, s.mu)?;
    let (xg, kg) = win.grids(u.grid(), s.h)?;
    let (tu, tpu) = transforms(u, pu, &xg, &kg, &p, strict)?;
    let q = quadrature_weights(&xg, &kg);
    let with_symbol = tpu.is_some();
    let parts: Vec<Result<PhaseIntegrals>> = (0..q.len())
        .into_par_iter()
        .map(|k| {
            let (x, xi) = tu.point(k);
            let f = s.cutoff.value(&x, &xi);
            let mut out = PhaseIntegrals::default();
            if f == 0.0 {
                return Ok(out);
            }
            let t = tu.values()[k];
            let w = q[k] * f;
            out.weighted_norm_sq = w * t.norm_sqr();
            if let Some(tpu) = &tpu {
                out.pair_p = w * t * tpu.values()[k].conj();
            }
            if with_symbol {
                let a = s.op.symbol(s.h, &x, &[Complex64::new(xi[0], 0.0)])?;
                out.pair_a = w * a.conj() * t.norm_sqr();
            }
            Ok(out)
        })
        .collect();
    sum(parts)
}

/// `∫ f (e^{2ψ/h^{1/s}}·(·) − (·))` over the support box of `ψ`.
fn fine_part(s: &Setup, u: &SampledField, pu: Option<&SampledField>, win: &PhaseWindow, strict: bool) -> Result<PhaseIntegrals> {
    let Some((xc, xic, rx, rxi)) = s.weight.support_box() else {
        return Ok(PhaseIntegrals::default());
    };
    let p = TransformParams::new(s.h, s.mu)?;
    let env = s.op.envelope();
    let xg = GridSpec::line(xc[0] - rx, xc[0] + rx, win.fine[0].max(2))?;
    let kg = lattice_xi_grid(u.grid(), s.h, &[xic[0] - rxi], &[xic[0] + rxi], win.fine[1].max(2))?;
    let (tu, tpu) = transforms(u, pu, &xg, &kg, &p, strict)?;
    let q = quadrature_weights(&xg, &kg);
    let sym = if tpu.is_some() {
        Some(DistortedSymbol::new(s.op, s.h, s.mu, s.weight.nu())?)
    } else {
        None
    };
    let hk = s.h.powf(1.0 / env.s());
    let hp_scale = s.h.powf(-1.0 - 1.0 / env.s());
    let parts: Vec<Result<PhaseIntegrals>> = (0..q.len())
        .into_par_iter()
        .map(|k| {
            let (x, xi) = tu.point(k);
            let mut out = PhaseIntegrals::default();
            let psi = s.weight.value(&x, &xi);
            let (gx, gxi) = s.weight.gradient(&x, &xi);
            let flat = psi == 0.0 && gx.iter().chain(&gxi).all(|g| *g == 0.0);
            let f = s.cutoff.value(&x, &xi);
            if flat || f == 0.0 {
                return Ok(out);
            }
            let t = tu.values()[k];
            let e2 = (2.0 * psi / hk).exp();
            let w = q[k] * f;
            let t2 = t.norm_sqr();
            out.weighted_norm_sq = w * (e2 - 1.0) * t2;
            if let (Some(tpu), Some(sym)) = (&tpu, &sym) {
                out.pair_p = w * (e2 - 1.0) * t * tpu.values()[k].conj();
                let a_psi = sym.eval_with_gradient(&x, &xi, &gx, &gxi)?;
                let a = s.op.symbol(s.h, &x, &[Complex64::new(xi[0], 0.0)])?;
                out.pair_a = w * (a_psi.conj() * e2 - a.conj()) * t2;
                out.pair_hp = w * e2 * hp_scale * hamilton_derivative(s.op, &x, &xi, &gx, &gxi)? * t2;
            }
            Ok(out)
        })
        .collect();
    sum(parts)
}

fn sum(parts: Vec<Result<PhaseIntegrals>>) -> Result<PhaseIntegrals> {
    let mut acc = PhaseIntegrals::default();
    for p in parts {
        acc += p?;
    }
    Ok(acc)
}

fn check_inputs(s: &Setup, u: &SampledField, d: f64) -> Result<()> {
    if u.dim() != 1 || s.op.dim() != 1 || s.weight.dim() != 1 {
        return Err(Error::InvalidInput(
            "weighted pairings are implemented on one-dimensional phase grids".into(),
        ));
    }
    if !(s.h / s.mu <= d) {
        return Err(Error::Precondition(format!("h/mu = {} exceeds d = {d}", s.h / s.mu)));
    }
    if !s.weight.satisfies_w1(s.mu, s.op.envelope().k0())? {
        return Err(Error::Precondition("weight fails (W1)".into()));
    }
    Ok(())
}

/// All four integrals for `u`, including `T(Pu)` and `a_ψ` when `with_p`.
#[allow(clippy::too_many_arguments)]
pub fn phase_integrals(
    u: &SampledField,
    op: &SchrodingerOperator,
    weight: &dyn PhaseWeight,
    cutoff: &CutoffF,
    h: f64,
    mu: f64,
    window: &PhaseWindow,
    with_p: bool,
    strict: bool,
) -> Result<PhaseIntegrals> {
    let s = Setup { op, weight, cutoff, h, mu };
    let pu = if with_p { Some(apply_p(op, u, strict)?) } else { None };
    let mut out = coarse_part(&s, u, pu.as_ref(), window, strict)?;
    out += fine_part(&s, u, pu.as_ref(), window, strict)?;
    Ok(out)
}

/// `h^{−1}μ + μ^σ + hμ^{σ−1}`.
pub fn theorem_scale(h: f64, mu: f64, sigma: f64) -> f64 {
    mu / h + mu.powf(sigma) + h * mu.powf(sigma - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem31Report {
    pub h: f64,
    pub mu: f64,
    pub difference: f64,
    pub weighted_norm_sq: f64,
    pub u_norm_sq: f64,
    pub scale: f64,
    pub c_eff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corollary36Report {
    pub h: f64,
    pub mu: f64,
    /// `|Im⟨Wu, fWPu⟩ + ⟨Wu, f h^{−1−1/s}H_pψ Wu⟩|`.
    pub lhs: f64,
    pub weighted_norm_sq: f64,
    pub u_norm_sq: f64,
    pub scale_weighted: f64,
    pub scale_plain: f64,
    /// One constant for both terms of the right side.
    pub c_eff: f64,
    /// Constant when the whole left side is charged to the weighted term.
    pub c_weighted: f64,
    /// Constant when the whole left side is charged to `‖u‖²`.
    pub c_plain: f64,
}

/// `|⟨Wu, fWPu⟩ − ⟨Wu, f a_ψ Wu⟩|` relative to the theorem's right side.
#[allow(clippy::too_many_arguments)]
pub fn check_theorem31(
    u: &SampledField,
    op: &SchrodingerOperator,
    weight: &dyn PhaseWeight,
    cutoff: &CutoffF,
    h: f64,
    mu: f64,
    window: &PhaseWindow,
    d: f64,
    strict: bool,
) -> Result<Theorem31Report> {
    check_inputs(&Setup { op, weight, cutoff, h, mu }, u, d)?;
    let u_norm_sq = l2_norm(u).powi(2);
    let scale = theorem_scale(h, mu, op.envelope().sigma());
    if u_norm_sq == 0.0 {
        return Ok(Theorem31Report {
            h,
            mu,
            difference: 0.0,
            weighted_norm_sq: 0.0,
            u_norm_sq,
            scale,
            c_eff: 0.0,
        });
    }
    let r = phase_integrals(u, op, weight, cutoff, h, mu, window, true, strict)?;
    let difference = (r.pair_p - r.pair_a).norm();
    let c_eff = difference / (scale * (r.weighted_norm_sq + u_norm_sq));
    Ok(Theorem31Report {
        h,
        mu,
        difference,
        weighted_norm_sq: r.weighted_norm_sq,
        u_norm_sq,
        scale,
        c_eff,
    })
}

/// The imaginary-part pairing against the two-term right side.
#[allow(clippy::too_many_arguments)]
pub fn check_corollary36(
    u: &SampledField,
    op: &SchrodingerOperator,
    weight: &dyn PhaseWeight,
    cutoff: &CutoffF,
    h: f64,
    mu: f64,
    window: &PhaseWindow,
    d: f64,
    strict: bool,
) -> Result<Corollary36Report> {
    check_inputs(&Setup { op, weight, cutoff, h, mu }, u, d)?;
    let env = op.envelope();
    let u_norm_sq = l2_norm(u).powi(2);
    let scale_weighted = lemma_scale(h, mu, env.s(), env.sigma());
    let scale_plain = theorem_scale(h, mu, env.sigma());
    let zero = Corollary36Report {
        h,
        mu,
        lhs: 0.0,
        weighted_norm_sq: 0.0,
        u_norm_sq,
        scale_weighted,
        scale_plain,
        c_eff: 0.0,
        c_weighted: 0.0,
        c_plain: 0.0,
    };
    if u_norm_sq == 0.0 {
        return Ok(zero);
    }
    let r = phase_integrals(u, op, weight, cutoff, h, mu, window, true, strict)?;
    let lhs = (r.pair_p.im + r.pair_hp).abs();
    let wn = r.weighted_norm_sq;
    Ok(Corollary36Report {
        lhs,
        weighted_norm_sq: wn,
        c_eff: lhs / (scale_weighted * wn + scale_plain * u_norm_sq),
        c_weighted: if wn > 0.0 { lhs / (scale_weighted * wn) } else { f64::INFINITY },
        c_plain: lhs / (scale_plain * u_norm_sq),
        ..zero
    })
}

/// `max/min` of a sweep of constants and whether it stays within `limit`.
pub fn sweep_ratio(c: &[f64], limit: f64) -> (f64, bool) {
    let max = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = c.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if min > 0.0 { max / min } else { f64::INFINITY };
    let ok = c.iter().all(|v| v.is_finite()) && ratio <= limit;
    (ratio, ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimates::step::GevreyStep;
    use crate::estimates::weight::{TransportWeight, ZeroWeight};
    use crate::params::GevreyParams;

    fn packet(h: f64, xc: f64, eta: f64, lo: f64, hi: f64, n: usize) -> SampledField {
        let g = GridSpec::line(lo, hi, n).unwrap();
        SampledField::from_fn(g, |y| Complex64::from_polar((-(y[0] - xc).powi(2) / 2.0).exp(), eta * y[0] / h)).unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let op = SchrodingerOperator::builtin_perturbed().unwrap();
        let step = GevreyStep::new(2.0).unwrap();
        let h = 0.1;
        let mu = 2.0 * h;
        let w = TransportWeight::new(-1.0, h, 0.1, &[1.0], &step, op.envelope().k0()).unwrap();
        let f = CutoffF::new(mu, 4.0, &step).unwrap();
        let u = SampledField::zeros(GridSpec::line(-20.0, 0.0, 256).unwrap());
        let win = PhaseWindow::around(-10.0, 1.0, 5.0, 0.5, 32);
        let r = check_theorem31(&u, &op, &w, &f, h, mu, &win, 1.0, false).unwrap();
        assert_eq!(r.c_eff, 0.0);
        let c = check_corollary36(&u, &op, &w, &f, h, mu, &win, 1.0, false).unwrap();
        assert_eq!(c.c_eff, 0.0);
    }

    #[test]
    fn undistorted_free_pairing_is_consistent() {
        // ψ ≡ 0 and f ≡ 1 on the packet: the pairings agree up to the symbol remainder
        let op = SchrodingerOperator::free(1, GevreyParams::new(2.0, 1.0, 0.05, 0.5).unwrap());
        let step = GevreyStep::new(2.0).unwrap();
        let (h, mu) = (0.1, 0.2);
        let z = ZeroWeight { dim: 1, nu: 1.0 };
        let f = CutoffF::new(mu, 4.0, &step).unwrap();
        let u = packet(h, -8.0, 1.0, -24.0, 8.0, 1024);
        let win = PhaseWindow::around(-8.0, 1.0, 10.0, 1.2, 128);
        let r = check_theorem31(&u, &op, &z, &f, h, mu, &win, 1.0, false).unwrap();
        assert!(r.c_eff < 0.1, "{r:?}");
        let c = check_corollary36(&u, &op, &z, &f, h, mu, &win, 1.0, false).unwrap();
        assert!(c.lhs < 1e-6 * c.scale_plain * c.u_norm_sq, "{c:?}");
    }

    #[test]
    fn precondition_on_h_over_mu() {
        let op = SchrodingerOperator::builtin_perturbed().unwrap();
        let step = GevreyStep::new(2.0).unwrap();
        let z = ZeroWeight { dim: 1, nu: 1.0 };
        let f = CutoffF::new(0.05, 4.0, &step).unwrap();
        let u = packet(0.1, 0.0, 1.0, -10.0, 10.0, 256);
        let win = PhaseWindow::around(0.0, 1.0, 5.0, 0.5, 32);
        let e = check_theorem31(&u, &op, &z, &f, 0.1, 0.05, &win, 1.0, false).unwrap_err();
        assert!(matches!(e, Error::Precondition(_)));
    }

    #[test]
    fn sweep_ratio_examples() {
        assert_eq!(sweep_ratio(&[1.0, 2.0, 5.0], 10.0), (5.0, true));
        assert!(!sweep_ratio(&[0.1, 2.0], 10.0).1);
        assert!(!sweep_ratio(&[0.0, 2.0], 10.0).1);
    }
}

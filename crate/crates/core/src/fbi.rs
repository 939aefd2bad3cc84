//! The global FBI (Bargmann) transform
//!
//! `T_{h,μ}u(x,ξ) = c_{h,μ} ∫ e^{i(x−y)·ξ/h − μ|x−y|²/2h} u(y) dy`,
//! `c_{h,μ} = 2^{−n/2} μ^{n/4} (πh)^{−3n/4}`,
//!
//! pointwise by trapezoid quadrature and in batch by folding the windowed
//! samples onto an FFT lattice.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{l2_norm, SampledField};
use crate::grid::GridSpec;

/// Window margin in units of `√(h/μ)`; `e^{−32}` tail.
pub const WINDOW_MARGIN: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct TransformParams {
    h: f64,
    mu: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    h: f64,
    mu: f64,
}

impl TryFrom<RawParams> for TransformParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        TransformParams::new(r.h, r.mu)
    }
}

impl From<TransformParams> for RawParams {
    fn from(p: TransformParams) -> Self {
        RawParams { h: p.h, mu: p.mu }
    }
}

impl TransformParams {
    pub fn new(h: f64, mu: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::Parameter(format!("h = {h} must lie in (0, 1]")));
        }
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::Parameter(format!("mu = {mu} must lie in (0, 1]")));
        }
        Ok(TransformParams { h, mu })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `c_{h,μ}` in dimension `n`.
    pub fn constant(&self, n: usize) -> f64 {
        let n = n as f64;
        2f64.powf(-n / 2.0) * self.mu.powf(n / 4.0) * (PI * self.h).powf(-0.75 * n)
    }

    /// Half-width beyond which the window is below `e^{−32}`.
    pub fn window_margin(&self) -> f64 {
        WINDOW_MARGIN * (self.h / self.mu).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// FFT over ξ; the ξ grid must sit on the lattice.
    Fast,
    /// Direct trapezoid sum at every node.
    Quadrature,
    /// Fast when the lattice fits, otherwise quadrature.
    Auto,
}

/// `T u` sampled on `x_grid × xi_grid`, row-major with x outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    x_grid: GridSpec,
    xi_grid: GridSpec,
    values: Vec<Complex64>,
}

impl PhaseField {
    pub fn new(x_grid: GridSpec, xi_grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if x_grid.dim() != xi_grid.dim() {
            return Err(Error::InvalidInput("x and xi grids differ in dimension".into()));
        }
        if values.len() != x_grid.len() * xi_grid.len() {
            return Err(Error::InvalidInput("phase values do not match the grids".into()));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("phase field".into()));
        }
        Ok(PhaseField { x_grid, xi_grid, values })
    }

    pub fn x_grid(&self) -> &GridSpec {
        &self.x_grid
    }

    pub fn xi_grid(&self) -> &GridSpec {
        &self.xi_grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, ix: usize, ik: usize) -> Complex64 {
        self.values[ix * self.xi_grid.len() + ik]
    }

    /// Phase-space grid with the x axes followed by the ξ axes.
    pub fn phase_grid(&self) -> GridSpec {
        self.x_grid.product(&self.xi_grid).expect("x and xi grids are valid")
    }

    /// `(x, ξ)` of the flat index.
    pub fn point(&self, flat: usize) -> (Vec<f64>, Vec<f64>) {
        let nk = self.xi_grid.len();
        (self.x_grid.node(flat / nk), self.xi_grid.node(flat % nk))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Flat index of the largest `|Tu|` (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if v.norm() > self.values[best].norm() {
                best = k;
            }
        }
        best
    }

    /// Trapezoid `L²` norm over the whole phase grid.
    pub fn l2_norm(&self) -> f64 {
        crate::field::weighted_sq_sum(&self.phase_grid(), &self.values).sqrt()
    }

    pub fn into_field(self) -> SampledField {
        let g = self.phase_grid();
        SampledField::new(g, self.values).expect("phase values are validated")
    }
}

/// Checks that the window around every requested x stays inside the box of
/// `u`, or that `u` itself has died out at the box edges. Returns whether
/// the check passed; strict mode turns a failure into an error.
pub fn check_window(u: &SampledField, x_lo: &[f64], x_hi: &[f64], p: &TransformParams, strict: bool) -> Result<bool> {
    let g = u.grid();
    let m = p.window_margin();
    let inside = (0..g.dim()).all(|j| g.lo()[j] <= x_lo[j] - m && g.hi()[j] >= x_hi[j] + m);
    if inside {
        return Ok(true);
    }
    let peak = u.max_abs();
    let edge = boundary_max(u);
    if edge <= 1e-12 * peak {
        return Ok(true);
    }
    let msg = format!(
        "window of half-width {m:.3} around x in {x_lo:?}..{x_hi:?} leaves the box {:?}..{:?} and |u| at the edge is {:.3e} of its peak",
        g.lo(),
        g.hi(),
        if peak > 0.0 { edge / peak } else { 0.0 }
    );
    if strict {
        Err(Error::Truncation(msg))
    } else {
        log::warn!("{msg}");
        Ok(false)
    }
}

fn boundary_max(u: &SampledField) -> f64 {
    let g = u.grid();
    let mut m: f64 = 0.0;
    for (k, v) in u.values().iter().enumerate() {
        let idx = g.multi_index(k);
        if idx.iter().zip(g.points()).any(|(&i, &n)| i == 0 || i + 1 == n) {
            m = m.max(v.norm());
        }
    }
    m
}

/// `T_{h,μ}u(x,ξ)` by trapezoid quadrature; the reference oracle.
pub fn fbi_point(u: &SampledField, x: &[f64], xi: &[f64], p: &TransformParams, strict: bool) -> Result<Complex64> {
    let n = u.dim();
    if n > 2 || x.len() != n || xi.len() != n {
        return Err(Error::InvalidInput(format!("x and xi must have {n} components (n <= 2)")));
    }
    check_window(u, x, x, p, strict)?;
    Ok(quadrature_at(u, &u.grid().weights(), x, xi, p))
}

fn quadrature_at(u: &SampledField, weights: &[f64], x: &[f64], xi: &[f64], p: &TransformParams) -> Complex64 {
    let n = x.len();
    let nodes = node_table(u.grid());
    quadrature_with(u.values(), &nodes, weights, x, xi, p) * p.constant(n)
}

/// Node coordinates, `dim` consecutive entries per node.
pub(crate) fn node_table(g: &GridSpec) -> Vec<f64> {
    (0..g.len()).flat_map(|k| g.node(k)).collect()
}

fn quadrature_with(values: &[Complex64], nodes: &[f64], weights: &[f64], x: &[f64], xi: &[f64], p: &TransformParams) -> Complex64 {
    let n = x.len();
    let (h, mu) = (p.h, p.mu);
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, (v, w)) in values.iter().zip(weights).enumerate() {
        let y = &nodes[k * n..k * n + n];
        let mut phase = 0.0;
        let mut r2 = 0.0;
        for j in 0..n {
            let d = x[j] - y[j];
            phase += d * xi[j];
            r2 += d * d;
        }
        let amp = (-mu * r2 / (2.0 * h)).exp();
        if amp == 0.0 {
            continue;
        }
        acc += v * Complex64::from_polar(amp * w, phase / h);
    }
    acc
}

/// Largest `|a − b| / max(|b|, 1e-5 · peak)`, `peak = max |b|`: relative
/// deviation, floored where values approach rounding level.
pub fn scaled_deviation(a: &[Complex64], b: &[Complex64]) -> f64 {
    let peak = b.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let floor = 1e-5 * peak;
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).norm();
            if d == 0.0 {
                0.0
            } else {
                d / y.norm().max(floor)
            }
        })
        .fold(0.0, f64::max)
}

/// FFT length `L_j = 2πh/(dy_j dξ_j)` per axis, if every one is an integer
/// no smaller than the ξ point count.
pub fn lattice_lengths(u_grid: &GridSpec, xi_grid: &GridSpec, h: f64) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(u_grid.dim());
    for j in 0..u_grid.dim() {
        let dy = u_grid.spacing(j);
        let dxi = xi_grid.spacing(j);
        let l = 2.0 * PI * h / (dy * dxi);
        let lr = l.round();
        let need = xi_grid.points()[j];
        if (l - lr).abs() > 1e-9 * lr.max(1.0) || (lr as usize) < need {
            let lreq = lr.max(need as f64);
            return Err(Error::Lattice {
                spacing: dxi,
                required: 2.0 * PI * h / (dy * lreq),
            });
        }
        out.push(lr as usize);
    }
    Ok(out)
}

/// A ξ grid on the FFT lattice of `u_grid` covering `[lo, hi]` per axis with
/// spacing no coarser than `(hi − lo)/(min_points − 1)`. The upper end may
/// fall short of `hi` by less than one spacing.
pub fn lattice_xi_grid(u_grid: &GridSpec, h: f64, lo: &[f64], hi: &[f64], min_points: usize) -> Result<GridSpec> {
    let dim = u_grid.dim();
    if lo.len() != dim || hi.len() != dim || min_points < 2 {
        return Err(Error::InvalidInput("bad lattice request".into()));
    }
    let mut spacing = Vec::with_capacity(dim);
    let mut points = Vec::with_capacity(dim);
    for j in 0..dim {
        let target = (hi[j] - lo[j]) / (min_points - 1) as f64;
        let dy = u_grid.spacing(j);
        let l = (2.0 * PI * h / (dy * target)).ceil();
        let d = 2.0 * PI * h / (dy * l);
        spacing.push(d);
        points.push((((hi[j] - lo[j]) / d) * (1.0 + 1e-12)).floor() as usize + 1);
    }
    GridSpec::from_spacing(lo, &spacing, &points)
}

/// `T u` on `x_grid × xi_grid`.
pub fn fbi_grid(u: &SampledField, x_grid: &GridSpec, xi_grid: &GridSpec, p: &TransformParams, method: Method, strict: bool) -> Result<PhaseField> {
    let n = u.dim();
    if n > 2 || x_grid.dim() != n || xi_grid.dim() != n {
        return Err(Error::InvalidInput(format!("grids must all be {n}-dimensional (n <= 2)")));
    }
    check_window(u, x_grid.lo(), x_grid.hi(), p, strict)?;
    let lattice = lattice_lengths(u.grid(), xi_grid, p.h);
    let fast = match (method, &lattice) {
        (Method::Fast, Err(_)) => return Err(lattice.unwrap_err()),
        (Method::Fast, Ok(_)) | (Method::Auto, Ok(_)) => true,
        _ => false,
    };
    let rows: Vec<Vec<Complex64>> = if fast {
        let ls = lattice.unwrap();
        let mut planner = FftPlanner::new();
        let ffts: Vec<Arc<dyn Fft<f64>>> = ls.iter().map(|&l| planner.plan_fft_forward(l)).collect();
        let weights = u.grid().weights();
        (0..x_grid.len())
            .into_par_iter()
            .map(|ix| fast_row(u, &weights, &x_grid.node(ix), xi_grid, p, &ls, &ffts))
            .collect()
    } else {
        let weights = u.grid().weights();
        let nodes = node_table(u.grid());
        let c = p.constant(n);
        (0..x_grid.len())
            .into_par_iter()
            .map(|ix| {
                let x = x_grid.node(ix);
                (0..xi_grid.len())
                    .map(|ik| quadrature_with(u.values(), &nodes, &weights, &x, &xi_grid.node(ik), p) * c)
                    .collect()
            })
            .collect()
    };
    PhaseField::new(x_grid.clone(), xi_grid.clone(), rows.into_iter().flatten().collect())
}

fn fast_row(
    u: &SampledField,
    weights: &[f64],
    x: &[f64],
    xi_grid: &GridSpec,
    p: &TransformParams,
    ls: &[usize],
    ffts: &[Arc<dyn Fft<f64>>],
) -> Vec<Complex64> {
    let g = u.grid();
    let n = g.dim();
    let (h, mu) = (p.h, p.mu);
    let xi0 = xi_grid.lo();
    let y0 = g.lo();
    let l1 = if n == 2 { ls[1] } else { 1 };
    let mut buf = vec![Complex64::new(0.0, 0.0); ls[0] * l1];
    for (k, v) in u.values().iter().enumerate() {
        let idx = g.multi_index(k);
        let y = g.node(k);
        let mut r2 = 0.0;
        let mut ph = 0.0;
        for j in 0..n {
            let d = x[j] - y[j];
            r2 += d * d;
            ph -= y[j] * xi0[j];
        }
        let amp = (-mu * r2 / (2.0 * h)).exp();
        if amp == 0.0 {
            continue;
        }
        let slot = if n == 2 { (idx[0] % ls[0]) * l1 + idx[1] % l1 } else { idx[0] % ls[0] };
        buf[slot] += v * Complex64::from_polar(amp * weights[k], ph / h);
    }
    // rows along the last axis, then columns
    if n == 2 {
        for row in buf.chunks_exact_mut(l1) {
            ffts[1].process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); ls[0]];
        for c in 0..l1 {
            for r in 0..ls[0] {
                col[r] = buf[r * l1 + c];
            }
            ffts[0].process(&mut col);
            for r in 0..ls[0] {
                buf[r * l1 + c] = col[r];
            }
        }
    } else {
        ffts[0].process(&mut buf);
    }
    let c = p.constant(n);
    (0..xi_grid.len())
        .map(|ik| {
            let kidx = xi_grid.multi_index(ik);
            let xi = xi_grid.node(ik);
            let mut phase = 0.0;
            for j in 0..n {
                phase += x[j] * xi[j] - y0[j] * kidx[j] as f64 * xi_grid.spacing(j);
            }
            let slot = if n == 2 { kidx[0] * l1 + kidx[1] } else { kidx[0] };
            buf[slot] * Complex64::from_polar(c, phase / h)
        })
        .collect()
}

/// `| ‖Tu‖_{L²(box)} − ‖u‖ | / ‖u‖` with the box given as two grids.
pub fn isometry_defect(u: &SampledField, p: &TransformParams, x_grid: &GridSpec, xi_grid: &GridSpec, strict: bool) -> Result<f64> {
    let nu = l2_norm(u);
    if nu == 0.0 {
        return Err(Error::UndefinedRatio("isometry defect of the zero function".into()));
    }
    let t = fbi_grid(u, x_grid, xi_grid, p, Method::Auto, strict)?;
    let defect = (t.l2_norm() - nu).abs() / nu;
    if strict && defect > 1e-6 {
        return Err(Error::Truncation(format!(
            "phase box captures only part of the mass (defect {defect:.3e})"
        )));
    }
    Ok(defect)
}

/// `û(η) = (2π)^{−n/2} ∫ e^{−iy·η} u(y) dy` at one frequency.
pub fn fourier_point(u: &SampledField, eta: &[f64]) -> Complex64 {
    let g = u.grid();
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, (v, w)) in u.values().iter().zip(g.weights()).enumerate() {
        let y = g.node(k);
        let ph: f64 = y.iter().zip(eta).map(|(a, b)| a * b).sum();
        acc += v * Complex64::from_polar(w, -ph);
    }
    acc * (2.0 * PI).powf(-(eta.len() as f64) / 2.0)
}

/// Both sides of `T_{1,1}u(x,ξ) = e^{ix·ξ} T_{1,1}û(ξ,−x)`. `û` is sampled
/// by quadrature on a frequency box centred at ξ wide enough for the
/// window, with the same spacing rule as `u`'s own grid.
pub fn fourier_side_identity(u: &SampledField, x: &[f64], xi: &[f64]) -> Result<(Complex64, Complex64)> {
    let n = u.dim();
    let p = TransformParams::new(1.0, 1.0)?;
    let lhs = fbi_point(u, x, xi, &p, false)?;
    let half = 2.0 * p.window_margin();
    let per_axis = if n == 1 { 801 } else { 161 };
    let eta_grid = GridSpec::new(
        xi.iter().map(|v| v - half).collect(),
        xi.iter().map(|v| v + half).collect(),
        vec![per_axis; n],
    )?;
    let values: Vec<Complex64> = (0..eta_grid.len()).into_par_iter().map(|k| fourier_point(u, &eta_grid.node(k))).collect();
    let uhat = SampledField::new(eta_grid, values)?;
    let minus_x: Vec<f64> = x.iter().map(|v| -v).collect();
    let t_hat = fbi_point(&uhat, xi, &minus_x, &p, false)?;
    let ph: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
    Ok((lhs, Complex64::from_polar(1.0, ph) * t_hat))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed form of `T e^{−(y−a)²/2 + iωy}` in one dimension.
    fn gaussian_oracle(a: f64, omega: f64, x: f64, xi: f64, p: &TransformParams) -> Complex64 {
        let (h, mu) = (p.h(), p.mu());
        let big_a = mu / h + 1.0;
        let b = Complex64::new(mu * x / h + a, omega - xi / h);
        let c = p.constant(1);
        let expo = b * b / (2.0 * big_a) + Complex64::new(-mu * x * x / (2.0 * h) - a * a / 2.0, x * xi / h);
        expo.exp() * c * (2.0 * PI / big_a).sqrt()
    }

    fn packet(a: f64, omega: f64) -> SampledField {
        let g = GridSpec::line(-20.0, 20.0, 1024).unwrap();
        SampledField::from_fn(g, |y| Complex64::from_polar((-(y[0] - a).powi(2) / 2.0).exp(), omega * y[0])).unwrap()
    }

    #[test]
    fn zero_maps_to_zero() {
        let u = SampledField::zeros(GridSpec::line(-5.0, 5.0, 64).unwrap());
        let p = TransformParams::new(0.5, 0.5).unwrap();
        assert_eq!(fbi_point(&u, &[0.3], &[1.0], &p, true).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn point_matches_closed_form() {
        let u = packet(0.0, 0.0);
        for (h, mu) in [(1.0, 1.0), (0.25, 0.5)] {
            let p = TransformParams::new(h, mu).unwrap();
            for (x, xi) in [(0.0, 0.0), (2.0, 0.0), (1.0, -0.7)] {
                let got = fbi_point(&u, &[x], &[xi], &p, true).unwrap();
                let want = gaussian_oracle(0.0, 0.0, x, xi, &p);
                assert!((got - want).norm() < 1e-12, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn fast_path_equals_quadrature() {
        let u = packet(1.0, 2.0);
        let p = TransformParams::new(0.5, 1.0).unwrap();
        let xg = GridSpec::line(-4.0, 4.0, 17).unwrap();
        let kg = lattice_xi_grid(u.grid(), p.h(), &[-3.0], &[6.0], 64).unwrap();
        let fast = fbi_grid(&u, &xg, &kg, &p, Method::Fast, true).unwrap();
        let slow = fbi_grid(&u, &xg, &kg, &p, Method::Quadrature, true).unwrap();
        assert!(scaled_deviation(fast.values(), slow.values()) < 1e-9);
    }

    #[test]
    fn off_lattice_is_an_error() {
        let u = packet(0.0, 0.0);
        let p = TransformParams::new(1.0, 1.0).unwrap();
        let xg = GridSpec::line(-1.0, 1.0, 3).unwrap();
        let kg = GridSpec::line(-1.0, 1.0, 7).unwrap();
        match fbi_grid(&u, &xg, &kg, &p, Method::Fast, false) {
            Err(Error::Lattice { required, .. }) => assert!(required > 0.0),
            other => panic!("expected lattice error, got {other:?}"),
        }
    }

    #[test]
    fn truncation_is_policed() {
        let g = GridSpec::line(-3.0, 3.0, 128).unwrap();
        let u = SampledField::from_fn(g, |_| Complex64::new(1.0, 0.0)).unwrap();
        let p = TransformParams::new(1.0, 1.0).unwrap();
        assert!(matches!(fbi_point(&u, &[0.0], &[0.0], &p, true), Err(Error::Truncation(_))));
        assert!(fbi_point(&u, &[0.0], &[0.0], &p, false).is_ok());
    }

    #[test]
    fn two_dim_fast_path() {
        let g = GridSpec::cube(2, -10.0, 10.0, 96).unwrap();
        let u = SampledField::from_fn(g, |y| {
            Complex64::from_polar((-(y[0] * y[0] + (y[1] - 1.0).powi(2)) / 2.0).exp(), y[0] * 1.5)
        })
        .unwrap();
        let p = TransformParams::new(1.0, 1.0).unwrap();
        let xg = GridSpec::cube(2, -1.0, 1.0, 3).unwrap();
        let kg = lattice_xi_grid(u.grid(), 1.0, &[-2.0, -2.0], &[3.0, 3.0], 12).unwrap();
        let fast = fbi_grid(&u, &xg, &kg, &p, Method::Fast, true).unwrap();
        let slow = fbi_grid(&u, &xg, &kg, &p, Method::Quadrature, true).unwrap();
        assert!(scaled_deviation(fast.values(), slow.values()) < 1e-9);
    }
}

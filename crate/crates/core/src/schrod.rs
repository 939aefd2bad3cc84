//! The operator `P = ½Σ a_{jk}D_jD_k + Σ b_jD_j + c` on sampled fields and
//! the propagation of `∂_t u + iPu = 0` on a periodic box.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{l2_norm, SampledField};
use crate::format::save_field;
use crate::grid::GridSpec;
use crate::hamflow::Metric;
use crate::jet::{bracket, multi_factorial, Coefficient, Jet, JetOracle};
use crate::params::GevreyParams;
use crate::spectral::Spectral;

/// Largest admissible fraction of the spectral energy in the top band.
pub const ALIASING_LIMIT: f64 = 1e-10;
/// Width in cells of the boundary layer watched during propagation.
pub const BOUNDARY_CELLS: usize = 8;
/// Largest admissible fraction of the mass inside the boundary layer.
pub const BOUNDARY_LIMIT: f64 = 1e-10;
/// Relative norm drift that signals instability for self-adjoint data.
pub const INSTABILITY_DRIFT: f64 = 1e-3;
/// Largest metric perturbation accepted by the splitting path.
pub const SPLITTING_METRIC_LIMIT: f64 = 0.25;
/// Derivative orders checked against the coefficient envelopes.
pub const ENVELOPE_ORDER: usize = 4;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn zero_coefficient() -> Coefficient {
    Coefficient::Zero
}

/// `re + i·im`, each a real coefficient family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexCoefficient {
    #[serde(default = "zero_coefficient")]
    pub re: Coefficient,
    #[serde(default = "zero_coefficient")]
    pub im: Coefficient,
}

impl ComplexCoefficient {
    pub fn zero() -> Self {
        ComplexCoefficient {
            re: Coefficient::Zero,
            im: Coefficient::Zero,
        }
    }

    pub fn real(re: Coefficient) -> Self {
        ComplexCoefficient { re, im: Coefficient::Zero }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn value(&self, x: &[f64]) -> Result<Complex64> {
        Ok(Complex64::new(self.re.taylor(x, 0)?.value(), self.im.taylor(x, 0)?.value()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOperator", into = "RawOperator")]
pub struct SchrodingerOperator {
    metric: Metric,
    b: Vec<ComplexCoefficient>,
    c: ComplexCoefficient,
    envelope: GevreyParams,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperator {
    metric: Metric,
    b: Vec<ComplexCoefficient>,
    c: ComplexCoefficient,
    envelope: GevreyParams,
}

impl TryFrom<RawOperator> for SchrodingerOperator {
    type Error = Error;
    fn try_from(r: RawOperator) -> Result<Self> {
        SchrodingerOperator::new(r.metric, r.b, r.c, r.envelope)
    }
}

impl From<SchrodingerOperator> for RawOperator {
    fn from(o: SchrodingerOperator) -> Self {
        RawOperator {
            metric: o.metric,
            b: o.b,
            c: o.c,
            envelope: o.envelope,
        }
    }
}

impl SchrodingerOperator {
    pub fn new(metric: Metric, b: Vec<ComplexCoefficient>, c: ComplexCoefficient, envelope: GevreyParams) -> Result<Self> {
        if b.len() != metric.dim() {
            return Err(Error::InvalidInput(format!(
                "{} first-order coefficients for dimension {}",
                b.len(),
                metric.dim()
            )));
        }
        Ok(SchrodingerOperator { metric, b, c, envelope })
    }

    /// `½|D|²` with the given envelope metadata.
    pub fn free(dim: usize, envelope: GevreyParams) -> Self {
        SchrodingerOperator {
            metric: Metric::flat(dim),
            b: vec![ComplexCoefficient::zero(); dim],
            c: ComplexCoefficient::zero(),
            envelope,
        }
    }

    /// One-dimensional perturbation with `s = 2`, `σ = ½`, `K0 = 1/20`:
    /// `a = 1 + 0.1⟨x⟩^{−1/2}`, `b = 0.05⟨x⟩^{−1/2}`, `c = 0.1⟨x⟩^{−1/2}`.
    /// `C0` is the smallest constant for which the envelopes hold on
    /// [`calibration_points`].
    pub fn builtin_perturbed() -> Result<Self> {
        let br = |amplitude: f64| Coefficient::Bracket {
            amplitude,
            center: vec![0.0],
            power: -0.5,
        };
        let metric = Metric::conformal(1, br(0.1))?;
        let provisional = GevreyParams::new(2.0, 1.0, 0.05, 0.5)?;
        let mut op = SchrodingerOperator::new(
            metric,
            vec![ComplexCoefficient::real(br(0.05))],
            ComplexCoefficient::real(br(0.1)),
            provisional,
        )?;
        let report = validate_assumption_a(&op, &calibration_points(1)?)?;
        let worst = report.worst_ratio();
        op.envelope = GevreyParams::new(2.0, worst * (1.0 + 1e-12), 0.05, 0.5)?;
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn b(&self) -> &[ComplexCoefficient] {
        &self.b
    }

    pub fn c(&self) -> &ComplexCoefficient {
        &self.c
    }

    pub fn envelope(&self) -> &GevreyParams {
        &self.envelope
    }

    pub fn with_envelope(mut self, envelope: GevreyParams) -> Self {
        self.envelope = envelope;
        self
    }

    /// Flat metric, `Im b ≡ 0`, `Im c ≡ 0` and constant `b`.
    pub fn is_flat_self_adjoint(&self) -> bool {
        self.metric.is_flat() && self.b.iter().all(|b| b.im.is_zero() && b.re.as_constant().is_some()) && self.c.im.is_zero()
    }

    /// Flat metric with `b ≡ 0`, `c ≡ 0`.
    pub fn is_free(&self) -> bool {
        self.metric.is_flat() && self.b.iter().all(|b| b.is_zero()) && self.c.is_zero()
    }

    /// Symbol `a(x,ξ) = h^{−2}p(x,ξ) + h^{−1}b(x)·ξ + c(x)` at complex
    /// `ξ`, with real `x`.
    pub fn symbol(&self, h: f64, x: &[f64], xi: &[Complex64]) -> Result<Complex64> {
        let n = self.dim();
        let a = self.metric.matrix(x)?;
        let mut p = Complex64::new(0.0, 0.0);
        for j in 0..n {
            for k in 0..n {
                p += xi[j] * xi[k] * a[j][k];
            }
        }
        let mut bx = Complex64::new(0.0, 0.0);
        for j in 0..n {
            bx += self.b[j].value(x)? * xi[j];
        }
        Ok(p * 0.5 / (h * h) + bx / h + self.c.value(x)?)
    }
}

/// Coefficient values sampled on a grid, shared by `apply_P` and propagation.
#[derive(Debug)]
pub struct Discretized {
    spectral: Spectral,
    /// `(j, k, a_{jk} − δ_{jk})` for each stored upper-triangle entry.
    metric_dev: Vec<(usize, usize, Vec<f64>)>,
    b: Vec<Option<Vec<Complex64>>>,
    c: Option<Vec<Complex64>>,
    rho: f64,
    metric_sup: f64,
}

fn sample(grid: &GridSpec, f: &Coefficient) -> Result<Vec<f64>> {
    (0..grid.len()).map(|i| Ok(f.taylor(&grid.node(i), 0)?.value())).collect()
}

fn sample_complex(grid: &GridSpec, f: &ComplexCoefficient) -> Result<Option<Vec<Complex64>>> {
    if f.is_zero() {
        return Ok(None);
    }
    let re = sample(grid, &f.re)?;
    let im = sample(grid, &f.im)?;
    Ok(Some(re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect()))
}

impl Discretized {
    pub fn new(op: &SchrodingerOperator, grid: &GridSpec) -> Result<Self> {
        let n = op.dim();
        if grid.dim() != n {
            return Err(Error::InvalidInput(format!("{}-d grid for a {n}-d operator", grid.dim())));
        }
        let spectral = Spectral::new(grid);
        let mut metric_dev = Vec::new();
        let mut metric_sup: f64 = 0.0;
        for j in 0..n {
            for k in j..n {
                let dev = op.metric.perturbation(j, k);
                if dev.as_constant() == Some(0.0) {
                    continue;
                }
                let v = sample(grid, &dev)?;
                metric_sup = metric_sup.max(v.iter().fold(0.0, |m, x| m.max(x.abs())));
                metric_dev.push((j, k, v));
            }
        }
        let b = op.b.iter().map(|b| sample_complex(grid, b)).collect::<Result<Vec<_>>>()?;
        let c = sample_complex(grid, &op.c)?;
        let kmax: Vec<f64> = (0..n).map(|a| spectral.k_max(a)).collect();
        let sup = |v: &[Complex64]| v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let mut rho = 0.0;
        for (j, k, v) in &metric_dev {
            let f = if j == k { 0.5 } else { 1.0 };
            rho += f * kmax[*j] * kmax[*k] * v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        }
        for (j, bj) in b.iter().enumerate() {
            if let Some(bj) = bj {
                rho += kmax[j] * sup(bj);
            }
        }
        if let Some(c) = &c {
            rho += sup(c);
        }
        Ok(Discretized {
            spectral,
            metric_dev,
            b,
            c,
            rho,
            metric_sup,
        })
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Upper bound used for the spectral radius of `P − ½|D|²`.
    pub fn remainder_radius(&self) -> f64 {
        self.rho
    }

    /// `sup |a_{jk} − δ_{jk}|` over the grid.
    pub fn metric_sup(&self) -> f64 {
        self.metric_sup
    }

    /// `(P − ½|D|²) u`.
    pub fn remainder(&self, u: &[Complex64]) -> Vec<Complex64> {
        let n = self.spectral.grid().dim();
        let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
        for (j, k, a) in &self.metric_dev {
            let mut alpha = vec![0; n];
            alpha[*j] += 1;
            alpha[*k] += 1;
            let d = self.spectral.derivative(u, &alpha);
            let f = if j == k { 0.5 } else { 1.0 };
            for ((o, ai), di) in out.iter_mut().zip(a).zip(&d) {
                *o += di * (f * ai);
            }
        }
        for (j, bj) in self.b.iter().enumerate() {
            if let Some(bj) = bj {
                let mut alpha = vec![0; n];
                alpha[j] = 1;
                let d = self.spectral.derivative(u, &alpha);
                for ((o, bi), di) in out.iter_mut().zip(bj).zip(&d) {
                    *o += bi * di;
                }
            }
        }
        if let Some(c) = &self.c {
            for ((o, ci), ui) in out.iter_mut().zip(c).zip(u) {
                *o += ci * ui;
            }
        }
        out
    }

    /// `P u`.
    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let kin = self
            .spectral
            .apply_multiplier(u, |k| Complex64::new(0.5 * k.iter().map(|v| v * v).sum::<f64>(), 0.0));
        let rem = self.remainder(u);
        kin.into_iter().zip(rem).map(|(a, b)| a + b).collect()
    }

    /// `e^{−iτ½|D|²} u`.
    pub fn free_step(&self, u: &[Complex64], tau: f64) -> Vec<Complex64> {
        self.spectral
            .apply_multiplier(u, |k| (-I * (0.5 * tau * k.iter().map(|v| v * v).sum::<f64>())).exp())
    }

    /// `e^{−iτ(P − ½|D|²)} u` by a Taylor series, sub-stepped so that each
    /// sub-step satisfies `|τ'|·ρ ≤ ½`.
    pub fn remainder_step(&self, u: &[Complex64], tau: f64) -> Vec<Complex64> {
        if self.rho == 0.0 {
            return u.to_vec();
        }
        let m = ((tau.abs() * self.rho) / 0.5).ceil().max(1.0) as usize;
        let sub = tau / m as f64;
        let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut acc = u.to_vec();
        for _ in 0..m {
            let mut term = acc.clone();
            let mut next = acc.clone();
            for n in 1..=60 {
                let v = self.remainder(&term);
                let f = -I * sub / n as f64;
                term = v.into_iter().map(|z| z * f).collect();
                for (a, t) in next.iter_mut().zip(&term) {
                    *a += t;
                }
                if norm(&term) <= 1e-17 * norm(&next) {
                    break;
                }
            }
            acc = next;
        }
        acc
    }
}

fn check_aliasing(spectral: &Spectral, u: &[Complex64], strict: bool) -> Result<f64> {
    let tail = spectral.tail_fraction(u);
    if tail > ALIASING_LIMIT {
        let msg = format!(
            "top {}% of the spectrum carries {tail:.3e} of the energy",
            crate::spectral::TAIL_BAND * 100.0
        );
        if strict {
            return Err(Error::Aliasing(msg));
        }
        log::warn!("{msg}");
    }
    Ok(tail)
}

/// `P u` with spectral derivatives on the periodic extension of the box.
pub fn apply_p(op: &SchrodingerOperator, u: &SampledField, strict: bool) -> Result<SampledField> {
    let disc = Discretized::new(op, u.grid())?;
    check_aliasing(disc.spectral(), u.values(), strict)?;
    u.with_values(disc.apply(u.values()))
}

/// Fraction of `Σ|u|²` within `BOUNDARY_CELLS` of any face of the box.
pub fn boundary_fraction(grid: &GridSpec, u: &[Complex64]) -> f64 {
    let mut total = 0.0;
    let mut edge = 0.0;
    for (flat, z) in u.iter().enumerate() {
        let e = z.norm_sqr();
        total += e;
        let idx = grid.multi_index(flat);
        if idx
            .iter()
            .zip(grid.points())
            .any(|(&i, &n)| i < BOUNDARY_CELLS || i + BOUNDARY_CELLS >= n)
        {
            edge += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        edge / total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationMethod {
    ExactFree,
    Strang,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PropagateOptions {
    pub strict: bool,
    /// Also run with twice the steps and report the difference.
    pub estimate_error: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub field: SampledField,
    pub method: PropagationMethod,
    pub steps: usize,
    pub norm_drift: f64,
    /// Largest boundary-layer mass fraction seen over the run.
    pub boundary_fraction: f64,
    /// `‖u_N − u_{2N}‖` when requested (splitting path only).
    pub step_halving_error: Option<f64>,
}

struct Run {
    values: Vec<Complex64>,
    boundary: f64,
}

fn strang(disc: &Discretized, u0: &[Complex64], t: f64, steps: usize) -> Run {
    let tau = t / steps as f64;
    let grid = disc.spectral().grid();
    let mut u = u0.to_vec();
    let mut boundary: f64 = boundary_fraction(grid, &u);
    for _ in 0..steps {
        u = disc.free_step(&u, tau / 2.0);
        u = disc.remainder_step(&u, tau);
        u = disc.free_step(&u, tau / 2.0);
        boundary = boundary.max(boundary_fraction(grid, &u));
    }
    Run { values: u, boundary }
}

/// Solves `∂_t u + iPu = 0` to time `t ≥ 0`.
///
/// The free operator uses the exact propagator in one step; everything
/// else goes through Strang splitting with `steps` steps.
pub fn propagate(op: &SchrodingerOperator, u0: &SampledField, t: f64, steps: usize, opts: PropagateOptions) -> Result<Propagation> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("propagation time {t} must be finite and non-negative")));
    }
    let grid = u0.grid();
    let disc = Discretized::new(op, grid)?;
    check_aliasing(disc.spectral(), u0.values(), opts.strict)?;
    let n0 = l2_norm(u0);
    if t == 0.0 {
        return Ok(Propagation {
            field: u0.clone(),
            method: if op.is_free() {
                PropagationMethod::ExactFree
            } else {
                PropagationMethod::Strang
            },
            steps: 0,
            norm_drift: 0.0,
            boundary_fraction: boundary_fraction(grid, u0.values()),
            step_halving_error: None,
        });
    }
    let (method, run, steps, halving) = if op.is_free() {
        let v = disc.free_step(u0.values(), t);
        let b = boundary_fraction(grid, u0.values()).max(boundary_fraction(grid, &v));
        (PropagationMethod::ExactFree, Run { values: v, boundary: b }, 1, None)
    } else {
        if steps == 0 {
            return Err(Error::InvalidInput("splitting needs at least one step".into()));
        }
        if disc.metric_sup() > SPLITTING_METRIC_LIMIT {
            return Err(Error::Precondition(format!(
                "metric perturbation {:.3} exceeds the splitting limit {SPLITTING_METRIC_LIMIT}",
                disc.metric_sup()
            )));
        }
        let run = strang(&disc, u0.values(), t, steps);
        let halving = if opts.estimate_error {
            let fine = strang(&disc, u0.values(), t, 2 * steps);
            let diff: Vec<Complex64> = run.values.iter().zip(&fine.values).map(|(a, b)| a - b).collect();
            Some(crate::field::weighted_sq_sum(grid, &diff).sqrt())
        } else {
            None
        };
        (PropagationMethod::Strang, run, steps, halving)
    };
    let field = u0.with_values(run.values)?;
    let n1 = l2_norm(&field);
    let norm_drift = if n0 > 0.0 { (n1 - n0).abs() / n0 } else { n1 };
    if op.is_flat_self_adjoint() && norm_drift > INSTABILITY_DRIFT {
        return Err(Error::Instability(format!(
            "norm drifted by {norm_drift:.3e} for a self-adjoint operator"
        )));
    }
    if run.boundary > BOUNDARY_LIMIT {
        let msg = format!("{:.3e} of the mass reached the boundary layer; enlarge the box", run.boundary);
        if opts.strict {
            return Err(Error::Truncation(msg));
        }
        log::warn!("{msg}");
    }
    Ok(Propagation {
        field,
        method,
        steps,
        norm_drift,
        boundary_fraction: run.boundary,
        step_halving_error: halving,
    })
}

/// Solutions at each of the (increasing, non-negative) `times`, each taken
/// from `u0` directly on the exact path and marched with steps no longer
/// than `max_dt` on the splitting path.
pub fn propagate_series(
    op: &SchrodingerOperator,
    u0: &SampledField,
    times: &[f64],
    max_dt: f64,
    opts: PropagateOptions,
) -> Result<Vec<SampledField>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidInput("snapshot times must be non-negative and increasing".into()));
    }
    if !(max_dt > 0.0) {
        return Err(Error::InvalidInput("max_dt must be positive".into()));
    }
    if op.is_free() {
        return times.iter().map(|&t| propagate(op, u0, t, 1, opts).map(|p| p.field)).collect();
    }
    let mut out = Vec::with_capacity(times.len());
    let mut cur = u0.clone();
    let mut t_cur = 0.0;
    for &t in times {
        let dt = t - t_cur;
        let steps = (dt / max_dt).ceil().max(1.0) as usize;
        cur = propagate(
            op,
            &cur,
            dt,
            steps,
            PropagateOptions {
                estimate_error: false,
                ..opts
            },
        )?
        .field;
        t_cur = t;
        out.push(cur.clone());
    }
    Ok(out)
}

/// Writes `u_t{index}.bin` for each snapshot plus `manifest.json` with
/// `{t_values, grid, operator_config}`.
pub fn save_snapshots(dir: &Path, times: &[f64], fields: &[SampledField], op: &SchrodingerOperator) -> Result<()> {
    if times.len() != fields.len() {
        return Err(Error::InvalidInput("one time per snapshot".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in fields.iter().enumerate() {
        save_field(f, &dir.join(format!("u_t{i}.bin")))?;
    }
    let manifest = serde_json::json!({
        "t_values": times,
        "grid": fields.first().map(|f| f.grid().clone()),
        "operator_config": op,
    });
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientCheck {
    pub name: String,
    /// Power of `⟨x⟩` in the envelope at `α = 0`.
    pub exponent: f64,
    pub worst_ratio: Option<f64>,
    pub worst_alpha: Option<Vec<usize>>,
    pub worst_x: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub params: GevreyParams,
    pub checks: Vec<CoefficientCheck>,
    pub pass: bool,
}

impl AssumptionReport {
    pub fn worst_ratio(&self) -> f64 {
        self.checks.iter().filter_map(|c| c.worst_ratio).fold(0.0, f64::max)
    }
}

/// Sample points used to calibrate built-in envelopes: `[−20, 20]^n`.
pub fn calibration_points(dim: usize) -> Result<Vec<Vec<f64>>> {
    let g = GridSpec::cube(dim, -20.0, 20.0, if dim == 1 { 401 } else { 41 })?;
    Ok((0..g.len()).map(|i| g.node(i)).collect())
}

/// Worst `|∂^α f(x)| / (C0 K0^{|α|} α!^s ⟨x⟩^{e−|α|})` for every coefficient
/// over the points and `|α| ≤ 4`.
pub fn validate_assumption_a(op: &SchrodingerOperator, points: &[Vec<f64>]) -> Result<AssumptionReport> {
    if points.is_empty() {
        return Err(Error::InvalidInput("no sample points".into()));
    }
    let p = *op.envelope();
    let (s, sigma) = (p.s(), p.sigma());
    let n = op.dim();
    let mut items: Vec<(String, f64, Coefficient)> = Vec::new();
    for j in 0..n {
        for k in j..n {
            items.push((format!("a{}{}", j + 1, k + 1), -sigma, op.metric.perturbation(j, k)));
        }
    }
    for (j, b) in op.b.iter().enumerate() {
        items.push((format!("re_b{}", j + 1), 1.0 - sigma, b.re.clone()));
        items.push((format!("im_b{}", j + 1), 1.0 / s - 1.0 - sigma, b.im.clone()));
    }
    items.push(("re_c".into(), 2.0 - sigma, op.c.re.clone()));
    items.push(("im_c".into(), 1.0 / s - sigma, op.c.im.clone()));

    let mut checks = Vec::new();
    for (name, exponent, f) in items {
        let jet = Jet::new(n, f);
        let mut check = CoefficientCheck {
            name,
            exponent,
            worst_ratio: Some(0.0),
            worst_alpha: None,
            worst_x: None,
            error: None,
        };
        for x in points {
            let t = match jet.taylor(x, ENVELOPE_ORDER) {
                Ok(t) => t,
                Err(e) => {
                    check.worst_ratio = None;
                    check.error = Some(e.to_string());
                    break;
                }
            };
            for (alpha, coeff) in t.terms() {
                let order: usize = alpha.iter().sum();
                let d = (coeff * multi_factorial(&alpha)).abs();
                if d == 0.0 {
                    continue;
                }
                let env = p.c0() * p.k0().powi(order as i32) * multi_factorial(&alpha).powf(s) * bracket(x).powf(exponent - order as f64);
                let r = d / env;
                if r > check.worst_ratio.unwrap_or(0.0) {
                    check.worst_ratio = Some(r);
                    check.worst_alpha = Some(alpha.clone());
                    check.worst_x = Some(x.clone());
                }
            }
        }
        checks.push(check);
    }
    let pass = checks.iter().all(|c| c.error.is_none() && c.worst_ratio.is_some_and(|r| r <= 1.0));
    Ok(AssumptionReport { params: p, checks, pass })
}

//! Almost-analytic extensions of Gevrey functions on complex strips
//! `S_w = {x + iy : |y_j| < w}`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_decay_norms, AbscissaKind, DecayFit, NORM_FLOOR};
use crate::grid::GridSpec;
use crate::jet::{factorial, multi_factorial, multi_indices, JetOracle, Series};
use crate::params::check_order;

/// `N(s, R, w) = floor((R w)^{−1/(s−1)})`.
///
/// Values within 1e-9 (relative) of an integer are snapped to it first so
/// that exact powers such as `0.01^{-1/2}` are not lost to rounding.
pub fn truncation_order(s: f64, r: f64, w: f64) -> Result<usize> {
    check_order(s)?;
    if !(r > 0.0 && r.is_finite()) || !(w > 0.0 && w.is_finite()) {
        return Err(Error::Parameter(format!("need R > 0 and w > 0, got R = {r}, w = {w}")));
    }
    let v = (r * w).powf(-1.0 / (s - 1.0));
    let nearest = v.round();
    let v = if (v - nearest).abs() <= 1e-9 * nearest.max(1.0) { nearest } else { v };
    if v > 1e6 {
        return Err(Error::Parameter(format!("truncation order {v:.3e} is impractically large")));
    }
    Ok(v.floor() as usize)
}

/// `Ω = (s−1)/R^{1/(s−1)}`, the exponential rate in the ∂̄ bound.
pub fn omega(s: f64, r: f64) -> f64 {
    (s - 1.0) / r.powf(1.0 / (s - 1.0))
}

/// `Σ_{|α|<=n} (iy)^α c_α` for the Taylor coefficients `c` of `f` at `x`.
pub fn extend_series(t: &Series, y: &[f64], n: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for alpha in multi_indices(t.dim(), n) {
        acc += iy_pow(y, &alpha) * t.coeff(&alpha);
    }
    acc
}

/// `∂̄_j f̃ = ½ Σ_{|γ|=n} (iy)^γ (γ_j+1) c_{γ+e_j}`. For `n = 0` this is
/// `½ ∂_j f`.
pub fn dbar_series(t: &Series, y: &[f64], n: usize, j: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for gamma in multi_indices(t.dim(), n).into_iter().filter(|g| g.iter().sum::<usize>() == n) {
        let mut g1 = gamma.clone();
        g1[j] += 1;
        acc += iy_pow(y, &gamma) * ((gamma[j] + 1) as f64 * t.coeff(&g1));
    }
    acc * 0.5
}

fn iy_pow(y: &[f64], alpha: &[usize]) -> Complex64 {
    let mut p = Complex64::new(1.0, 0.0);
    for (yj, &a) in y.iter().zip(alpha) {
        p *= Complex64::new(0.0, *yj).powu(a as u32);
    }
    p
}

/// Truncated-Taylor extension of a jet oracle on the strip `S_w`.
pub struct AAExtension<'a> {
    oracle: &'a dyn JetOracle,
    s: f64,
    r: f64,
    w: f64,
    n: usize,
}

impl<'a> AAExtension<'a> {
    pub fn new(oracle: &'a dyn JetOracle, s: f64, r: f64, w: f64) -> Result<Self> {
        let n = truncation_order(s, r, w)?;
        Ok(AAExtension { oracle, s, r, w, n })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> f64 {
        self.w
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn omega(&self) -> f64 {
        omega(self.s, self.r)
    }

    fn check_point(&self, x: &[f64], y: &[f64]) -> Result<()> {
        let d = self.oracle.dim();
        if x.len() != d || y.len() != d {
            return Err(Error::InvalidInput(format!("point must have {d} real and {d} imaginary parts")));
        }
        if let Some(v) = y.iter().find(|v| !(v.abs() < self.w)) {
            return Err(Error::Domain(format!("|y| = {} is outside the strip of half-width {}", v.abs(), self.w)));
        }
        Ok(())
    }

    fn jet(&self, x: &[f64], order: usize) -> Result<Series> {
        self.oracle.taylor(x, order).map_err(|e| match e {
            Error::Jet { reason, .. } => Error::Jet { order, reason },
            other => other,
        })
    }

    /// `f̃(x + iy)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<Complex64> {
        self.check_point(x, y)?;
        if y.iter().all(|&v| v == 0.0) {
            return Ok(Complex64::new(self.oracle.value(x)?, 0.0));
        }
        Ok(extend_series(&self.jet(x, self.n)?, y, self.n))
    }

    /// Exact `∂̄_j f̃ (x + iy)` from the closed form; no differencing.
    pub fn dbar_defect(&self, x: &[f64], y: &[f64], j: usize) -> Result<Complex64> {
        self.check_point(x, y)?;
        if j >= x.len() {
            return Err(Error::InvalidInput(format!("axis {j} out of range")));
        }
        Ok(dbar_series(&self.jet(x, self.n + 1)?, y, self.n, j))
    }

    /// `∂_x^α ∂_y^β f̃ (x + iy)`.
    pub fn eval_derivative(&self, x: &[f64], y: &[f64], alpha: &[usize], beta: &[usize]) -> Result<Complex64> {
        self.check_point(x, y)?;
        let la: usize = alpha.iter().sum();
        let t = self.jet(x, self.n + la)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for gamma in multi_indices(t.dim(), self.n) {
            if gamma.iter().zip(beta).any(|(g, b)| g < b) {
                continue;
            }
            // ∂_x^α (∂^γ f/γ!) = c_{γ+α} (γ+α)!/γ!
            let ga: Vec<usize> = gamma.iter().zip(alpha).map(|(g, a)| g + a).collect();
            let cx = t.coeff(&ga) * multi_factorial(&ga) / multi_factorial(&gamma);
            // ∂_y^β (iy)^γ = i^{|γ|} γ!/(γ−β)! y^{γ−β}
            let mut cy = Complex64::new(0.0, 1.0).powu(gamma.iter().sum::<usize>() as u32);
            for ((g, b), yj) in gamma.iter().zip(beta).zip(y) {
                cy *= factorial(*g) / factorial(g - b) * yj.powi((g - b) as i32);
            }
            acc += cy * cx;
        }
        Ok(acc)
    }
}

/// How the strip supremum is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripSampling {
    pub real_points: usize,
    pub imag_points: usize,
}

impl Default for StripSampling {
    fn default() -> Self {
        StripSampling {
            real_points: 64,
            imag_points: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub w: f64,
    pub order: usize,
    pub abscissa: f64,
    /// Sampled supremum of `max_j |∂̄_j f̃|`; a lower bound of the true sup.
    pub sup_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbarReport {
    pub omega_theoretical: f64,
    pub tolerance: f64,
    pub rows: Vec<SweepRow>,
    pub identically_zero: bool,
    pub fit: Option<DecayFit>,
    pub pass: bool,
}

impl DbarReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("w,w_pow,log_sup_defect\n");
        for r in &self.rows {
            out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", r.w, r.abscissa, r.sup_defect.max(NORM_FLOOR).ln()));
        }
        out
    }

    pub fn verdict_json(&self) -> serde_json::Value {
        serde_json::json!({
            "omega_theoretical": self.omega_theoretical,
            "slope": self.fit.as_ref().map(|f| f.slope),
            "r2": self.fit.as_ref().map(|f| f.r_squared),
            "identically_zero": self.identically_zero,
            "pass": self.pass,
        })
    }
}

/// Sampled sup of `|∂̄ f̃|` over `box × (−w, w)^n` for each width, fitted
/// against `w^{−1/(s−1)}`. Passes when the slope is at most
/// `−Ω (1 − tolerance)`.
pub fn verify_dbar_bound(
    oracle: &dyn JetOracle,
    s: f64,
    r: f64,
    w_sweep: &[f64],
    sample_box: &GridSpec,
    sampling: StripSampling,
    tolerance: f64,
) -> Result<DbarReport> {
    check_order(s)?;
    if w_sweep.len() < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 widths, got {}", w_sweep.len())));
    }
    if w_sweep.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::InvalidInput("widths must be strictly decreasing".into()));
    }
    let dim = oracle.dim();
    if sample_box.dim() != dim {
        return Err(Error::InvalidInput("sample box dimension differs from the oracle".into()));
    }
    let reals = GridSpec::new(sample_box.lo().to_vec(), sample_box.hi().to_vec(), vec![sampling.real_points; dim])?;
    let mut rows = Vec::with_capacity(w_sweep.len());
    for &w in w_sweep {
        let ext = AAExtension::new(oracle, s, r, w)?;
        let n = ext.order();
        let ys: Vec<f64> = (0..sampling.imag_points)
            .map(|k| -w + (k as f64 + 0.5) * 2.0 * w / sampling.imag_points as f64)
            .collect();
        let y_grid: Vec<Vec<f64>> = if dim == 1 {
            ys.iter().map(|&y| vec![y]).collect()
        } else {
            ys.iter().flat_map(|&a| ys.iter().map(move |&b| vec![a, b])).collect()
        };
        let sup = (0..reals.len())
            .into_par_iter()
            .map(|k| -> Result<f64> {
                let x = reals.node(k);
                let t = ext.jet(&x, n + 1)?;
                let mut m: f64 = 0.0;
                for y in &y_grid {
                    for j in 0..dim {
                        m = m.max(dbar_series(&t, y, n, j).norm());
                    }
                }
                Ok(m)
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        rows.push(SweepRow {
            w,
            order: n,
            abscissa: w.powf(-1.0 / (s - 1.0)),
            sup_defect: sup,
        });
    }
    let om = omega(s, r);
    if rows.iter().all(|r| r.sup_defect == 0.0) {
        return Ok(DbarReport {
            omega_theoretical: om,
            tolerance,
            rows,
            identically_zero: true,
            fit: None,
            pass: true,
        });
    }
    if rows.iter().all(|r| r.sup_defect < NORM_FLOOR) {
        return Err(Error::Saturated { count: rows.len() });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.abscissa).collect();
    let sups: Vec<f64> = rows.iter().map(|r| r.sup_defect).collect();
    let fit = fit_decay_norms(&xs, &sups, AbscissaKind::WPow)?;
    let pass = fit.slope <= -om * (1.0 - tolerance);
    Ok(DbarReport {
        omega_theoretical: om,
        tolerance,
        rows,
        identically_zero: false,
        fit: Some(fit),
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{Coefficient, Jet, Monomial};
    use twofloat::TwoFloat;

    fn gaussian() -> Jet {
        Jet::new(
            1,
            Coefficient::Gaussian {
                amplitude: 1.0,
                center: vec![0.0],
                scale: 1.0,
            },
        )
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncation_order(2.0, 1.0, 0.1).unwrap(), 10);
        assert_eq!(truncation_order(3.0, 1.0, 0.01).unwrap(), 10);
        assert_eq!(truncation_order(2.0, 2.0, 1.0).unwrap(), 0);
        assert!(matches!(truncation_order(1.0, 1.0, 0.1), Err(Error::UnsupportedOrder(_))));
    }

    #[test]
    fn quadratic_is_continued_exactly() {
        let f = Jet::new(
            1,
            Coefficient::Polynomial {
                terms: vec![Monomial { coeff: 1.0, powers: vec![2] }],
            },
        );
        let ext = AAExtension::new(&f, 2.0, 1.0, 0.5).unwrap();
        assert_eq!(ext.order(), 2);
        let z = Complex64::new(0.7, -0.3);
        assert!((ext.eval(&[z.re], &[z.im]).unwrap() - z * z).norm() < 1e-15);
        assert_eq!(ext.dbar_defect(&[0.7], &[-0.3], 0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn gaussian_within_taylor_tail() {
        let f = gaussian();
        let ext = AAExtension::new(&f, 2.0, 4.0, 0.05).unwrap();
        assert_eq!(ext.order(), 5);
        let z = Complex64::new(0.3, 0.04);
        let got = ext.eval(&[z.re], &[z.im]).unwrap();
        let exact = (-z * z).exp();
        // first omitted term (iy)^6 f^{(6)}/6!, with a safety factor of 2
        let t = f.taylor(&[0.3], 6).unwrap();
        let tail = 2.0 * z.im.powi(6) * t.coeff(&[6]).abs();
        assert!((got - exact).norm() <= tail, "{} > {tail}", (got - exact).norm());
    }

    #[test]
    fn zero_order_defect_is_half_gradient() {
        let f = gaussian();
        let ext = AAExtension::new(&f, 2.0, 2.0, 1.0).unwrap();
        assert_eq!(ext.order(), 0);
        let d = ext.dbar_defect(&[0.4], &[0.3], 0).unwrap();
        assert!((d.re - 0.5 * f.derivative(&[1], &[0.4]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn strip_is_enforced() {
        let f = gaussian();
        let ext = AAExtension::new(&f, 2.0, 4.0, 0.05).unwrap();
        assert!(matches!(ext.eval(&[0.0], &[0.05]), Err(Error::Domain(_))));
        assert!(matches!(ext.dbar_defect(&[0.0], &[-0.2], 0), Err(Error::Domain(_))));
    }

    /// `f̃` for `f = e^{−x²}` recomputed in double-double from the Hermite
    /// recurrence, so differencing it is not swamped by rounding.
    fn gaussian_extension_dd(x: TwoFloat, y: TwoFloat, n: usize) -> (TwoFloat, TwoFloat) {
        let one = TwoFloat::from(1.0);
        let two = TwoFloat::from(2.0);
        let e = (-(x * x)).exp();
        let (mut h0, mut h1) = (one, two * x);
        let (mut re, mut im) = (e, TwoFloat::from(0.0));
        let mut fact = one;
        let mut ypow = one;
        for k in 1..=n {
            if k > 1 {
                let h2 = two * x * h1 - TwoFloat::from(2.0 * (k - 1) as f64) * h0;
                h0 = h1;
                h1 = h2;
            }
            fact *= TwoFloat::from(k as f64);
            ypow *= y;
            // (iy)^k (−1)^k H_k e / k!
            let term = ypow * h1 * e / fact * if k % 2 == 1 { -one } else { one };
            match k % 4 {
                0 => re += term,
                1 => im += term,
                2 => re -= term,
                _ => im -= term,
            }
        }
        (re, im)
    }

    #[test]
    fn dbar_matches_finite_differences() {
        let f = gaussian();
        let ext = AAExtension::new(&f, 2.0, 4.0, 0.05).unwrap();
        let n = ext.order();
        let (x, y) = (0.2, 0.03);
        let (re, im) = gaussian_extension_dd(TwoFloat::from(x), TwoFloat::from(y), n);
        let direct = ext.eval(&[x], &[y]).unwrap();
        assert!((direct - Complex64::new(re.into(), im.into())).norm() < 1e-15);

        let h = TwoFloat::from(1e-4);
        let at = |dx: f64, dy: f64| gaussian_extension_dd(TwoFloat::from(x) + h * TwoFloat::from(dx), TwoFloat::from(y) + h * TwoFloat::from(dy), n);
        // fourth-order centered stencil
        let stencil = |g: &dyn Fn(f64) -> (TwoFloat, TwoFloat)| {
            let w = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
            let mut acc = (TwoFloat::from(0.0), TwoFloat::from(0.0));
            for (o, c) in w {
                let (a, b) = g(o);
                acc = (acc.0 + a * TwoFloat::from(c), acc.1 + b * TwoFloat::from(c));
            }
            let d = TwoFloat::from(12.0) * h;
            (acc.0 / d, acc.1 / d)
        };
        let (fx_re, fx_im) = stencil(&|o| at(o, 0.0));
        let (fy_re, fy_im) = stencil(&|o| at(0.0, o));
        // ½(∂_x + i∂_y)
        let fd_re: f64 = ((fx_re - fy_im) * TwoFloat::from(0.5)).into();
        let fd_im: f64 = ((fx_im + fy_re) * TwoFloat::from(0.5)).into();
        let fd = Complex64::new(fd_re, fd_im);
        let exact = ext.dbar_defect(&[x], &[y], 0).unwrap();
        assert!(exact.norm() > 1e-10);
        assert!((fd - exact).norm() <= 1e-6 * exact.norm(), "{fd} vs {exact}");
    }

    #[test]
    fn two_dim_polynomial_has_no_defect() {
        let f = Jet::new(
            2,
            Coefficient::Polynomial {
                terms: vec![
                    Monomial {
                        coeff: 2.0,
                        powers: vec![1, 2],
                    },
                    Monomial {
                        coeff: -1.0,
                        powers: vec![0, 1],
                    },
                ],
            },
        );
        let ext = AAExtension::new(&f, 2.0, 1.0, 0.2).unwrap();
        assert!(ext.order() > 3);
        for j in 0..2 {
            assert_eq!(ext.dbar_defect(&[0.3, -0.1], &[0.1, 0.05], j).unwrap().norm(), 0.0);
        }
        let (x, y) = (Complex64::new(0.3, 0.1), Complex64::new(-0.1, 0.05));
        let exact = x * y * y * 2.0 - y;
        assert!((ext.eval(&[0.3, -0.1], &[0.1, 0.05]).unwrap() - exact).norm() < 1e-15);
    }

    #[test]
    fn polynomial_sweep_reports_zero() {
        let f = Jet::new(
            1,
            Coefficient::Polynomial {
                terms: vec![Monomial { coeff: 1.0, powers: vec![3] }],
            },
        );
        let b = GridSpec::line(-1.0, 1.0, 2).unwrap();
        let rep = verify_dbar_bound(&f, 2.0, 1.0, &[0.2, 0.1, 0.05, 0.025], &b, StripSampling::default(), 0.2).unwrap();
        assert!(rep.identically_zero && rep.fit.is_none());
    }
}

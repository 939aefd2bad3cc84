//! The distorted symbol `a_ψ` and the Taylor-remainder check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::weight::PhaseWeight;
use crate::aae::AAExtension;
use crate::error::{Error, Result};
use crate::hamflow::hamilton_gradient;
use crate::jet::{Jet, JetOracle};
use crate::schrod::SchrodingerOperator;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `a_ψ(x,ξ) = ã(x − h^{1−1/s}∂_μψ, ξ + ih^{1−1/s}μ∂_μψ)` with
/// `∂_μ = μ^{−1}∂_x + i∂_ξ` and the x-extension taken with `R = K0`,
/// `w = h^{1−1/s}ν`.
pub struct DistortedSymbol<'a> {
    op: &'a SchrodingerOperator,
    h: f64,
    mu: f64,
    /// `(j, k, a_{jk})`, upper triangle.
    metric: Vec<(usize, usize, Jet)>,
    b: Vec<(Jet, Jet)>,
    c: (Jet, Jet),
    s: f64,
    k0: f64,
    width: f64,
    scale: f64,
}

impl<'a> DistortedSymbol<'a> {
    pub fn new(op: &'a SchrodingerOperator, h: f64, mu: f64, nu: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0) || !(mu > 0.0 && mu <= 1.0) || !(nu > 0.0) {
            return Err(Error::InvalidInput(format!("need h, mu in (0,1] and nu > 0 (h={h}, mu={mu}, nu={nu})")));
        }
        let n = op.dim();
        let mut metric = Vec::new();
        for j in 0..n {
            for k in j..n {
                metric.push((j, k, op.metric().entry(j, k).clone()));
            }
        }
        let b = op.b().iter().map(|b| (Jet::new(n, b.re.clone()), Jet::new(n, b.im.clone()))).collect();
        let c = (Jet::new(n, op.c().re.clone()), Jet::new(n, op.c().im.clone()));
        let p = op.envelope();
        let scale = h.powf(1.0 - 1.0 / p.s());
        Ok(DistortedSymbol {
            op,
            h,
            mu,
            metric,
            b,
            c,
            s: p.s(),
            k0: p.k0(),
            width: scale * nu,
            scale,
        })
    }

    /// Strip half-width `w = h^{1−1/s}ν`.
    pub fn width(&self) -> f64 {
        self.width
    }

    /// Truncation order of the x-extension.
    pub fn order(&self) -> Result<usize> {
        crate::aae::truncation_order(self.s, self.k0, self.width)
    }

    fn ext(&self, jet: &Jet, xr: &[f64], y: &[f64]) -> Result<Complex64> {
        if jet.family.is_zero() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if let Some(v) = jet.family.as_constant() {
            return Ok(Complex64::new(v, 0.0));
        }
        AAExtension::new(jet as &dyn JetOracle, self.s, self.k0, self.width)?.eval(xr, y)
    }

    /// The complex arguments `(x − h^{1−1/s}μ^{−1}∂_xψ, −h^{1−1/s}∂_ξψ, ζ)`.
    pub fn arguments(&self, x: &[f64], xi: &[f64], gx: &[f64], gxi: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<Complex64>) {
        let n = x.len();
        let k = self.scale;
        let xr = (0..n).map(|j| x[j] - k * gx[j] / self.mu).collect();
        let y = (0..n).map(|j| -k * gxi[j]).collect();
        let zeta = (0..n).map(|j| Complex64::new(xi[j] - k * self.mu * gxi[j], k * gx[j])).collect();
        (xr, y, zeta)
    }

    pub fn eval(&self, weight: &dyn PhaseWeight, x: &[f64], xi: &[f64]) -> Result<Complex64> {
        let (gx, gxi) = weight.gradient(x, xi);
        self.eval_with_gradient(x, xi, &gx, &gxi)
    }

    pub fn eval_with_gradient(&self, x: &[f64], xi: &[f64], gx: &[f64], gxi: &[f64]) -> Result<Complex64> {
        let n = self.op.dim();
        if x.len() != n || xi.len() != n {
            return Err(Error::InvalidInput(format!("point must have {n}+{n} components")));
        }
        let (xr, y, zeta) = self.arguments(x, xi, gx, gxi);
        let mut p = Complex64::new(0.0, 0.0);
        for (j, k, a) in &self.metric {
            let v = self.ext(a, &xr, &y)?;
            let f = if j == k { 1.0 } else { 2.0 };
            p += v * zeta[*j] * zeta[*k] * f;
        }
        let mut bz = Complex64::new(0.0, 0.0);
        for (j, (re, im)) in self.b.iter().enumerate() {
            bz += (self.ext(re, &xr, &y)? + I * self.ext(im, &xr, &y)?) * zeta[j];
        }
        let c = self.ext(&self.c.0, &xr, &y)? + I * self.ext(&self.c.1, &xr, &y)?;
        Ok(p * 0.5 / (self.h * self.h) + bz / self.h + c)
    }
}

/// `H_pψ = ∂_ξp·∂_xψ − ∂_xp·∂_ξψ` for the principal symbol of `op`.
pub fn hamilton_derivative(op: &SchrodingerOperator, x: &[f64], xi: &[f64], gx: &[f64], gxi: &[f64]) -> Result<f64> {
    let (dxi, dx) = hamilton_gradient(op.metric(), x, xi)?;
    Ok((0..x.len()).map(|j| dxi[j] * gx[j] - dx[j] * gxi[j]).sum())
}

/// `h^{−2/s}μ² + h^{−1}μ^{σ−1/s+1} + μ^{σ−1/s}`.
pub fn lemma_scale(h: f64, mu: f64, s: f64, sigma: f64) -> f64 {
    h.powf(-2.0 / s) * mu * mu + mu.powf(sigma - 1.0 / s + 1.0) / h + mu.powf(sigma - 1.0 / s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub h: f64,
    pub mu: f64,
    pub c_eff: f64,
    pub scale: f64,
    pub samples: usize,
    pub worst_x: Vec<f64>,
    pub worst_xi: Vec<f64>,
}

/// `max |Im a_ψ − h^{−1−1/s}H_pψ|` over the samples, divided by
/// [`lemma_scale`].
pub fn check_lemma_taylor(
    op: &SchrodingerOperator,
    weight: &dyn PhaseWeight,
    h: f64,
    mu: f64,
    samples: &[(Vec<f64>, Vec<f64>)],
) -> Result<LemmaReport> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty sample set".into()));
    }
    let p = op.envelope();
    let sym = DistortedSymbol::new(op, h, mu, weight.nu())?;
    let scale = lemma_scale(h, mu, p.s(), p.sigma());
    let hp_scale = h.powf(-1.0 - 1.0 / p.s());
    let mut worst = (0.0, 0usize);
    for (i, (x, xi)) in samples.iter().enumerate() {
        let (gx, gxi) = weight.gradient(x, xi);
        let a = sym.eval_with_gradient(x, xi, &gx, &gxi)?;
        let hp = hamilton_derivative(op, x, xi, &gx, &gxi)?;
        let d = (a.im - hp_scale * hp).abs();
        if d > worst.0 {
            worst = (d, i);
        }
    }
    Ok(LemmaReport {
        h,
        mu,
        c_eff: worst.0 / scale,
        scale,
        samples: samples.len(),
        worst_x: samples[worst.1].0.clone(),
        worst_xi: samples[worst.1].1.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aae::extend_series;
    use crate::estimates::step::GevreyStep;
    use crate::estimates::weight::{TransportWeight, ZeroWeight};
    use crate::params::GevreyParams;

    fn free() -> SchrodingerOperator {
        SchrodingerOperator::free(1, GevreyParams::new(2.0, 1.0, 0.05, 0.5).unwrap())
    }

    #[test]
    fn zero_weight_gives_the_plain_symbol() {
        let op = SchrodingerOperator::builtin_perturbed().unwrap();
        let z = ZeroWeight { dim: 1, nu: 10.0 };
        let sym = DistortedSymbol::new(&op, 0.05, 0.1, z.nu()).unwrap();
        for (x, xi) in [(-3.0, 0.7), (0.0, 1.0), (12.0, -2.0)] {
            let a = sym.eval(&z, &[x], &[xi]).unwrap();
            let plain = op.symbol(0.05, &[x], &[Complex64::new(xi, 0.0)]).unwrap();
            assert!((a - plain).norm() <= 1e-12 * plain.norm());
        }
    }

    #[test]
    fn free_symbol_closed_form() {
        let step = GevreyStep::new(2.0).unwrap();
        let (h, mu) = (0.05, 0.1);
        let w = TransportWeight::new(-1.0, h, 0.1, &[1.0], &step, 0.05).unwrap();
        let op = free();
        let sym = DistortedSymbol::new(&op, h, mu, w.nu()).unwrap();
        let d1 = 0.025;
        let tau = w.tau();
        for (x, xi) in [
            (tau + 0.7 * d1 * tau.abs(), 1.0 + 0.6 * d1),
            (tau, 1.0 + 0.8 * d1),
            (tau - 1.5 * d1 * tau.abs(), 1.0),
        ] {
            let (gx, gxi) = w.gradient(&[x], &[xi]);
            let th = h.powf(0.5) * mu * Complex64::new(gx[0] / mu, gxi[0]);
            let z = Complex64::new(xi, 0.0) + I * th;
            let exact = z * z * 0.5 / (h * h);
            let a = sym.eval(&w, &[x], &[xi]).unwrap();
            assert!((a - exact).norm() <= 1e-12 * exact.norm(), "{a} vs {exact}");
        }
    }

    #[test]
    fn doubling_the_truncation_order() {
        let step = GevreyStep::new(2.0).unwrap();
        let op = SchrodingerOperator::builtin_perturbed().unwrap();
        let (h, mu) = (0.05, 0.1);
        let w = TransportWeight::new(-1.0, h, 0.1, &[1.0], &step, op.envelope().k0()).unwrap();
        let sym = DistortedSymbol::new(&op, h, mu, w.nu()).unwrap();
        let n = sym.order().unwrap();
        let d1 = 0.025;
        let tau = w.tau();
        let (x, xi) = ([tau + 0.7 * d1 * tau.abs()], [1.0 + 0.6 * d1]);
        let (gx, gxi) = w.gradient(&x, &xi);
        let (xr, y, zeta) = sym.arguments(&x, &xi, &gx, &gxi);
        let ext2 = |c: &crate::jet::Coefficient| extend_series(&c.taylor(&xr, 2 * n).unwrap(), &y, 2 * n);
        let a = ext2(&op.metric().entry(0, 0).family);
        let b = ext2(&op.b()[0].re);
        let c = ext2(&op.c().re);
        let doubled = a * zeta[0] * zeta[0] * 0.5 / (h * h) + b * zeta[0] / h + c;
        let got = sym.eval(&w, &x, &xi).unwrap();
        // tail of order (|y|/R)^{N+1}-type terms, weighted by h^{-2}
        let yr = y[0].abs();
        let tail = (0..=2 * n).skip(n + 1).map(|k| (yr / op.envelope().k0()).powi(k as i32)).sum::<f64>() * op.envelope().c0() / (h * h);
        assert!(
            (got - doubled).norm() <= tail.max(1e-12 * got.norm()),
            "{} > {tail}",
            (got - doubled).norm()
        );
    }

    #[test]
    fn lemma_check_examples() {
        let z = ZeroWeight { dim: 1, nu: 10.0 };
        let pts = vec![(vec![5.0], vec![1.0]), (vec![-3.0], vec![0.5])];
        let r = check_lemma_taylor(&free(), &z, 0.1, 0.2, &pts).unwrap();
        assert_eq!(r.c_eff, 0.0);
        assert!(check_lemma_taylor(&free(), &z, 0.1, 0.2, &[]).is_err());
        // free operator: the remainder is exactly h^{−2/s}μ ∂_xψ ∂_ξψ
        let step = GevreyStep::new(2.0).unwrap();
        let (h, mu) = (0.05, 0.1);
        let w = TransportWeight::new(-1.0, h, 0.1, &[1.0], &step, 0.05).unwrap();
        let tau = w.tau();
        let pts: Vec<_> = (0..50)
            .map(|i| {
                (
                    vec![tau + (i as f64 / 25.0 - 1.0) * 0.05 * tau.abs()],
                    vec![1.0 + 0.02 * (i % 7) as f64 / 7.0],
                )
            })
            .collect();
        let r = check_lemma_taylor(&free(), &w, h, mu, &pts).unwrap();
        let closed = pts
            .iter()
            .map(|(x, xi)| {
                let (gx, gxi) = w.gradient(x, xi);
                (h.powf(-1.0) * mu * gx[0] * gxi[0]).abs()
            })
            .fold(0.0, f64::max)
            / r.scale;
        assert!((r.c_eff - closed).abs() <= 1e-9 * closed.max(1e-300), "{} vs {closed}", r.c_eff);
    }
}

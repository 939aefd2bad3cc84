//! Exact truncated Taylor series in one or two variables, and the built-in
//! coefficient families whose jets they carry.
//!
//! A [`Series`] stores `∂^α f(x0) / α!` for every `|α| <= order`. All
//! arithmetic is truncated at the series order, so derivatives of any order
//! come out of closed-form composition rules, never finite differences.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// `α!` for a multi-index.
pub fn multi_factorial(alpha: &[usize]) -> f64 {
    alpha.iter().map(|&a| factorial(a)).product()
}

/// Multi-indices with `|α| <= order` in graded lexicographic order: by total
/// degree, then by the first component descending.
pub fn multi_indices(dim: usize, order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for deg in 0..=order {
        match dim {
            1 => out.push(vec![deg]),
            2 => {
                for a in (0..=deg).rev() {
                    out.push(vec![a, deg - a]);
                }
            }
            _ => unreachable!("jets are limited to one or two variables"),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    dim: usize,
    order: usize,
    c: Vec<f64>,
}

impl Series {
    pub fn zeros(dim: usize, order: usize) -> Self {
        assert!(dim == 1 || dim == 2, "series dimension must be 1 or 2");
        let len = if dim == 1 { order + 1 } else { (order + 1) * (order + 1) };
        Series {
            dim,
            order,
            c: vec![0.0; len],
        }
    }

    pub fn constant(dim: usize, order: usize, v: f64) -> Self {
        let mut s = Series::zeros(dim, order);
        s.c[0] = v;
        s
    }

    /// The coordinate `x_j` expanded about `x0_j`.
    pub fn variable(dim: usize, order: usize, j: usize, x0: f64) -> Self {
        let mut s = Series::constant(dim, order, x0);
        if order >= 1 {
            let mut e = vec![0; dim];
            e[j] = 1;
            let k = s.idx(&e);
            s.c[k] = 1.0;
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn idx(&self, alpha: &[usize]) -> usize {
        if self.dim == 1 {
            alpha[0]
        } else {
            alpha[0] * (self.order + 1) + alpha[1]
        }
    }

    /// Taylor coefficient `∂^α f / α!`; zero beyond the stored order.
    pub fn coeff(&self, alpha: &[usize]) -> f64 {
        if alpha.iter().sum::<usize>() > self.order {
            0.0
        } else {
            self.c[self.idx(alpha)]
        }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `∂^α f(x0)`.
    pub fn derivative(&self, alpha: &[usize]) -> f64 {
        self.coeff(alpha) * multi_factorial(alpha)
    }

    /// `(α, coefficient)` in graded lexicographic order.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        multi_indices(self.dim, self.order).into_iter().map(move |a| {
            let v = self.coeff(&a);
            (a, v)
        })
    }

    pub fn scale(&self, k: f64) -> Series {
        Series {
            dim: self.dim,
            order: self.order,
            c: self.c.iter().map(|v| v * k).collect(),
        }
    }

    pub fn add_const(&self, k: f64) -> Series {
        let mut s = self.clone();
        s.c[0] += k;
        s
    }

    fn check_compatible(&self, other: &Series) {
        assert!(self.dim == other.dim && self.order == other.order, "series shape mismatch");
    }

    /// `Σ_k g[k] (self − self(x0))^k`, i.e. a univariate function with
    /// Taylor coefficients `g` at the constant term, composed with `self`.
    pub fn compose(&self, g: &[f64]) -> Series {
        let d = self.add_const(-self.c[0]);
        let top = g.len().min(self.order + 1);
        let mut acc = Series::constant(self.dim, self.order, if top > 0 { g[top - 1] } else { 0.0 });
        for k in (0..top.saturating_sub(1)).rev() {
            acc = (&acc * &d).add_const(g[k]);
        }
        acc
    }

    pub fn exp(&self) -> Series {
        let e0 = self.c[0].exp();
        if self.dim == 1 {
            // g' = q' g, coefficientwise.
            let q = &self.c;
            let mut g = vec![0.0; self.order + 1];
            g[0] = e0;
            for k in 1..=self.order {
                g[k] = (1..=k).map(|j| j as f64 * q[j] * g[k - j]).sum::<f64>() / k as f64;
            }
            return Series {
                dim: 1,
                order: self.order,
                c: g,
            };
        }
        let g: Vec<f64> = (0..=self.order).map(|k| e0 / factorial(k)).collect();
        self.compose(&g)
    }

    /// `self^p` for a positive constant term.
    pub fn powf(&self, p: f64) -> Result<Series> {
        let q0 = self.c[0];
        if q0 <= 0.0 {
            return Err(Error::Jet {
                order: self.order,
                reason: format!("power of non-positive base {q0}"),
            });
        }
        if self.dim == 1 {
            // q g' = p q' g, coefficientwise.
            let q = &self.c;
            let mut g = vec![0.0; self.order + 1];
            g[0] = q0.powf(p);
            for k in 1..=self.order {
                g[k] = (1..=k).map(|j| (p * j as f64 - (k - j) as f64) * q[j] * g[k - j]).sum::<f64>() / (k as f64 * q0);
            }
            return Ok(Series {
                dim: 1,
                order: self.order,
                c: g,
            });
        }
        let mut g = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        for k in 0..=self.order {
            g.push(binom * q0.powf(p - k as f64));
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        Ok(self.compose(&g))
    }

    pub fn recip(&self) -> Result<Series> {
        let q0 = self.c[0];
        if q0 == 0.0 {
            return Err(Error::Jet {
                order: self.order,
                reason: "reciprocal of zero".into(),
            });
        }
        let g: Vec<f64> = (0..=self.order).map(|k| (-1f64).powi(k as i32) / q0.powi(k as i32 + 1)).collect();
        Ok(self.compose(&g))
    }

    /// Series of `∂_j f`, one order shorter.
    pub fn partial(&self, j: usize) -> Series {
        let order = self.order.saturating_sub(1);
        let mut out = Series::zeros(self.dim, order);
        if self.order == 0 {
            return out;
        }
        for a in multi_indices(self.dim, order) {
            let mut b = a.clone();
            b[j] += 1;
            let k = out.idx(&a);
            out.c[k] = self.coeff(&b) * b[j] as f64;
        }
        out
    }
}

impl Add for &Series {
    type Output = Series;
    fn add(self, o: &Series) -> Series {
        self.check_compatible(o);
        Series {
            dim: self.dim,
            order: self.order,
            c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Series {
    type Output = Series;
    fn sub(self, o: &Series) -> Series {
        self.check_compatible(o);
        Series {
            dim: self.dim,
            order: self.order,
            c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Series {
    type Output = Series;
    fn mul(self, o: &Series) -> Series {
        self.check_compatible(o);
        let n = self.order;
        let mut out = Series::zeros(self.dim, n);
        if self.dim == 1 {
            for i in 0..=n {
                if self.c[i] == 0.0 {
                    continue;
                }
                for j in 0..=n - i {
                    out.c[i + j] += self.c[i] * o.c[j];
                }
            }
        } else {
            let w = n + 1;
            for a0 in 0..=n {
                for a1 in 0..=n - a0 {
                    let x = self.c[a0 * w + a1];
                    if x == 0.0 {
                        continue;
                    }
                    let rest = n - a0 - a1;
                    for b0 in 0..=rest {
                        for b1 in 0..=rest - b0 {
                            out.c[(a0 + b0) * w + a1 + b1] += x * o.c[b0 * w + b1];
                        }
                    }
                }
            }
        }
        out
    }
}

/// Claimed Gevrey envelope `|∂^α f(x)| <= C R^{|α|} α!^s ⟨x⟩^{a−|α|}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub c: f64,
    pub r: f64,
    pub a: f64,
}

impl Envelope {
    pub fn bound(&self, alpha: &[usize], x: &[f64], s: f64) -> f64 {
        let k: usize = alpha.iter().sum();
        self.c * self.r.powi(k as i32) * multi_factorial(alpha).powf(s) * bracket(x).powf(self.a - k as f64)
    }
}

/// `⟨x⟩ = (1 + |x|²)^{1/2}`.
pub fn bracket(x: &[f64]) -> f64 {
    (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Source of exact derivatives of a real function on `ℝ^n`, `n ∈ {1, 2}`.
pub trait JetOracle: Send + Sync {
    fn dim(&self) -> usize;

    /// Taylor coefficients at `x` through total degree `order`.
    fn taylor(&self, x: &[f64], order: usize) -> Result<Series>;

    fn envelope(&self) -> Option<Envelope> {
        None
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.taylor(x, 0)?.value())
    }

    fn derivative(&self, alpha: &[usize], x: &[f64]) -> Result<f64> {
        Ok(self.taylor(x, alpha.iter().sum())?.derivative(alpha))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let t = self.taylor(x, 1)?;
        Ok((0..self.dim())
            .map(|j| {
                let mut e = vec![0; self.dim()];
                e[j] = 1;
                t.coeff(&e)
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<usize>,
}

/// Built-in coefficient families. Every family has an exact jet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coefficient {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude · exp(−|x−center|²/scale²)`
    Gaussian {
        amplitude: f64,
        center: Vec<f64>,
        scale: f64,
    },
    /// `amplitude · ⟨x−center⟩^power`
    Bracket {
        amplitude: f64,
        center: Vec<f64>,
        power: f64,
    },
    /// `amplitude · exp(−1/(1−|x−center|²/radius²))` inside the ball, 0 outside.
    Bump {
        amplitude: f64,
        center: Vec<f64>,
        radius: f64,
    },
    /// `amplitude · exp(−((|x|²−radius²)/width)²)`, a smooth radial ring.
    Ring {
        amplitude: f64,
        radius: f64,
        width: f64,
    },
    Polynomial {
        terms: Vec<Monomial>,
    },
    Sum {
        terms: Vec<Coefficient>,
    },
    Product {
        factors: Vec<Coefficient>,
    },
}

impl Coefficient {
    pub fn is_zero(&self) -> bool {
        match self {
            Coefficient::Zero => true,
            Coefficient::Constant { value } => *value == 0.0,
            Coefficient::Gaussian { amplitude, .. }
            | Coefficient::Bracket { amplitude, .. }
            | Coefficient::Bump { amplitude, .. }
            | Coefficient::Ring { amplitude, .. } => *amplitude == 0.0,
            Coefficient::Polynomial { terms } => terms.iter().all(|m| m.coeff == 0.0),
            Coefficient::Sum { terms } => terms.iter().all(|t| t.is_zero()),
            Coefficient::Product { factors } => factors.iter().any(|t| t.is_zero()),
        }
    }

    /// Constant value if the family is constant by construction.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Coefficient::Zero => Some(0.0),
            Coefficient::Constant { value } => Some(*value),
            c if c.is_zero() => Some(0.0),
            Coefficient::Sum { terms } => terms.iter().map(|t| t.as_constant()).sum(),
            Coefficient::Polynomial { terms } if terms.iter().all(|m| m.powers.iter().all(|&p| p == 0)) => Some(terms.iter().map(|m| m.coeff).sum()),
            _ => None,
        }
    }

    fn check_center(center: &[f64], dim: usize) -> Result<()> {
        if center.len() != dim {
            return Err(Error::Jet {
                order: 0,
                reason: format!("center has {} components, point has {dim}", center.len()),
            });
        }
        Ok(())
    }

    /// `|x − center|²` as a series.
    fn radius_sq(x: &[f64], center: &[f64], order: usize) -> Series {
        let dim = x.len();
        let mut q = Series::zeros(dim, order);
        for j in 0..dim {
            let v = Series::variable(dim, order, j, x[j] - center[j]);
            q = &q + &(&v * &v);
        }
        q
    }

    pub fn taylor(&self, x: &[f64], order: usize) -> Result<Series> {
        let dim = x.len();
        if !(dim == 1 || dim == 2) {
            return Err(Error::Jet {
                order,
                reason: format!("dimension {dim} unsupported"),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("jet evaluation point".into()));
        }
        Ok(match self {
            Coefficient::Zero => Series::zeros(dim, order),
            Coefficient::Constant { value } => Series::constant(dim, order, *value),
            Coefficient::Gaussian { amplitude, center, scale } => {
                Self::check_center(center, dim)?;
                Self::radius_sq(x, center, order).scale(-1.0 / (scale * scale)).exp().scale(*amplitude)
            }
            Coefficient::Bracket { amplitude, center, power } => {
                Self::check_center(center, dim)?;
                Self::radius_sq(x, center, order)
                    .add_const(1.0)
                    .powf(power / 2.0)
                    .map_err(|e| with_order(e, order))?
                    .scale(*amplitude)
            }
            Coefficient::Bump { amplitude, center, radius } => {
                Self::check_center(center, dim)?;
                let u = Self::radius_sq(x, center, order).scale(-1.0 / (radius * radius)).add_const(1.0);
                if u.value() <= 0.0 {
                    Series::zeros(dim, order)
                } else {
                    u.recip().map_err(|e| with_order(e, order))?.scale(-1.0).exp().scale(*amplitude)
                }
            }
            Coefficient::Ring { amplitude, radius, width } => {
                let zero = vec![0.0; dim];
                let d = Self::radius_sq(x, &zero, order).add_const(-radius * radius).scale(1.0 / width);
                (&d * &d).scale(-1.0).exp().scale(*amplitude)
            }
            Coefficient::Polynomial { terms } => {
                let mut acc = Series::zeros(dim, order);
                for m in terms {
                    if m.powers.len() != dim {
                        return Err(Error::Jet {
                            order,
                            reason: "monomial arity differs from point dimension".into(),
                        });
                    }
                    let mut t = Series::constant(dim, order, m.coeff);
                    for (j, &p) in m.powers.iter().enumerate() {
                        let v = Series::variable(dim, order, j, x[j]);
                        for _ in 0..p {
                            t = &t * &v;
                        }
                    }
                    acc = &acc + &t;
                }
                acc
            }
            Coefficient::Sum { terms } => {
                let mut acc = Series::zeros(dim, order);
                for t in terms {
                    acc = &acc + &t.taylor(x, order)?;
                }
                acc
            }
            Coefficient::Product { factors } => {
                let mut acc = Series::constant(dim, order, 1.0);
                for t in factors {
                    acc = &acc * &t.taylor(x, order)?;
                }
                acc
            }
        })
    }
}

fn with_order(e: Error, order: usize) -> Error {
    match e {
        Error::Jet { reason, .. } => Error::Jet { order, reason },
        other => other,
    }
}

/// A coefficient family bound to a dimension, optionally carrying an
/// envelope claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jet {
    pub dim: usize,
    pub family: Coefficient,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<Envelope>,
}

impl Jet {
    pub fn new(dim: usize, family: Coefficient) -> Self {
        Jet { dim, family, envelope: None }
    }

    pub fn with_envelope(mut self, env: Envelope) -> Self {
        self.envelope = Some(env);
        self
    }

    pub fn zero(dim: usize) -> Self {
        Jet::new(dim, Coefficient::Zero)
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Jet::new(dim, Coefficient::Constant { value })
    }
}

impl JetOracle for Jet {
    fn dim(&self) -> usize {
        self.dim
    }

    fn taylor(&self, x: &[f64], order: usize) -> Result<Series> {
        if x.len() != self.dim {
            return Err(Error::Jet {
                order,
                reason: format!("point has {} components, jet is {}-d", x.len(), self.dim),
            });
        }
        self.family.taylor(x, order)
    }

    fn envelope(&self) -> Option<Envelope> {
        self.envelope
    }
}

/// Worst ratio `|∂^α f(x)| / envelope` over the given points and all
/// `|α| <= max_order`. `None` if the oracle claims no envelope.
pub fn envelope_ratio(oracle: &dyn JetOracle, s: f64, points: &[Vec<f64>], max_order: usize) -> Result<Option<f64>> {
    let Some(env) = oracle.envelope() else { return Ok(None) };
    let mut worst: f64 = 0.0;
    for x in points {
        let t = oracle.taylor(x, max_order)?;
        for (alpha, _) in t.terms() {
            worst = worst.max(t.derivative(&alpha).abs() / env.bound(&alpha, x, s));
        }
    }
    Ok(Some(worst))
}

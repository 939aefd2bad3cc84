//! Gevrey cutoff steps.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::jet::{factorial, Series};
use crate::params::check_order;

const PANELS: usize = 2048;

// 8-point Gauss–Legendre nodes and weights on [-1, 1].
const GL_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_W: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL_X.iter().zip(&GL_W) {
        acc += w * (f(c - r * x) + f(c + r * x));
    }
    acc * r
}

/// `B(v) = exp(−(v(1−v))^{−1/(s−1)})` on `(0, 1)`, zero elsewhere.
fn bump(v: f64, p: f64) -> f64 {
    if v <= 0.0 || v >= 1.0 {
        0.0
    } else {
        (-(v * (1.0 - v)).powf(-p)).exp()
    }
}

/// Even cutoff `χ₁` with `χ₁ = 1` on `|r| ≤ ½`, `χ₁ = 0` on `|r| ≥ 1`, and a
/// normalized Gevrey-`s` bump as `−χ₁′` in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "f64", try_from = "f64")]
pub struct GevreyStep {
    s: f64,
    p: f64,
    norm: f64,
    /// `∫_v^1 B` at the panel boundaries `v = k/PANELS`.
    tail: Vec<f64>,
}

impl From<GevreyStep> for f64 {
    fn from(g: GevreyStep) -> f64 {
        g.s
    }
}

impl TryFrom<f64> for GevreyStep {
    type Error = crate::error::Error;
    fn try_from(s: f64) -> Result<Self> {
        GevreyStep::new(s)
    }
}

impl GevreyStep {
    pub fn new(s: f64) -> Result<Self> {
        check_order(s)?;
        let p = 1.0 / (s - 1.0);
        let h = 1.0 / PANELS as f64;
        let mut tail = vec![0.0; PANELS + 1];
        for k in (0..PANELS).rev() {
            let a = k as f64 * h;
            tail[k] = tail[k + 1] + gauss_legendre(|v| bump(v, p), a, a + h);
        }
        Ok(GevreyStep { s, p, norm: tail[0], tail })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `∫_0^1 B`.
    pub fn normalizer(&self) -> f64 {
        self.norm
    }

    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        if r <= 0.5 {
            return 1.0;
        }
        if r >= 1.0 {
            return 0.0;
        }
        let v = 2.0 * r - 1.0;
        let k = ((v * PANELS as f64).floor() as usize).min(PANELS - 1);
        let b = (k + 1) as f64 / PANELS as f64;
        let part = if v < b { gauss_legendre(|u| bump(u, self.p), v, b) } else { 0.0 };
        (self.tail[k + 1] + part) / self.norm
    }

    /// `χ₁^{(k)}(r)` for `k ≤ order`, as a vector indexed by `k`.
    pub fn derivatives(&self, r: f64, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order + 1];
        out[0] = self.eval(r);
        let a = r.abs();
        if order == 0 || a <= 0.5 || a >= 1.0 {
            return out;
        }
        let v = 2.0 * a - 1.0;
        let sign: f64 = if r < 0.0 { -1.0 } else { 1.0 };
        if order == 1 {
            out[1] = -2.0 * bump(v, self.p) / self.norm * sign;
            return out;
        }
        // d^k/dr^k at |r|, then reflect for r < 0
        let x = Series::variable(1, order - 1, 0, v);
        let q = &x * &(&Series::constant(1, order - 1, 1.0) - &x);
        let b = match q.powf(-self.p) {
            Ok(t) => t.scale(-1.0).exp(),
            Err(_) => return out,
        };
        for k in 1..=order {
            let dk = b.coeff(&[k - 1]) * factorial(k - 1) * 2f64.powi(k as i32) / self.norm;
            out[k] = -dk * sign.powi(k as i32);
        }
        out
    }

    /// `χ₁′(r)`.
    pub fn derivative(&self, r: f64) -> f64 {
        self.derivatives(r, 1)[1]
    }

    /// `sup |χ₁′|`, attained at `r = 3/4`.
    pub fn max_slope(&self) -> f64 {
        2.0 * bump(0.5, self.p) / self.norm
    }

    /// `χ₂(r) = (1 − χ₁(A r))·χ₁(r/(2A))`: one on `[1/A, A]`, zero off
    /// `(1/(2A), 2A)`.
    pub fn plateau(&self, a: f64, r: f64) -> f64 {
        (1.0 - self.eval(a * r)) * self.eval(r / (2.0 * a))
    }
}

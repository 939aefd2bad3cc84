use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gevrey order and the symbol constants `(C0, K0, sigma)` bounding the
/// coefficient perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct GevreyParams {
    s: f64,
    c0: f64,
    k0: f64,
    sigma: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    s: f64,
    #[serde(rename = "C0")]
    c0: f64,
    #[serde(rename = "K0")]
    k0: f64,
    sigma: f64,
}

impl TryFrom<RawParams> for GevreyParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        GevreyParams::new(r.s, r.c0, r.k0, r.sigma)
    }
}

impl From<GevreyParams> for RawParams {
    fn from(p: GevreyParams) -> Self {
        RawParams {
            s: p.s,
            c0: p.c0,
            k0: p.k0,
            sigma: p.sigma,
        }
    }
}

/// Rejects `s <= 1`; every Gevrey routine in the crate goes through here.
pub fn check_order(s: f64) -> Result<()> {
    if s.is_finite() && s > 1.0 {
        Ok(())
    } else {
        Err(Error::UnsupportedOrder(s))
    }
}

impl GevreyParams {
    pub fn new(s: f64, c0: f64, k0: f64, sigma: f64) -> Result<Self> {
        check_order(s)?;
        if !(c0.is_finite() && c0 >= 0.0) {
            return Err(Error::Parameter(format!("C0 = {c0} must be finite and >= 0")));
        }
        if !(k0.is_finite() && k0 > 0.0) {
            return Err(Error::Parameter(format!("K0 = {k0} must be finite and > 0")));
        }
        if !(sigma > 0.0 && sigma <= 1.0 / s) {
            return Err(Error::Parameter(format!("sigma = {sigma} must lie in (0, 1/s] = (0, {}]", 1.0 / s)));
        }
        Ok(GevreyParams { s, c0, k0, sigma })
    }

    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn c0(&self) -> f64 {
        self.c0
    }
    pub fn k0(&self) -> f64 {
        self.k0
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates() {
        assert!(GevreyParams::new(2.0, 1.0, 1.0, 0.5).is_ok());
        assert!(matches!(GevreyParams::new(1.0, 1.0, 1.0, 0.5), Err(Error::UnsupportedOrder(_))));
        assert!(GevreyParams::new(2.0, 1.0, 1.0, 0.6).is_err());
        assert!(GevreyParams::new(2.0, -1.0, 1.0, 0.5).is_err());
        assert!(GevreyParams::new(2.0, 1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn serde_names() {
        let p: GevreyParams = serde_json::from_str(r#"{"s":2.0,"C0":0.5,"K0":0.25,"sigma":0.5}"#).unwrap();
        assert_eq!(p.k0(), 0.25);
        assert!(serde_json::from_str::<GevreyParams>(r#"{"s":0.5,"C0":0.5,"K0":0.25,"sigma":0.5}"#).is_err());
    }
}

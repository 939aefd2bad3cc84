//! Adaptive Dormand–Prince 5(4) integration with exact landing on
//! requested sample times.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Tolerance {
    pub fn new(tol: f64) -> Self {
        Tolerance {
            rtol: tol,
            atol: tol,
            max_steps: 5_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` through every time in `samples`
/// (monotone, all on one side of `t0`), returning the state at each.
pub fn integrate<F>(f: F, t0: f64, y0: &[f64], samples: &[f64], tol: Tolerance) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y0.len();
    let Some(&last) = samples.last() else { return Ok(Vec::new()) };
    let dir = if last < t0 { -1.0 } else { 1.0 };
    if samples.windows(2).any(|w| (w[1] - w[0]) * dir < 0.0) || (samples[0] - t0) * dir < 0.0 {
        return Err(Error::InvalidInput("sample times must move monotonically away from t0".into()));
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut out = Vec::with_capacity(samples.len());
    f(t, &y, &mut k[0])?;
    let span = (last - t0).abs().max(1e-300);
    let mut step = (span * 1e-3).min(0.1).max(1e-8) * dir;
    let mut steps = 0usize;
    for &target in samples {
        while (target - t) * dir > 0.0 {
            steps += 1;
            if steps > tol.max_steps {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: "step budget exhausted".into(),
                    last_state: y,
                });
            }
            let mut hh = step;
            let landing = (t + hh - target) * dir >= 0.0;
            if landing {
                hh = target - t;
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, a) in A[s].iter().enumerate().take(s) {
                        acc += hh * a * k[j][i];
                    }
                    tmp[i] = acc;
                }
                f(t + C[s] * hh, &tmp, &mut k[s])?;
            }
            // k[6] was evaluated at the 5th-order solution (FSAL)
            let mut err: f64 = 0.0;
            let mut ynew = vec![0.0; n];
            for i in 0..n {
                let mut y5 = y[i];
                let mut e = 0.0;
                for s in 0..7 {
                    y5 += hh * B5[s] * k[s][i];
                    e += hh * (B5[s] - B4[s]) * k[s][i];
                }
                ynew[i] = y5;
                let sc = tol.atol + tol.rtol * y[i].abs().max(y5.abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: "non-finite error estimate".into(),
                    last_state: y,
                });
            }
            if err <= 1.0 {
                t = if landing { target } else { t + hh };
                y = ynew;
                k.swap(0, 6);
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !landing || fac < 1.0 {
                    step = hh * fac;
                }
            } else {
                step = hh * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
            if step.abs() < 1e-14 * t.abs().max(1.0) {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: format!("step size collapsed to {:.3e}", step.abs()),
                    last_state: y,
                });
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let ts: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let ys = integrate(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0, 0.0],
            &ts,
            Tolerance::new(1e-12),
        )
        .unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0] - t.cos()).abs() < 1e-10);
            assert!((y[1] + t.sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn backward_in_time() {
        let ys = integrate(
            |_, y, d| {
                d[0] = y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            &[-1.0, -2.0],
            Tolerance::new(1e-12),
        )
        .unwrap();
        assert!((ys[1][0] - (-2f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn blow_up_is_reported() {
        let r = integrate(
            |_, y, d| {
                d[0] = y[0] * y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            &[2.0],
            Tolerance::new(1e-10),
        );
        assert!(matches!(r, Err(Error::IntegrationFailure { .. })));
    }
}

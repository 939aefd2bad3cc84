//! Weighted energy of a packet carried along the weight's trajectory, and
//! the Gronwall envelope fitted to it.

use mlab::estimates::{check_gronwall, energy_series, EnergyResolution, FlowParams, GevreyStep, TransportWeight, DEFAULT_DELTA_FRACTION};
use mlab::params::GevreyParams;
use mlab::schrod::{propagate_series, PropagateOptions, SchrodingerOperator};
use mlab::{l2_norm, GridSpec, SampledField};
use num_complex::Complex64;

fn main() -> mlab::Result<()> {
    let env = GevreyParams::new(2.0, 1.0, 0.05, 0.5)?;
    let op = SchrodingerOperator::free(1, env);
    let step = GevreyStep::new(env.s())?;
    let (t0, eta) = (2.0, 1.0);
    let delta = DEFAULT_DELTA_FRACTION * TransportWeight::max_delta(&step, env.k0());
    let refine = std::env::args().any(|a| a == "--refine");
    for h in [0.1, 0.05] {
        let flow = FlowParams {
            t0,
            h,
            delta,
            eta_minus: vec![eta],
            a: 4.0,
        };
        let x0 = -t0 * eta / h;
        let k = eta / h + 12.0;
        let dy = std::f64::consts::PI / (2.0 * k);
        let (lo, hi) = (x0 - 25.0, 15.0);
        let g = GridSpec::line(lo, hi, ((hi - lo) / dy).ceil() as usize)?;
        let u0 = SampledField::from_fn(g, |y| Complex64::from_polar((-(y[0] - x0).powi(2) / 2.0).exp(), eta * y[0] / h))?;
        let ts: Vec<f64> = (0..=56).map(|i| -t0 + i as f64 * t0 / 64.0).collect();
        let abs: Vec<f64> = ts.iter().map(|t| t + t0).collect();
        let fields = propagate_series(&op, &u0, &abs, 0.01, PropagateOptions::default())?;
        let snaps: Vec<(f64, SampledField)> = ts.iter().cloned().zip(fields).collect();
        let res = EnergyResolution::default();
        let series = energy_series(&snaps, &op, &flow, &res, false)?;
        let r = check_gronwall(&series, h, env.sigma(), env.s(), l2_norm(&u0))?;
        println!("h = {h}: C = {:.4e}, F below envelope: {}", r.c, r.pass);
        for (i, e) in series.iter().enumerate().step_by(8) {
            println!("  t = {:+.4}  mu = {:.4}  F = {:.6e}  envelope = {:.6e}", e.t, e.mu, e.f, r.envelope[i]);
        }
        if refine {
            let fine = energy_series(&snaps, &op, &flow, &res.refined(), false)?;
            let dev = series
                .iter()
                .zip(&fine)
                .map(|(a, b)| (a.f - b.f).abs() / b.f.abs().max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            println!("  refinement deviation {dev:.3e}");
        }
    }
    Ok(())
}

//! Invariants of the phase-space tests.

use std::f64::consts::PI;

use mlab::estimates::{energy_series, EnergyResolution, FlowParams, GevreyStep, TransportWeight, DEFAULT_DELTA_FRACTION};
use mlab::params::GevreyParams;
use mlab::schrod::{propagate_series, PropagateOptions, SchrodingerOperator};
use mlab::wfset::{hwf_test, mixed_momentum_norms, region_norm, ConicMultiplier, HwfOptions, PhaseRegion, WfOptions};
use mlab::{GridSpec, SampledField};
use num_complex::Complex64;
use proptest::prelude::*;

fn packet(grid: &GridSpec, x0: f64, xi0: f64) -> SampledField {
    SampledField::from_fn(grid.clone(), |x| Complex64::from_polar((-(x[0] - x0).powi(2) / 2.0).exp(), xi0 * x[0])).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn cone_membership_is_conic(
        ax in -3.0..3.0f64, axi in 0.2..3.0f64, ap in 0.05..1.5f64,
        x in -10.0..10.0f64, xi in -10.0..10.0f64, lambda in 0.01..100.0f64,
    ) {
        let c = PhaseRegion::cone(ax, axi, ap);
        // stay off the boundary, where rounding decides
        if let Some(a) = c.cone_angle(&[x], &[xi]) {
            prop_assume!((a - ap).abs() > 1e-9);
        }
        prop_assert_eq!(c.contains(&[x], &[xi]), c.contains(&[lambda * x], &[lambda * xi]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn hwf_ignores_unimodular_factors(theta in 0.0..(2.0 * PI), ax in -4.0..0.0f64, axi in 0.5..1.5f64) {
        let g = GridSpec::line(-60.0, 60.0, 1200).unwrap();
        let u = packet(&g, ax, axi);
        let phase = Complex64::from_polar(1.0, theta);
        let v = u.with_values(u.values().iter().map(|z| z * phase).collect()).unwrap();
        let cone = PhaseRegion::cone(ax, axi, 0.3);
        let a = hwf_test(&u, &cone, 1.0, 2.0, &HwfOptions::default()).unwrap();
        let b = hwf_test(&v, &cone, 1.0, 2.0, &HwfOptions::default()).unwrap();
        prop_assert_eq!(a.verdict, b.verdict);
        for (p, q) in a.plain_norms.iter().zip(&b.plain_norms) {
            prop_assert!(rel(*p, *q) < 1e-10 || p.max(*q) < 1e-14 * a.plain_norms.iter().cloned().fold(0.0, f64::max));
        }
    }

    /// `T_{h,h}u(x, ξ) = h^{−1/2} T_{1,1}u(x, ξ/h)`, so the norm over a box
    /// equals the norm of `T_{1,1}u` over the box with `ξ` divided by `h`.
    #[test]
    fn semiclassical_rescaling(
        h in prop::sample::select(vec![0.5, 0.25]),
        t0 in 0.5..2.0f64, eta in 0.5..1.5f64, delta in 0.1..0.4f64,
        dx in -1.0..1.0f64, dxi in -1.0..1.0f64,
    ) {
        let g = GridSpec::line(-40.0, 40.0, 2048).unwrap();
        let (xc, kc) = (-t0 * eta / h, eta / h);
        let u = packet(&g, xc + dx, kc + dxi);
        let x_lo = vec![xc - t0 * delta / h];
        let x_hi = vec![xc + t0 * delta / h];
        let unit = PhaseRegion::Box { x_lo: x_lo.clone(), x_hi: x_hi.clone(), xi_lo: vec![(eta - delta) / h], xi_hi: vec![(eta + delta) / h] };
        let semi = PhaseRegion::Box { x_lo, x_hi, xi_lo: vec![eta - delta], xi_hi: vec![eta + delta] };
        let opts = WfOptions::default();
        let a = region_norm(&u, &unit, 1.0, 1.0, &opts).unwrap();
        let b = region_norm(&u, &semi, h, h, &opts).unwrap();
        prop_assert!(a > 1e-6);
        prop_assert!(rel(a, b) < 1e-9, "{} vs {}", a, b);
    }

    /// `ψ(D)` commutes with translations; `x·D` does not, so only the
    /// zeroth term is invariant.
    #[test]
    fn translated_packet_keeps_zeroth_mixed_norm(shift in -200i64..200, eta in 8.0..16.0f64) {
        let g = GridSpec::line(-40.0, 40.0, 2048).unwrap();
        let dy = g.spacing(0);
        let u = packet(&g, -5.0, eta);
        let v = packet(&g, -5.0 + shift as f64 * dy, eta);
        let psi = ConicMultiplier::new(vec![eta], PI / 4.0, 2.0).unwrap();
        let mask = vec![true; g.len()];
        let a = mixed_momentum_norms(&u, &psi, 0, &mask).unwrap();
        let b = mixed_momentum_norms(&v, &psi, 0, &mask).unwrap();
        prop_assert!(rel(a.norms[0], b.norms[0]) < 1e-10);
    }
}

#[test]
fn energy_is_stable_under_window_refinement() {
    let env = GevreyParams::new(2.0, 1.0, 0.05, 0.5).unwrap();
    let op = SchrodingerOperator::free(1, env);
    let step = GevreyStep::new(env.s()).unwrap();
    let (t0, eta, h) = (2.0, 1.0, 0.1);
    let delta = DEFAULT_DELTA_FRACTION * TransportWeight::max_delta(&step, env.k0());
    let flow = FlowParams {
        t0,
        h,
        delta,
        eta_minus: vec![eta],
        a: 4.0,
    };
    let x0 = -t0 * eta / h;
    let dy = PI / (2.0 * (eta / h + 12.0));
    let (lo, hi) = (x0 - 25.0, 15.0);
    let g = GridSpec::line(lo, hi, ((hi - lo) / dy).ceil() as usize).unwrap();
    let u0 = SampledField::from_fn(g, |y| Complex64::from_polar((-(y[0] - x0).powi(2) / 2.0).exp(), eta * y[0] / h)).unwrap();
    let ts = [-2.0, -1.5, -1.0, -0.5];
    let abs: Vec<f64> = ts.iter().map(|t| t + t0).collect();
    let fields = propagate_series(&op, &u0, &abs, 0.01, PropagateOptions::default()).unwrap();
    let snaps: Vec<(f64, SampledField)> = ts.iter().cloned().zip(fields).collect();
    let res = EnergyResolution::default();
    let coarse = energy_series(&snaps, &op, &flow, &res, false).unwrap();
    let fine = energy_series(&snaps, &op, &flow, &res.refined(), false).unwrap();
    for (a, b) in coarse.iter().zip(&fine) {
        assert!(a.f > 0.0);
        assert!(rel(a.f, b.f) < 1e-6, "t = {}: {} vs {}", a.t, a.f, b.f);
    }
}

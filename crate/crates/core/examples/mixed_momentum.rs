//! Norms of `(x·D)^l ψ(D)u` on a corridor around a backward ray, and the
//! factorial-envelope fit.

use mlab::cli::config::MixedMomentumConfig;
use mlab::hamflow::{corridor_mask, integrate_backward};
use mlab::wfset::{factorial_envelope_fit, mixed_momentum_norms, ConicMultiplier};

fn main() -> mlab::Result<()> {
    let cfg = MixedMomentumConfig::default();
    let u0 = cfg.initial_field().build(0)?;
    let eta = vec![cfg.eta_minus];
    let traj = integrate_backward(&cfg.metric, &cfg.corridor.y0, &eta, -cfg.corridor.horizon, cfg.corridor.dt, 1e-10)?;
    let mask = corridor_mask(&traj, cfg.corridor.eps, u0.grid());
    let psi = ConicMultiplier::new(eta, cfg.aperture, cfg.s)?;
    let m = mixed_momentum_norms(&u0, &psi, cfg.l_max, &mask)?;
    for (l, (n, t)) in m.norms.iter().zip(&m.tail_fractions).enumerate() {
        println!("l = {l:>2}  norm {n:.4e}  spectral tail {t:.1e}");
    }
    let fit = factorial_envelope_fit(&m.norms, cfg.s)?;
    println!(
        "A0 = {:.3e}, A1 = {:.3}, increment trend {:.2e}, pass {}",
        fit.a0, fit.a1, fit.increment_trend, fit.pass
    );
    Ok(())
}

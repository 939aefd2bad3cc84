//! Backward bicharacteristics of a decaying metric perturbation, the
//! limiting momentum, and a trapped orbit for contrast.

use mlab::hamflow::{classify_nontrapping, integrate_backward, momentum_convergence, stable_circular_orbit, trapping_metric, Metric};

fn main() -> mlab::Result<()> {
    let m = Metric::bracket_perturbation(0.2, 0.5)?;
    let tr = integrate_backward(&m, &[0.0], &[1.0], -40.0, 0.5, 1e-10)?;
    let rep = classify_nontrapping(&tr, 5.0, -40.0)?;
    println!(
        "perturbed line: {:?}, eta_- = {:?}, energy drift {:.1e}",
        rep.verdict, rep.eta_minus, tr.energy_drift
    );
    let c = momentum_convergence(&m, &[0.0], &[1.0], 10.0, 2, 1e-12)?;
    println!("  momentum changes under horizon doubling {:?} (monotone {})", c.changes, c.monotone());

    let ring = trapping_metric()?;
    if let Some(r) = stable_circular_orbit(&ring, 0.2, 1.0)? {
        let tr = integrate_backward(&ring, &[r, 0.0], &[0.0, 1.0], -60.0, 0.5, 1e-11)?;
        println!("ring orbit r = {r:.4}: {:?}", classify_nontrapping(&tr, 3.0, -60.0)?.verdict);
    }
    Ok(())
}

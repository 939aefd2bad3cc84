//! Free and perturbed propagation of a packet: mass, boundary leakage, and
//! the splitting error estimate.

use mlab::schrod::{propagate, PropagateOptions, SchrodingerOperator};
use mlab::{GridSpec, SampledField};
use num_complex::Complex64;

fn main() -> mlab::Result<()> {
    let g = GridSpec::line(-40.0, 40.0, 1024)?;
    let u0 = SampledField::from_fn(g, |x| Complex64::from_polar((-(x[0] + 2.0).powi(2) / 2.0).exp(), x[0]))?;
    let ops = [
        ("free", SchrodingerOperator::free(1, mlab::cli::config::default_envelope())),
        ("perturbed", SchrodingerOperator::builtin_perturbed()?),
    ];
    let opts = PropagateOptions {
        strict: false,
        estimate_error: true,
    };
    for (name, op) in &ops {
        for t in [0.5, 1.0, 2.0] {
            let p = propagate(op, &u0, t, (t / 0.01).ceil() as usize, opts)?;
            println!(
                "{name:<9} t = {t}: {:?}, {} steps, mass drift {:.1e}, boundary {:.1e}, halving error {:?}",
                p.method, p.steps, p.norm_drift, p.boundary_fraction, p.step_halving_error
            );
        }
    }
    Ok(())
}

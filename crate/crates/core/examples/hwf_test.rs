//! Homogeneous wave front test: annulus norms along a cone under growing
//! exponential weights.

use mlab::wfset::{hwf_test, HwfOptions, PhaseRegion};
use mlab::{GridSpec, SampledField};
use num_complex::Complex64;

fn main() -> mlab::Result<()> {
    let opts = HwfOptions::default();
    let packet = SampledField::from_fn(GridSpec::line(-60.0, 60.0, 1200)?, |x| {
        Complex64::from_polar((-(x[0] + 2.0).powi(2) / 2.0).exp(), x[0])
    })?;
    let slow = SampledField::from_fn(GridSpec::line(-300.0, 300.0, 3000)?, |x| {
        Complex64::from_polar(1.0 / (1.0 + x[0] * x[0]).sqrt(), x[0])
    })?;
    let cases = [
        ("packet, cone at (-2, 1)", &packet, PhaseRegion::cone(-2.0, 1.0, 0.3)),
        ("e^{ix}/<x>, cone at (1, 0)", &slow, PhaseRegion::cone(1.0, 0.0, 0.3)),
    ];
    for (name, u, cone) in &cases {
        let r = hwf_test(u, cone, 1.0, 2.0, &opts)?;
        println!("{name}: {:?} over {} annuli", r.verdict, r.annuli.len());
        for d in &r.per_delta {
            println!("  delta {:<5} growth rate {:+.3}, decays {}", d.delta, d.growth_rate, d.decays);
        }
        for c in &r.caveats {
            println!("  note: {c}");
        }
    }
    Ok(())
}

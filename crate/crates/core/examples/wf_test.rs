//! Decay of `‖T_{h,μ}u‖` over a phase-space ball as `h → 0`, for a point
//! away from the wave front set and for the singular point of a jump.

use mlab::wfset::{wf_decay_fit, PhaseRegion, WfOptions};
use mlab::{GridSpec, SampledField};
use num_complex::Complex64;

fn main() -> mlab::Result<()> {
    let opts = WfOptions::default();
    let gauss = SampledField::from_fn(GridSpec::line(-20.0, 20.0, 2048)?, |x| Complex64::new((-x[0] * x[0] / 2.0).exp(), 0.0))?;
    let jump = SampledField::from_fn(GridSpec::line(-8.0, 8.0, 32768)?, |x| {
        Complex64::new(x[0].signum() * (-x[0] * x[0]).exp(), 0.0)
    })?;
    let cases = [
        (
            "gaussian at (4, 1)",
            &gauss,
            PhaseRegion::ball(4.0, 1.0, 0.5, 0.5),
            vec![0.2, 0.1, 0.05, 0.025],
        ),
        (
            "jump at (0, 2)",
            &jump,
            PhaseRegion::ball(0.0, 2.0, 1.0, 0.5),
            vec![0.05, 0.025, 0.0125, 0.00625],
        ),
    ];
    for (name, u, region, hs) in &cases {
        let r = wf_decay_fit(u, region, 1.0, hs, 2.0, &opts)?;
        println!("{name}: {:?}", r.verdict);
        println!(
            "  slope {:.3} (r2 {:.3}), two-term beta {:.4}, alpha {:.3}",
            r.fit.slope, r.fit.r_squared, r.two_term.beta, r.two_term.alpha
        );
        for (h, n) in r.hs.iter().zip(&r.norms) {
            println!("  h = {h:<8} norm {n:.4e}");
        }
    }
    Ok(())
}

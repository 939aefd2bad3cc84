//! Almost-analytic extensions: the sup of `∂̄f̃` on shrinking strips, fitted
//! against `w^{−1/(s−1)}`.

use mlab::aae::{omega, verify_dbar_bound, StripSampling};
use mlab::jet::{Coefficient, Jet};
use mlab::GridSpec;

fn main() -> mlab::Result<()> {
    let (s, r) = (2.0, 4.0);
    let ws = [0.2, 0.1, 0.05, 0.025];
    let bx = GridSpec::line(-1.0, 1.0, 2)?;
    let jets = [
        (
            "gaussian",
            Jet::new(
                1,
                Coefficient::Gaussian {
                    amplitude: 1.0,
                    center: vec![0.0],
                    scale: 1.0,
                },
            ),
        ),
        (
            "bump",
            Jet::new(
                1,
                Coefficient::Bump {
                    amplitude: 1.0,
                    center: vec![0.0],
                    radius: 2.0,
                },
            ),
        ),
    ];
    println!("omega = {}", omega(s, r));
    for (name, jet) in &jets {
        let rep = verify_dbar_bound(jet, s, r, &ws, &bx, StripSampling::default(), 0.2)?;
        for row in &rep.rows {
            println!("  {name}: w = {:<6} N = {:<4} sup|dbar| = {:.3e}", row.w, row.order, row.sup_defect);
        }
        if let Some(f) = &rep.fit {
            println!("  {name}: slope {:.4}, r2 {:.4}, pass {}", f.slope, f.r_squared, rep.pass);
        }
    }
    Ok(())
}

//! FBI transform of a Gaussian packet: isometry defect and where `|Tu|`
//! peaks.

use mlab::fbi::{fbi_grid, isometry_defect, lattice_xi_grid, Method, TransformParams};
use mlab::{GridSpec, SampledField};
use num_complex::Complex64;

fn main() -> mlab::Result<()> {
    let u = SampledField::from_fn(GridSpec::line(-24.0, 24.0, 512)?, |x| {
        Complex64::from_polar((-(x[0] - 2.0).powi(2) / 2.0).exp(), 3.0 * x[0])
    })?;
    for (h, mu) in [(1.0, 1.0), (0.5, 0.5), (0.25, 1.0)] {
        let p = TransformParams::new(h, mu)?;
        let xg = GridSpec::line(-12.0, 12.0, 256)?;
        let kg = lattice_xi_grid(u.grid(), h, &[-12.0 * h], &[12.0 * h], 256)?;
        let t = fbi_grid(&u, &xg, &kg, &p, Method::Auto, true)?;
        let (x, xi) = t.point(t.argmax());
        let d = isometry_defect(&u, &p, &xg, &kg, true)?;
        println!(
            "h = {h}, mu = {mu}: peak at ({:.3}, {:.3}), |Tu| max {:.4}, isometry defect {d:.2e}",
            x[0],
            xi[0],
            t.max_abs()
        );
    }
    Ok(())
}

//! Weighted-estimate constants for a packet on the weight's support,
//! swept over `h` with `μ = 2h` for the built-in perturbed operator.

use std::time::Instant;

use mlab::estimates::{packet_sweep, sweep_ratio, PacketSweep};
use mlab::schrod::SchrodingerOperator;

fn main() -> mlab::Result<()> {
    let op = SchrodingerOperator::builtin_perturbed()?;
    let cfg = PacketSweep::default();
    let start = Instant::now();
    let rows = packet_sweep(&op, &cfg, false)?;
    println!("h,mu,theorem31,lemma37,corollary36");
    for r in &rows {
        println!(
            "{},{},{:.4e},{:.4e},{:.4e}",
            r.theorem31.h, r.theorem31.mu, r.theorem31.c_eff, r.lemma37.c_eff, r.corollary36.c_eff
        );
    }
    let cols: [(&str, Vec<f64>); 3] = [
        ("theorem31", rows.iter().map(|r| r.theorem31.c_eff).collect()),
        ("lemma37", rows.iter().map(|r| r.lemma37.c_eff).collect()),
        ("corollary36", rows.iter().map(|r| r.corollary36.c_eff).collect()),
    ];
    for (name, c) in &cols {
        let (ratio, ok) = sweep_ratio(c, 10.0);
        println!("{name}: max/min = {ratio:.3} {}", if ok { "stable" } else { "unstable" });
    }
    eprintln!("{:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}

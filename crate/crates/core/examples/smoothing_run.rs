//! The smoothing scenario end to end through the CLI driver, with the
//! packet and the jump contrast. Artifacts go under `target/mlab-examples`.

fn main() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    for name in ["smoothing_packet", "smoothing_jump"] {
        let cfg = root.join("configs").join(format!("{name}.json"));
        let out = root.join("target/mlab-examples").join(name);
        let code = mlab::cli::run(["mlab", "smoothing-run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        println!("{name}: exit {code}");
        if let Ok(v) = std::fs::read_to_string(out.join("verdicts.csv")) {
            print!("{v}");
        }
    }
}

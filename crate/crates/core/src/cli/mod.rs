//! `mlab <scenario> --config cfg.json [--strict] [--threads N] [--out DIR]`
//!
//! Exit codes: 0 pass, 2 verdict failed, 3 inconclusive, 4 bad config or
//! parameters, 5 numerical or I/O failure (details in `failure.json`).

pub mod config;
pub mod output;
pub mod scenarios;

use std::path::PathBuf;

use clap::Parser;
use serde_json::json;

use crate::error::Error;
use config::{ExperimentConfig, Params, ResolvedConfig, ScenarioName};
use output::Artifacts;
use scenarios::{Context, Failure, Outcome};

pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_FAILURE: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "mlab", about = "Phase-space experiments for Gevrey smoothing of Schrödinger flows")]
pub struct Cli {
    pub scenario: ScenarioName,
    #[arg(long)]
    pub config: PathBuf,
    /// Turn accuracy warnings into errors.
    #[arg(long)]
    pub strict: bool,
    /// Worker threads; falls back to MLAB_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Short machine-readable name of an error variant.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidInput(_) => "invalid_input",
        Error::NonFinite(_) => "non_finite",
        Error::Format(_) => "format",
        Error::UnsupportedOrder(_) => "unsupported_order",
        Error::Domain(_) => "domain",
        Error::Jet { .. } => "jet",
        Error::Truncation(_) => "truncation",
        Error::Lattice { .. } => "lattice",
        Error::UndefinedRatio(_) => "undefined_ratio",
        Error::IntegrationFailure { .. } => "integration_failure",
        Error::EnergyDrift { .. } => "energy_drift",
        Error::Aliasing(_) => "aliasing",
        Error::Instability(_) => "instability",
        Error::Saturated { .. } => "saturated",
        Error::Precondition(_) => "precondition",
        Error::Parameter(_) => "parameter",
        Error::Config(_) => "config",
        Error::Io { .. } => "io",
        Error::Json(_) => "json",
    }
}

/// Errors caused by the request rather than by the computation.
pub fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::Json(_) | Error::InvalidInput(_) | Error::Parameter(_) | Error::UnsupportedOrder(_)
    )
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, String> {
    if let Some(n) = flag {
        return if n == 0 { Err("--threads must be positive".into()) } else { Ok(Some(n)) };
    }
    match std::env::var("MLAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("MLAB_THREADS={v:?} is not a positive integer")),
        },
        Err(_) => Ok(None),
    }
}

/// Runs a resolved experiment into `out` and returns the outcome.
pub fn run_resolved(cfg: &ResolvedConfig, strict: bool, out: &Artifacts) -> Result<Outcome, Failure> {
    let cx = Context { seed: cfg.seed, strict, out };
    match &cfg.params {
        Params::Transform(c) => scenarios::transform(c, &cx),
        Params::ExtendVerify(c) => scenarios::extend_verify(c, &cx),
        Params::Flow(c) => scenarios::flow(c, &cx),
        Params::Propagate(c) => scenarios::propagate(c, &cx),
        Params::WfTest(c) => scenarios::wf_test(c, &cx),
        Params::HwfTest(c) => scenarios::hwf(c, &cx),
        Params::Theorem31Sweep(c) => scenarios::theorem31(c, &cx),
        Params::SmoothingRun(c) => scenarios::smoothing_run(c, &cx),
        Params::MixedMomentum(c) => scenarios::mixed_momentum(c, &cx),
    }
}

/// Parses `args`, runs the scenario and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match thread_count(cli.threads) {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("thread pool already configured: {e}");
            }
        }
        Ok(None) => {}
        Err(msg) => {
            eprintln!("mlab: {msg}");
            return EXIT_CONFIG;
        }
    }
    let doc = match ExperimentConfig::from_path(&cli.config) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("mlab: {e}");
            return EXIT_CONFIG;
        }
    };
    if doc.scenario != cli.scenario {
        eprintln!("mlab: config is for scenario {}, not {}", doc.scenario.as_str(), cli.scenario.as_str());
        return EXIT_CONFIG;
    }
    let resolved = match doc.resolve(cli.out.clone()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("mlab: {e}");
            return EXIT_CONFIG;
        }
    };
    let out = match Artifacts::create(&resolved.output_dir) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("mlab: {e}");
            return EXIT_FAILURE;
        }
    };
    if let Err(e) = out.write_json("resolved_config.json", &resolved) {
        eprintln!("mlab: {e}");
        return EXIT_FAILURE;
    }
    log::info!("running {} into {}", resolved.scenario.as_str(), out.dir().display());
    match run_resolved(&resolved, cli.strict, &out) {
        Ok(outcome) => {
            eprintln!("mlab: {} -> {:?}", resolved.scenario.as_str(), outcome);
            outcome.exit_code()
        }
        Err(Failure { stage, error }) => {
            eprintln!("mlab: {stage}: {error}");
            let record = json!({ "stage": stage, "kind": error_kind(&error), "message": error.to_string() });
            if let Err(e) = out.write_json("failure.json", &record) {
                eprintln!("mlab: {e}");
            }
            if is_usage_error(&error) {
                EXIT_CONFIG
            } else {
                EXIT_FAILURE
            }
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_codes() {
        assert_eq!(Outcome::Pass.exit_code(), 0);
        assert_eq!(Outcome::VerdictFail.exit_code(), 2);
        assert_eq!(Outcome::Inconclusive.exit_code(), 3);
    }

    #[test]
    fn bad_config_exits_four() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"scenario": "flow", "params": {"horizon": 1, "bogus": 2}}"#).unwrap();
        let code = run(["mlab", "flow", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code, EXIT_CONFIG);
        std::fs::write(&cfg, r#"{"scenario": "flow"}"#).unwrap();
        let code = run(["mlab", "transform", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code, EXIT_CONFIG);
    }
}

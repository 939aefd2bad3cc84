//! One function per scenario. Each writes its artifacts and returns the
//! outcome; a library error is reported with the stage it came from.

use serde::Serialize;
use serde_json::json;

use super::config::*;
use super::output::Artifacts;
use crate::aae::{verify_dbar_bound, StripSampling};
use crate::error::{Error, Result};
use crate::estimates::{packet_sweep, sweep_ratio};
use crate::fbi::{fbi_grid, isometry_defect, lattice_xi_grid, Method, TransformParams as FbiParams};
use crate::field::{l2_norm, SampledField};
use crate::fit::NORM_FLOOR;
use crate::format::write_array;
use crate::grid::GridSpec;
use crate::hamflow::{classify_nontrapping, corridor_mask, integrate_backward, integrate_flow, momentum_convergence, Metric, TrapVerdict};
use crate::jet::Jet;
use crate::schrod::{propagate_series, save_snapshots, PropagateOptions};
use crate::wfset::{
    factorial_envelope_fit, hwf_test, mixed_momentum_norms, wf_decay_fit, ConicMultiplier, HwfOptions, HwfReport, HwfVerdict, PhaseRegion, WfOptions,
    WfReport, WfVerdict,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    VerdictFail,
    Inconclusive,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::VerdictFail => 2,
            Outcome::Inconclusive => 3,
        }
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::VerdictFail
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub stage: String,
    pub error: Error,
}

pub type StageResult<T> = std::result::Result<T, Failure>;

trait Stage<T> {
    fn stage(self, name: &str) -> StageResult<T>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, name: &str) -> StageResult<T> {
        self.map_err(|error| Failure {
            stage: name.to_string(),
            error,
        })
    }
}

pub struct Context<'a> {
    pub seed: u64,
    pub strict: bool,
    pub out: &'a Artifacts,
}

fn propagate_opts(strict: bool) -> PropagateOptions {
    PropagateOptions {
        strict,
        estimate_error: false,
    }
}

fn evolve(u: SampledField, e: &Option<Evolve>, strict: bool) -> Result<SampledField> {
    match e {
        None => Ok(u),
        Some(e) => {
            let op = e.operator.build()?;
            let mut v = propagate_series(&op, &u, &[e.t], e.max_dt, propagate_opts(strict))?;
            Ok(v.remove(0))
        }
    }
}

pub fn transform(cfg: &TransformConfig, cx: &Context) -> StageResult<Outcome> {
    let u = cfg.field.build(cx.seed).stage("field")?;
    let n = u.dim();
    let p = FbiParams::new(cfg.h, cfg.mu).stage("params")?;
    let x_grid = GridSpec::new(vec![cfg.x.lo; n], vec![cfg.x.hi; n], vec![cfg.x.points; n]).stage("grid")?;
    let xi_grid = lattice_xi_grid(u.grid(), cfg.h, &vec![cfg.xi.lo; n], &vec![cfg.xi.hi; n], cfg.xi.points).stage("grid")?;
    let t = fbi_grid(&u, &x_grid, &xi_grid, &p, cfg.method, cx.strict).stage("transform")?;
    write_array(&cx.out.path("tu.mlab"), &t.phase_grid(), t.values()).stage("write")?;
    if n == 1 {
        cx.out.write_heatmap("tu", &t).stage("write")?;
        let wk = xi_grid.trapezoid_weights(0);
        let mut csv = String::from("x,xi_marginal\n");
        for i in 0..x_grid.len() {
            let m: f64 = (0..xi_grid.len()).map(|k| wk[k] * t.get(i, k).norm_sqr()).sum();
            csv.push_str(&format!("{:.17e},{:.17e}\n", x_grid.coord(0, i), m));
        }
        cx.out.write_text("marginals.csv", &csv).stage("write")?;
    }
    let defect = isometry_defect(&u, &p, &x_grid, &xi_grid, cx.strict).stage("isometry")?;
    let pass = defect < cfg.isometry_tolerance;
    cx.out
        .write_json(
            "verdict.json",
            &json!({
                "h": cfg.h, "mu": cfg.mu,
                "phase_shape": [x_grid.len(), xi_grid.len()],
                "xi_spacing": xi_grid.spacing(0),
                "isometry_defect": defect,
                "tolerance": cfg.isometry_tolerance,
                "pass": pass,
            }),
        )
        .stage("write")?;
    Ok(Outcome::from_bool(pass))
}

pub fn extend_verify(cfg: &ExtendVerifyConfig, cx: &Context) -> StageResult<Outcome> {
    let jet = Jet::new(cfg.dim, cfg.jet.clone());
    let sampling = StripSampling {
        real_points: cfg.real_points,
        imag_points: cfg.imag_points,
    };
    let r = verify_dbar_bound(&jet, cfg.s, cfg.r, &cfg.w_sweep, &cfg.sample_box, sampling, cfg.tolerance).stage("dbar")?;
    cx.out.write_text("dbar.csv", &r.to_csv()).stage("write")?;
    cx.out.write_json("verdict.json", &r.verdict_json()).stage("write")?;
    Ok(Outcome::from_bool(r.pass))
}

pub fn flow(cfg: &FlowConfig, cx: &Context) -> StageResult<Outcome> {
    let traj = integrate_backward(&cfg.metric, &cfg.y0, &cfg.eta0, -cfg.horizon, cfg.dt, cfg.tol).stage("flow")?;
    cx.out
        .write_text("trajectory.csv", &traj.to_csv(&cfg.metric).stage("flow")?)
        .stage("write")?;
    let report = classify_nontrapping(&traj, cfg.escape_radius, -cfg.horizon).stage("classify")?;
    let conv = momentum_convergence(&cfg.metric, &cfg.y0, &cfg.eta0, cfg.horizon, cfg.doublings, cfg.tol).stage("momentum")?;
    let mut v = report.verdict_json(traj.energy_drift);
    v["momentum_changes"] = json!(conv.changes);
    v["momentum_monotone"] = json!(conv.monotone());
    cx.out.write_json("verdict.json", &v).stage("write")?;
    Ok(match report.verdict {
        TrapVerdict::Nontrapping => Outcome::Pass,
        TrapVerdict::TrappedSoFar => Outcome::VerdictFail,
        TrapVerdict::Inconclusive => Outcome::Inconclusive,
    })
}

pub fn propagate(cfg: &PropagateConfig, cx: &Context) -> StageResult<Outcome> {
    let op = cfg.operator.build().stage("operator")?;
    let u0 = cfg.field.build(cx.seed).stage("field")?;
    let opts = PropagateOptions {
        strict: cx.strict,
        estimate_error: cfg.estimate_error,
    };
    let fields = propagate_series(&op, &u0, &cfg.times, cfg.max_dt, opts).stage("propagate")?;
    save_snapshots(&cx.out.path("snapshots"), &cfg.times, &fields, &op).stage("write")?;
    let n0 = l2_norm(&u0);
    let mut csv = String::from("t,norm,relative_drift\n");
    for (t, f) in cfg.times.iter().zip(&fields) {
        let n = l2_norm(f);
        csv.push_str(&format!("{t:.17e},{n:.17e},{:.17e}\n", if n0 > 0.0 { (n - n0) / n0 } else { 0.0 }));
    }
    cx.out.write_text("norms.csv", &csv).stage("write")?;
    Ok(Outcome::Pass)
}

fn wf_json(r: &WfReport) -> serde_json::Value {
    json!({
        "region": r.region,
        "sweep": r.hs,
        "mu": r.mu,
        "s": r.s,
        "slope": r.fit.slope,
        "r2": r.fit.r_squared,
        "beta": r.two_term.beta,
        "alpha": r.two_term.alpha,
        "verdict": r.verdict,
        "caveats": r.caveats,
    })
}

fn wf_csv(r: &WfReport) -> String {
    let mut csv = String::from("h,abscissa,norm,log_norm,fitted\n");
    for ((h, x), n) in r.hs.iter().zip(&r.abscissae).zip(&r.norms) {
        csv.push_str(&format!(
            "{h:.17e},{x:.17e},{n:.17e},{:.17e},{:.17e}\n",
            n.max(NORM_FLOOR).ln(),
            r.fit.predict(*x)
        ));
    }
    csv
}

fn hwf_json(r: &HwfReport) -> serde_json::Value {
    json!({
        "region": r.region,
        "sweep": r.per_delta.iter().map(|d| d.delta).collect::<Vec<_>>(),
        "annuli": r.annuli,
        "growth_rates": r.per_delta.iter().map(|d| d.growth_rate).collect::<Vec<_>>(),
        "decays": r.per_delta.iter().map(|d| d.decays).collect::<Vec<_>>(),
        "verdict": r.verdict,
        "caveats": r.caveats,
    })
}

fn hwf_csv(r: &HwfReport) -> String {
    let mut csv = String::from("delta,annulus,r_lo,r_hi,plain_norm,weighted_norm,ratio\n");
    for d in &r.per_delta {
        for (j, a) in r.annuli.iter().enumerate() {
            let ratio = d.ratios.get(j).map(|q| format!("{q:.17e}")).unwrap_or_default();
            csv.push_str(&format!(
                "{},{j},{:.17e},{:.17e},{:.17e},{:.17e},{ratio}\n",
                d.delta, a[0], a[1], r.plain_norms[j], d.annulus_norms[j]
            ));
        }
    }
    csv
}

pub fn wf_test(cfg: &WfTestConfig, cx: &Context) -> StageResult<Outcome> {
    let u = cfg.field.build(cx.seed).stage("field")?;
    let u = evolve(u, &cfg.evolve, cx.strict).stage("evolve")?;
    let opts = WfOptions {
        threshold: cfg.threshold,
        strict: cx.strict,
        ..WfOptions::default()
    };
    let r = wf_decay_fit(&u, &cfg.region, cfg.mu, &cfg.h_sweep, cfg.s, &opts).stage("wf_decay_fit")?;
    cx.out.write_text("decay.csv", &wf_csv(&r)).stage("write")?;
    cx.out.write_json("verdict.json", &wf_json(&r)).stage("write")?;
    Ok(match cfg.expect {
        None => Outcome::Pass,
        Some(WfVerdict::SaturatedRegular) | Some(WfVerdict::Regular) => Outcome::from_bool(r.verdict != WfVerdict::Singular),
        Some(WfVerdict::Singular) => Outcome::from_bool(r.verdict == WfVerdict::Singular),
    })
}

pub fn hwf(cfg: &HwfTestConfig, cx: &Context) -> StageResult<Outcome> {
    let u = cfg.field.build(cx.seed).stage("field")?;
    let u = evolve(u, &cfg.evolve, cx.strict).stage("evolve")?;
    let opts = HwfOptions {
        deltas: cfg.deltas.clone(),
        r_min: cfg.r_min,
        max_points: cfg.max_points,
        method: Method::Auto,
        strict: cx.strict,
    };
    let r = hwf_test(&u, &cfg.cone, cfg.mu, cfg.s, &opts).stage("hwf_test")?;
    cx.out.write_text("annuli.csv", &hwf_csv(&r)).stage("write")?;
    cx.out.write_json("verdict.json", &hwf_json(&r)).stage("write")?;
    Ok(match (r.verdict, cfg.expect) {
        (HwfVerdict::Inconclusive, _) => Outcome::Inconclusive,
        (_, None) => Outcome::Pass,
        (v, Some(e)) => Outcome::from_bool(v == e),
    })
}

pub fn theorem31(cfg: &Theorem31Config, cx: &Context) -> StageResult<Outcome> {
    let op = cfg.operator.build().stage("operator")?;
    let rows = packet_sweep(&op, &cfg.sweep, cx.strict).stage("sweep")?;
    let mut csv = String::from("h,mu,theorem31,lemma37,corollary36,corollary36_weighted,corollary36_plain\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            r.theorem31.h, r.theorem31.mu, r.theorem31.c_eff, r.lemma37.c_eff, r.corollary36.c_eff, r.corollary36.c_weighted, r.corollary36.c_plain
        ));
    }
    cx.out.write_text("constants.csv", &csv).stage("write")?;
    let mut verdict = serde_json::Map::new();
    let mut all = true;
    let cols: [(&str, Vec<f64>); 3] = [
        ("theorem31", rows.iter().map(|r| r.theorem31.c_eff).collect()),
        ("lemma37", rows.iter().map(|r| r.lemma37.c_eff).collect()),
        ("corollary36", rows.iter().map(|r| r.corollary36.c_eff).collect()),
    ];
    for (name, c) in &cols {
        let (ratio, ok) = sweep_ratio(c, cfg.limit);
        all &= ok;
        verdict.insert(name.to_string(), json!({ "c_eff": c, "max_over_min": ratio, "stable": ok }));
    }
    verdict.insert("limit".into(), json!(cfg.limit));
    verdict.insert("pass".into(), json!(all));
    cx.out.write_json("verdict.json", &verdict).stage("write")?;
    Ok(Outcome::from_bool(all))
}

#[derive(Debug, Clone, Serialize)]
struct VerdictRow {
    stage: &'static str,
    t: f64,
    x: f64,
    xi: f64,
    verdict: String,
    slope: Option<f64>,
    r2: Option<f64>,
    beta: Option<f64>,
}

fn verdict_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn heatmap_at(u: &SampledField, cfg: &SmoothingConfig, stem: &str, cx: &Context) -> Result<()> {
    let p = FbiParams::new(1.0, cfg.hwf.mu)?;
    let xg = GridSpec::line(cfg.heatmap_x.lo, cfg.heatmap_x.hi, cfg.heatmap_x.points)?;
    let lo = cfg.eta_minus + cfg.heatmap_xi.lo;
    let hi = cfg.eta_minus + cfg.heatmap_xi.hi;
    let kg = lattice_xi_grid(u.grid(), 1.0, &[lo], &[hi], cfg.heatmap_xi.points)?;
    let t = fbi_grid(u, &xg, &kg, &p, Method::Auto, cx.strict)?;
    cx.out.write_heatmap(stem, &t)
}

/// Hypothesis on `u0`, propagation, cone tests along `((t−t0)η₋, η₋)`, then
/// decay fits at points of `γ` for times near `t0`.
pub fn smoothing_run(cfg: &SmoothingConfig, cx: &Context) -> StageResult<Outcome> {
    if !(cfg.t0 > 0.0) || cfg.eta_minus == 0.0 {
        return Err(Failure {
            stage: "config".into(),
            error: Error::Config("need t0 > 0 and eta_minus != 0".into()),
        });
    }
    let op = cfg.operator.build().stage("operator")?;
    if op.dim() != 1 {
        return Err(Failure {
            stage: "config".into(),
            error: Error::Config("smoothing runs are one-dimensional".into()),
        });
    }
    let u0 = cfg.initial_field().build(cx.seed).stage("field")?;
    let eta = cfg.eta_minus;
    let hwf_opts = HwfOptions {
        deltas: cfg.hwf.deltas.clone(),
        r_min: cfg.hwf.r_min,
        max_points: cfg.hwf.max_points,
        method: Method::Auto,
        strict: cx.strict,
    };
    let mut rows = Vec::new();
    let mut details = Vec::new();

    let cone0 = PhaseRegion::cone(-cfg.t0 * eta, eta, cfg.hwf.aperture);
    let h0 = hwf_test(&u0, &cone0, cfg.hwf.mu, cfg.s, &hwf_opts).stage("hypothesis")?;
    cx.out.write_text("hwf_t0.csv", &hwf_csv(&h0)).stage("write")?;
    rows.push(VerdictRow {
        stage: "hypothesis",
        t: 0.0,
        x: -cfg.t0 * eta,
        xi: eta,
        verdict: verdict_name(&h0.verdict),
        slope: None,
        r2: None,
        beta: None,
    });
    details.push(json!({"stage": "hypothesis", "t": 0.0, "report": hwf_json(&h0)}));
    heatmap_at(&u0, cfg, "heatmap_t0", cx).stage("heatmap")?;

    let mut all_times: Vec<f64> = cfg.times.iter().chain(&cfg.wf.times).copied().collect();
    all_times.sort_by(f64::total_cmp);
    all_times.dedup();
    let fields = propagate_series(&op, &u0, &all_times, cfg.max_dt, propagate_opts(cx.strict)).stage("propagate")?;
    let at = |t: f64| &fields[all_times.iter().position(|&s| s == t).expect("time was scheduled")];

    let mut hwf_ok = h0.verdict == HwfVerdict::NotInHwf;
    let mut inconclusive = h0.verdict == HwfVerdict::Inconclusive;
    for (i, &t) in cfg.times.iter().enumerate() {
        let u = at(t);
        let cone = PhaseRegion::cone((t - cfg.t0) * eta, eta, cfg.hwf.aperture);
        let r = hwf_test(u, &cone, cfg.hwf.mu, cfg.s, &hwf_opts).stage("propagated_hwf")?;
        hwf_ok &= r.verdict == HwfVerdict::NotInHwf;
        inconclusive |= r.verdict == HwfVerdict::Inconclusive;
        cx.out.write_text(&format!("hwf_t{}.csv", i + 1), &hwf_csv(&r)).stage("write")?;
        rows.push(VerdictRow {
            stage: "propagated_hwf",
            t,
            x: (t - cfg.t0) * eta,
            xi: eta,
            verdict: verdict_name(&r.verdict),
            slope: None,
            r2: None,
            beta: None,
        });
        details.push(json!({"stage": "propagated_hwf", "t": t, "report": hwf_json(&r)}));
        heatmap_at(u, cfg, &format!("heatmap_t{}", i + 1), cx).stage("heatmap")?;
    }

    let wf_opts = WfOptions {
        threshold: cfg.wf.threshold,
        strict: cx.strict,
        ..WfOptions::default()
    };
    let metric = op.metric().clone();
    let mut regular = Vec::new();
    for (i, &t) in cfg.wf.times.iter().enumerate() {
        let u = at(t);
        for (j, &sigma) in cfg.wf.gamma.iter().enumerate() {
            let (y, xi) = gamma_point(&metric, eta, sigma).stage("gamma")?;
            let region = PhaseRegion::ball(y, cfg.wf.xi_scale * xi, cfg.wf.radius_x, cfg.wf.radius_xi);
            let r = wf_decay_fit(u, &region, cfg.wf.mu, &cfg.wf.h_sweep, cfg.s, &wf_opts).stage("wf_decay_fit")?;
            regular.push(r.verdict != WfVerdict::Singular);
            cx.out
                .write_text(&format!("decay_t{}_g{}.csv", i + 1, j + 1), &wf_csv(&r))
                .stage("write")?;
            rows.push(VerdictRow {
                stage: "gamma_wf",
                t,
                x: y,
                xi: cfg.wf.xi_scale * xi,
                verdict: verdict_name(&r.verdict),
                slope: Some(r.fit.slope),
                r2: Some(r.fit.r_squared),
                beta: Some(r.two_term.beta),
            });
            details.push(json!({"stage": "gamma_wf", "t": t, "sigma": sigma, "report": wf_json(&r)}));
        }
    }

    let mut csv = String::from("stage,t,x,xi,verdict,slope,r2,beta\n");
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.17e}")).unwrap_or_default();
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{:.17e},{:.17e},{},{},{},{}\n",
            r.stage,
            r.t,
            r.x,
            r.xi,
            r.verdict,
            opt(r.slope),
            opt(r.r2),
            opt(r.beta)
        ));
    }
    cx.out.write_text("verdicts.csv", &csv).stage("write")?;
    let outcome = match cfg.expect {
        SmoothingExpect::Smooth if inconclusive => Outcome::Inconclusive,
        SmoothingExpect::Smooth => Outcome::from_bool(hwf_ok && regular.iter().all(|&r| r)),
        SmoothingExpect::Singular => Outcome::from_bool(!regular.is_empty() && regular.iter().all(|&r| !r)),
    };
    cx.out
        .write_json("verdict.json", &json!({"expect": cfg.expect, "outcome": outcome, "stages": details}))
        .stage("write")?;
    Ok(outcome)
}

/// `γ(σ)` for the curve with `γ(0) = (0, η₋)`.
fn gamma_point(metric: &Metric, eta: f64, sigma: f64) -> Result<(f64, f64)> {
    if sigma == 0.0 {
        return Ok((0.0, eta));
    }
    let tr = integrate_flow(metric, &[0.0], &[eta], &[0.0, sigma], 1e-10)?;
    Ok((tr.y[1][0], tr.eta[1][0]))
}

pub fn mixed_momentum(cfg: &MixedMomentumConfig, cx: &Context) -> StageResult<Outcome> {
    let u0 = cfg.initial_field().build(cx.seed).stage("field")?;
    let n = u0.dim();
    let eta = vec![cfg.eta_minus; n];
    let traj = integrate_backward(&cfg.metric, &cfg.corridor.y0, &eta, -cfg.corridor.horizon, cfg.corridor.dt, 1e-10).stage("corridor")?;
    let mask = corridor_mask(&traj, cfg.corridor.eps, u0.grid());
    let psi = ConicMultiplier::new(eta, cfg.aperture, cfg.s).stage("multiplier")?;
    let m = mixed_momentum_norms(&u0, &psi, cfg.l_max, &mask).stage("norms")?;
    let mut csv = String::from("l,norm,tail_fraction\n");
    for (l, (v, t)) in m.norms.iter().zip(&m.tail_fractions).enumerate() {
        csv.push_str(&format!("{l},{v:.17e},{t:.17e}\n"));
    }
    cx.out.write_text("norms.csv", &csv).stage("write")?;
    let fit = factorial_envelope_fit(&m.norms, cfg.s);
    let (outcome, fit_json) = match fit {
        Ok(f) => (Outcome::from_bool(f.pass), serde_json::to_value(&f).unwrap_or_default()),
        Err(Error::InvalidInput(msg)) => (Outcome::Inconclusive, json!({ "error": msg })),
        Err(e) => {
            return Err(Failure {
                stage: "envelope".into(),
                error: e,
            })
        }
    };
    cx.out
        .write_json(
            "verdict.json",
            &json!({"aliased_at": m.aliased_at, "norms": m.norms, "envelope": fit_json, "outcome": outcome}),
        )
        .stage("write")?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_gamma_origin() {
        let m = Metric::flat(1);
        assert_eq!(gamma_point(&m, 1.0, 0.0).unwrap(), (0.0, 1.0));
        let (y, xi) = gamma_point(&m, 2.0, -1.5).unwrap();
        assert!((y + 3.0).abs() < 1e-9 && (xi - 2.0).abs() < 1e-12);
    }
}

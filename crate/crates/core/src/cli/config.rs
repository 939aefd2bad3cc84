//! Experiment documents. Every struct rejects unknown keys; omitted keys
//! take the defaults below, and the resolved document is written next to
//! the outputs.

use std::f64::consts::FRAC_PI_4;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::PacketSweep;
use crate::fbi::Method;
use crate::field::SampledField;
use crate::format::load_field;
use crate::grid::GridSpec;
use crate::hamflow::Metric;
use crate::jet::Coefficient;
use crate::params::GevreyParams;
use crate::schrod::SchrodingerOperator;
use crate::spectral::Spectral;
use crate::wfset::{HwfVerdict, PhaseRegion, WfVerdict, DEFAULT_DELTAS, DEFAULT_SLOPE_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum ScenarioName {
    Transform,
    ExtendVerify,
    Flow,
    Propagate,
    WfTest,
    HwfTest,
    Theorem31Sweep,
    SmoothingRun,
    MixedMomentum,
}

impl ScenarioName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::Transform => "transform",
            ScenarioName::ExtendVerify => "extend-verify",
            ScenarioName::Flow => "flow",
            ScenarioName::Propagate => "propagate",
            ScenarioName::WfTest => "wf-test",
            ScenarioName::HwfTest => "hwf-test",
            ScenarioName::Theorem31Sweep => "theorem31-sweep",
            ScenarioName::SmoothingRun => "smoothing-run",
            ScenarioName::MixedMomentum => "mixed-momentum",
        }
    }
}

/// The document as read from disk; `params` is parsed per scenario.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioName,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub scenario: ScenarioName,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub params: Params,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Params {
    Transform(TransformConfig),
    ExtendVerify(ExtendVerifyConfig),
    Flow(FlowConfig),
    Propagate(PropagateConfig),
    WfTest(WfTestConfig),
    HwfTest(HwfTestConfig),
    Theorem31Sweep(Theorem31Config),
    SmoothingRun(SmoothingConfig),
    MixedMomentum(MixedMomentumConfig),
}

fn parse<T: serde::de::DeserializeOwned>(v: &serde_json::Value) -> Result<T> {
    let v = if v.is_null() { serde_json::json!({}) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| Error::Config(format!("params: {e}")))
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn resolve(&self, out: Option<PathBuf>) -> Result<ResolvedConfig> {
        let p = &self.params;
        let params = match self.scenario {
            ScenarioName::Transform => Params::Transform(parse(p)?),
            ScenarioName::ExtendVerify => Params::ExtendVerify(parse(p)?),
            ScenarioName::Flow => Params::Flow(parse(p)?),
            ScenarioName::Propagate => Params::Propagate(parse(p)?),
            ScenarioName::WfTest => Params::WfTest(parse(p)?),
            ScenarioName::HwfTest => Params::HwfTest(parse(p)?),
            ScenarioName::Theorem31Sweep => Params::Theorem31Sweep(parse(p)?),
            ScenarioName::SmoothingRun => Params::SmoothingRun(parse(p)?),
            ScenarioName::MixedMomentum => Params::MixedMomentum(parse(p)?),
        };
        let output_dir = out
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("mlab-out").join(self.scenario.as_str()));
        Ok(ResolvedConfig {
            scenario: self.scenario,
            seed: self.seed,
            output_dir,
            params,
        })
    }
}

/// Initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// `exp(i momentum·x − |x − center|²/(2 width²))`.
    GaussianPacket {
        grid: GridSpec,
        center: Vec<f64>,
        momentum: Vec<f64>,
        #[serde(default = "one")]
        width: f64,
    },
    /// `sign(x₁)·exp(−envelope·|x|²)`.
    Jump {
        grid: GridSpec,
        #[serde(default = "one")]
        envelope: f64,
    },
    /// `exp(i omega·x)/⟨x⟩`.
    InverseBracket {
        grid: GridSpec,
        omega: Vec<f64>,
    },
    /// Sum of `count` unit packets with seeded centres and momenta in the
    /// middle half of the box and of the resolved band.
    RandomPackets {
        grid: GridSpec,
        count: usize,
    },
    Zero {
        grid: GridSpec,
    },
    /// MLAB1 file.
    File {
        path: PathBuf,
    },
    /// `exp(+i time|D|²/2)` applied to `base`: free evolution run backwards.
    FreeBackward {
        base: Box<FieldSpec>,
        time: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl FieldSpec {
    pub fn packet(grid: GridSpec, center: f64, momentum: f64) -> Self {
        FieldSpec::GaussianPacket {
            grid,
            center: vec![center],
            momentum: vec![momentum],
            width: 1.0,
        }
    }

    pub fn build(&self, seed: u64) -> Result<SampledField> {
        match self {
            FieldSpec::GaussianPacket {
                grid,
                center,
                momentum,
                width,
            } => {
                let n = grid.dim();
                if center.len() != n || momentum.len() != n || !(*width > 0.0) {
                    return Err(Error::Config(
                        "packet centre/momentum must match the grid and width must be positive".into(),
                    ));
                }
                SampledField::from_fn(grid.clone(), |x| {
                    let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum();
                    let ph: f64 = x.iter().zip(momentum).map(|(a, k)| a * k).sum();
                    Complex64::from_polar((-r2 / (2.0 * width * width)).exp(), ph)
                })
            }
            FieldSpec::Jump { grid, envelope } => {
                if !(*envelope > 0.0) {
                    return Err(Error::Config("jump envelope must be positive".into()));
                }
                SampledField::from_fn(grid.clone(), |x| {
                    let r2: f64 = x.iter().map(|a| a * a).sum();
                    Complex64::new(x[0].signum() * (-envelope * r2).exp(), 0.0)
                })
            }
            FieldSpec::InverseBracket { grid, omega } => {
                if omega.len() != grid.dim() {
                    return Err(Error::Config("omega must match the grid dimension".into()));
                }
                SampledField::from_fn(grid.clone(), |x| {
                    let r2: f64 = x.iter().map(|a| a * a).sum();
                    let ph: f64 = x.iter().zip(omega).map(|(a, k)| a * k).sum();
                    Complex64::from_polar(1.0 / (1.0 + r2).sqrt(), ph)
                })
            }
            FieldSpec::RandomPackets { grid, count } => {
                let n = grid.dim();
                let sp = Spectral::new(grid);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let packets: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..*count)
                    .map(|_| {
                        let c: Vec<f64> = (0..n)
                            .map(|j| {
                                let mid = 0.5 * (grid.lo()[j] + grid.hi()[j]);
                                let half = 0.25 * (grid.hi()[j] - grid.lo()[j]);
                                rng.gen_range(mid - half..=mid + half)
                            })
                            .collect();
                        let k: Vec<f64> = (0..n).map(|j| rng.gen_range(-0.5..=0.5) * sp.k_max(j)).collect();
                        let a = rng.gen_range(0.5..=1.5);
                        (c, k, a)
                    })
                    .collect();
                SampledField::from_fn(grid.clone(), |x| {
                    packets
                        .iter()
                        .map(|(c, k, a)| {
                            let r2: f64 = x.iter().zip(c).map(|(p, q)| (p - q).powi(2)).sum();
                            let ph: f64 = x.iter().zip(k).map(|(p, q)| p * q).sum();
                            Complex64::from_polar(a * (-r2 / 2.0).exp(), ph)
                        })
                        .sum()
                })
            }
            FieldSpec::Zero { grid } => Ok(SampledField::zeros(grid.clone())),
            FieldSpec::File { path } => load_field(path),
            FieldSpec::FreeBackward { base, time } => {
                let u = base.build(seed)?;
                let sp = Spectral::new(u.grid());
                let tau = *time;
                let v = sp.apply_multiplier(u.values(), |k| {
                    Complex64::from_polar(1.0, 0.5 * tau * k.iter().map(|a| a * a).sum::<f64>())
                });
                u.with_values(v)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    /// `½|D|²` with the given envelope claim.
    Free {
        #[serde(default = "one_dim")]
        dim: usize,
        #[serde(default = "default_envelope")]
        envelope: GevreyParams,
    },
    BuiltinPerturbed,
    Custom {
        operator: SchrodingerOperator,
    },
}

fn one_dim() -> usize {
    1
}

pub fn default_envelope() -> GevreyParams {
    GevreyParams::new(2.0, 1.0, 0.05, 0.5).expect("valid constants")
}

impl Default for OperatorSpec {
    fn default() -> Self {
        OperatorSpec::Free {
            dim: 1,
            envelope: default_envelope(),
        }
    }
}

impl OperatorSpec {
    pub fn build(&self) -> Result<SchrodingerOperator> {
        match self {
            OperatorSpec::Free { dim, envelope } => {
                if !(1..=2).contains(dim) {
                    return Err(Error::Config(format!("dimension {dim} is not 1 or 2")));
                }
                Ok(SchrodingerOperator::free(*dim, *envelope))
            }
            OperatorSpec::BuiltinPerturbed => SchrodingerOperator::builtin_perturbed(),
            OperatorSpec::Custom { operator } => Ok(operator.clone()),
        }
    }
}

/// `lo..hi` sampled at `points` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, points: usize) -> Self {
        Axis { lo, hi, points }
    }
}

fn line(lo: f64, hi: f64, points: usize) -> GridSpec {
    GridSpec::line(lo, hi, points).expect("valid default grid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformConfig {
    pub field: FieldSpec,
    pub h: f64,
    pub mu: f64,
    /// Per-axis x range.
    pub x: Axis,
    /// Per-axis ξ range; snapped to the FFT lattice.
    pub xi: Axis,
    pub method: Method,
    pub isometry_tolerance: f64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig {
            field: FieldSpec::GaussianPacket {
                grid: line(-24.0, 24.0, 512),
                center: vec![0.0],
                momentum: vec![0.0],
                width: 1.0,
            },
            h: 1.0,
            mu: 1.0,
            x: Axis::new(-12.0, 12.0, 256),
            xi: Axis::new(-12.0, 12.0, 256),
            method: Method::Auto,
            isometry_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtendVerifyConfig {
    pub jet: Coefficient,
    pub dim: usize,
    pub s: f64,
    pub r: f64,
    pub w_sweep: Vec<f64>,
    pub sample_box: GridSpec,
    pub real_points: usize,
    pub imag_points: usize,
    /// Pass when the slope is at most `−Ω(1 − tolerance)`.
    pub tolerance: f64,
}

impl Default for ExtendVerifyConfig {
    fn default() -> Self {
        ExtendVerifyConfig {
            jet: Coefficient::Gaussian {
                amplitude: 1.0,
                center: vec![0.0],
                scale: 1.0,
            },
            dim: 1,
            s: 2.0,
            r: 4.0,
            w_sweep: vec![0.2, 0.1, 0.05, 0.025],
            sample_box: line(-1.0, 1.0, 2),
            real_points: 64,
            imag_points: 8,
            tolerance: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub metric: Metric,
    pub y0: Vec<f64>,
    pub eta0: Vec<f64>,
    /// Backward horizon `T > 0`; the flow runs over `[−T, 0]`.
    pub horizon: f64,
    pub dt: f64,
    pub tol: f64,
    pub escape_radius: f64,
    pub doublings: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            metric: Metric::bracket_perturbation(0.1, 0.5).expect("valid metric"),
            y0: vec![0.0],
            eta0: vec![1.0],
            horizon: 40.0,
            dt: 0.25,
            tol: 1e-10,
            escape_radius: 5.0,
            doublings: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagateConfig {
    pub operator: OperatorSpec,
    pub field: FieldSpec,
    pub times: Vec<f64>,
    pub max_dt: f64,
    pub estimate_error: bool,
}

impl Default for PropagateConfig {
    fn default() -> Self {
        PropagateConfig {
            operator: OperatorSpec::default(),
            field: FieldSpec::packet(line(-40.0, 40.0, 1024), -2.0, 1.0),
            times: vec![0.5, 1.0, 2.0],
            max_dt: 0.01,
            estimate_error: false,
        }
    }
}

/// Optional evolution applied to the field before a test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evolve {
    #[serde(default)]
    pub operator: OperatorSpec,
    pub t: f64,
    #[serde(default = "default_max_dt")]
    pub max_dt: f64,
}

fn default_max_dt() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WfTestConfig {
    pub field: FieldSpec,
    pub evolve: Option<Evolve>,
    pub region: PhaseRegion,
    pub mu: f64,
    pub h_sweep: Vec<f64>,
    pub s: f64,
    pub threshold: f64,
    pub expect: Option<WfVerdict>,
}

impl Default for WfTestConfig {
    fn default() -> Self {
        WfTestConfig {
            field: FieldSpec::packet(line(-20.0, 20.0, 2048), 0.0, 0.0),
            evolve: None,
            region: PhaseRegion::ball(4.0, 1.0, 0.5, 0.5),
            mu: 1.0,
            h_sweep: vec![0.2, 0.1, 0.05, 0.025],
            s: 2.0,
            threshold: DEFAULT_SLOPE_THRESHOLD,
            expect: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HwfTestConfig {
    pub field: FieldSpec,
    pub evolve: Option<Evolve>,
    pub cone: PhaseRegion,
    pub mu: f64,
    pub s: f64,
    pub deltas: Vec<f64>,
    pub r_min: f64,
    pub max_points: usize,
    pub expect: Option<HwfVerdict>,
}

impl Default for HwfTestConfig {
    fn default() -> Self {
        HwfTestConfig {
            field: FieldSpec::packet(line(-60.0, 60.0, 1200), 0.0, 0.0),
            evolve: None,
            cone: PhaseRegion::cone(-2.0, 1.0, 0.3),
            mu: 1.0,
            s: 2.0,
            deltas: DEFAULT_DELTAS.to_vec(),
            r_min: 1.0,
            max_points: 512,
            expect: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Theorem31Config {
    pub operator: OperatorSpec,
    pub sweep: PacketSweep,
    /// Largest admissible max/min ratio of each constant.
    pub limit: f64,
}

impl Default for Theorem31Config {
    fn default() -> Self {
        Theorem31Config {
            operator: OperatorSpec::BuiltinPerturbed,
            sweep: PacketSweep::default(),
            limit: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingExpect {
    /// Hypothesis holds, every propagated HWF test and every WF fit is regular.
    Smooth,
    /// Every WF fit flags a singular point.
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HwfStage {
    pub mu: f64,
    pub aperture: f64,
    pub deltas: Vec<f64>,
    pub r_min: f64,
    pub max_points: usize,
}

impl Default for HwfStage {
    fn default() -> Self {
        HwfStage {
            mu: 1.0,
            aperture: 0.3,
            deltas: DEFAULT_DELTAS.to_vec(),
            r_min: 1.0,
            max_points: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WfStage {
    pub mu: f64,
    pub h_sweep: Vec<f64>,
    pub radius_x: f64,
    pub radius_xi: f64,
    pub threshold: f64,
    /// Times near `t0` at which to probe.
    pub times: Vec<f64>,
    /// Parameters `σ` of the probed points `γ(σ)`.
    pub gamma: Vec<f64>,
    /// Probe at `(y(σ), xi_scale·η(σ))`.
    pub xi_scale: f64,
}

impl Default for WfStage {
    fn default() -> Self {
        WfStage {
            mu: 1.0,
            h_sweep: vec![0.2, 0.1, 0.05, 0.025],
            radius_x: 1.0,
            radius_xi: 0.5,
            threshold: DEFAULT_SLOPE_THRESHOLD,
            times: vec![1.9],
            gamma: vec![0.0],
            xi_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingConfig {
    pub t0: f64,
    pub eta_minus: f64,
    /// Defaults to the unit packet at `−t0η₋` with momentum `η₋`.
    pub field: Option<FieldSpec>,
    pub operator: OperatorSpec,
    pub max_dt: f64,
    /// Times `t < t0` for the propagated HWF tests.
    pub times: Vec<f64>,
    pub s: f64,
    pub hwf: HwfStage,
    pub wf: WfStage,
    pub heatmap_x: Axis,
    /// Offsets from `η₋`.
    pub heatmap_xi: Axis,
    pub expect: SmoothingExpect,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            t0: 2.0,
            eta_minus: 1.0,
            field: None,
            operator: OperatorSpec::default(),
            max_dt: 0.01,
            times: vec![0.5, 1.0, 1.5, 1.9],
            s: 2.0,
            hwf: HwfStage::default(),
            wf: WfStage::default(),
            heatmap_x: Axis::new(-8.0, 8.0, 128),
            heatmap_xi: Axis::new(-3.0, 3.0, 96),
            expect: SmoothingExpect::Smooth,
        }
    }
}

impl SmoothingConfig {
    pub fn initial_field(&self) -> FieldSpec {
        self.field
            .clone()
            .unwrap_or_else(|| FieldSpec::packet(line(-40.0, 40.0, 4096), -self.t0 * self.eta_minus, self.eta_minus))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Corridor {
    pub y0: Vec<f64>,
    pub eps: f64,
    pub horizon: f64,
    pub dt: f64,
}

impl Default for Corridor {
    fn default() -> Self {
        Corridor {
            y0: vec![0.0],
            eps: 0.5,
            horizon: 80.0,
            dt: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixedMomentumConfig {
    pub t0: f64,
    pub eta_minus: f64,
    /// Defaults to the unit packet at `−t0η₋` with momentum `η₋`.
    pub field: Option<FieldSpec>,
    pub metric: Metric,
    pub corridor: Corridor,
    pub aperture: f64,
    pub s: f64,
    pub l_max: usize,
}

impl Default for MixedMomentumConfig {
    fn default() -> Self {
        MixedMomentumConfig {
            t0: 2.0,
            eta_minus: 16.0,
            field: None,
            metric: Metric::flat(1),
            corridor: Corridor::default(),
            aperture: FRAC_PI_4,
            s: 2.0,
            l_max: 10,
        }
    }
}

impl MixedMomentumConfig {
    pub fn initial_field(&self) -> FieldSpec {
        self.field.clone().unwrap_or_else(|| {
            let c = -self.t0 * self.eta_minus;
            FieldSpec::packet(line(c - 28.0, 20.0_f64.max(c + 28.0), 2048), c, self.eta_minus)
        })
    }
}

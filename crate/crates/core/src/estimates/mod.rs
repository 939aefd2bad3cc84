//! Weighted FBI estimates: the Gevrey step, transport weights, the
//! distorted symbol and the pairing checks.

pub mod checks;
pub mod energy;
pub mod step;
pub mod sweep;
pub mod symbol;
pub mod weight;

pub use checks::{
    check_corollary36, check_theorem31, phase_integrals, sweep_ratio, theorem_scale, Corollary36Report, PhaseIntegrals, PhaseWindow, Theorem31Report,
};
pub use energy::{check_gronwall, energy_series, EnergyResolution, EnergySample, FlowParams, GronwallProfile, GronwallReport};
pub use step::GevreyStep;
pub use sweep::{packet_sweep, PacketSweep, PacketSweepRow};
pub use symbol::{check_lemma_taylor, hamilton_derivative, lemma_scale, DistortedSymbol, LemmaReport};
pub use weight::{CutoffF, PhaseWeight, Transport, TransportWeight, ZeroWeight, DEFAULT_DELTA_FRACTION};

//! Phase-space numerics for Gevrey microlocal smoothing of Schrödinger
//! equations.

// `!(a < b)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aae;
pub mod cli;
pub mod error;
pub mod estimates;
pub mod fbi;
pub mod field;
pub mod fit;
pub mod format;
pub mod grid;
pub mod hamflow;
pub mod jet;
pub mod ode;
pub mod params;
pub mod schrod;
pub mod spectral;
pub mod wfset;

pub use error::{Error, FormatError, Result};
pub use field::{l2_norm, SampledField};
pub use fit::{fit_decay, AbscissaKind, DecayFit};
pub use grid::GridSpec;
pub use params::GevreyParams;

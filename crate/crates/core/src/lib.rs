//! Effective two-atom model of superradiant emission from a dense, inverted
//! ensemble.
//!
//! The medium is represented by a pair of atoms whose emission rates `Gamma`
//! (population-driven) and `Gammabar` (correlation-driven) are fixed by a
//! self-consistency condition on the surrounding polarization. Time is
//! measured in units of `1/gamma`, rates in units of `gamma`.
//!
//! * [`types`] — state containers and the reduced <-> full mapping
//! * [`rates`] — the self-consistent rate solver
//! * [`spectral`] — detuning spectrum and Kramers-Kronig chirp
//! * [`dynamics`] — reduced equations of motion and their integration
//! * [`oracle`] — full 4x4 master equation used as a cross-check
//! * [`scan`] — cooperativity sweeps and scaling fits

// `!(v > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod ode;
pub mod oracle;
pub mod rates;
pub mod scan;
pub mod spectral;
pub mod types;

pub use dynamics::{find_peak, integrate, IntegratorConfig, Peak, Sample, Trajectory};
pub use error::{Error, Result};
pub use rates::{solve_self_consistent, SelfConsistentRates};
pub use types::{
    reconstruct, reduce, DeltaMode, Parameters, RateSet, ReducedState, SizeMode, TwoAtomDensityMatrix,
};

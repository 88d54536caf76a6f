//! Simulation toolkit for nonlinear bidimensional spiking neuron models.
//!
//! The models treated here couple a membrane potential `v` with superlinear
//! drift `F(v)` to an adaptation variable `w`:
//!
//! ```text
//! dv/dt = F(v) - w + I(t)
//! dw/dt = a (b v - w)
//! ```
//!
//! with a discrete reset `v -> c`, `w -> w + d` once `v` reaches a cutoff
//! `theta`. Spikes are blow-ups of `v`, so fixed-step time integration is
//! both inaccurate near spikes and structurally unable to keep the spike
//! pattern right at coarse steps. This crate provides:
//!
//! * the classical forward Euler baseline ([`integrate::simulate_euler`]),
//! * hybrid schemes that switch to a phase-plane parametrization
//!   `(T(v), W(v))` during the upstroke ([`integrate::simulate_hybrid_fixed`],
//!   [`integrate::simulate_hybrid_adaptive`]),
//! * a high-accuracy reference solver ([`integrate::reference_solve`]),
//! * closed-form error envelopes for the Euler scheme and one-dimensional
//!   blow-up benchmarks ([`error_analysis`], [`onedim`]),
//! * spike-train post-processing ([`spiketrain`]) and a batch experiment
//!   harness ([`harness`]).

// Validators use `!(x > 0.0)`-style guards so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod error_analysis;
pub mod harness;
pub mod integrate;
pub mod model;
pub mod onedim;
pub mod spiketrain;

pub use error::{Error, Result};
pub use integrate::{Scheme, SimState, SolverConfig, SpikeDetection, SpikeTrain};
pub use model::{FixedPointAnalysis, InputCurrent, ModelSpec, Nonlinearity};

//! Reconstruction of sparse signals from noisy linear measurements when the
//! measurement matrix itself is known only approximately.
//!
//! The crate provides four cooperating pieces:
//!
//! * [`prior`] — the Gauss-Bernoulli signal prior and its Bayes denoiser,
//!   the only model-dependent kernel in the whole stack;
//! * [`instance`] — synthetic problem generation (true matrix, corrupted
//!   observation of it, rescaled solver matrix, noisy measurements);
//! * [`amp`] — the robust approximate-message-passing solver with
//!   selectable residual-variance rules;
//! * [`replica`], [`state_evolution`], [`phase`] — the asymptotic theory:
//!   the free-energy-like potential whose global maximum is the best
//!   achievable mean-squared error, the scalar recursion predicting the
//!   solver's trajectory at infinite size, and scanners for the two
//!   transitions that partition the parameter plane.
//!
//! The [`reference`] module carries deliberately naive re-implementations
//! (scalar loops, adaptive quadrature, Monte Carlo) used by the test
//! suites to validate the production paths.
//!
//! The crate is `no_std`-compatible (`alloc` required); disable default
//! features to drop `std`. Enable `parallel` for multi-threaded solver
//! sweeps; results are bitwise independent of the thread count.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod amp;
pub mod instance;
pub mod math;
pub mod matrix;
pub mod phase;
pub mod prior;
pub mod quad;
pub mod reference;
pub mod replica;
pub mod state_evolution;

pub use amp::{amp_run, amp_step, compute_mse, AmpConfig, AmpReport, AmpState, VarianceRule};
pub use instance::{generate, NoiseModel, ProblemInstance};
pub use phase::{classify, find_transition, sweep_phase_diagram, PhaseClass, PhasePoint};
pub use prior::{DenoiserResult, SignalPrior};
pub use replica::{bayes_mse, potential, scan_potential, PotentialCurve, ReplicaParams};
pub use state_evolution::{de_run, de_step, predicted_v, DeTrajectory};

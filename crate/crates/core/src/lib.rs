//! Offline design of maximum-SINR transmit/receive waveform pairs for
//! multicarrier (FBMC) systems on hexagonal and rectangular time-frequency
//! lattices over doubly dispersive WSSUS channels.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: lattice geometry, sampled waveforms and their time/frequency shifted copies.
//! * [`channel`]: separable scattering statistics, Jakes autocorrelation, random realizations.
//! * [`kernels`]: Hermitian quadratic-form kernels for useful and interference power.
//! * [`solver`]: the ping-pong alternating maximization and its window/dispersion searches.
//! * [`metrics`]: sweeps, spectra, synchronization sensitivity and codebooks.
//! * [`mc_oracle`]: an independent Monte-Carlo link simulator used to validate the kernels.
//!
//! Interchangeable algorithms (lattice geometries, generalized Rayleigh quotient
//! solvers) sit behind traits and are looked up by name at runtime.

pub mod bessel;
pub mod channel;
pub mod error;
pub mod kernels;
pub mod lattice;
pub mod mc_oracle;
pub mod metrics;
pub mod solver;

pub use error::{Error, Result};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;

/// Converts a linear power ratio to decibels (`+inf` for an infinite ratio).
pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Converts decibels to a linear power ratio.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

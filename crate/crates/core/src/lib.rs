//! Neural steerer: a continuous complex-valued field over (azimuth,
//! elevation, frequency) that reproduces multichannel steering vectors from
//! sparse grid measurements.
//!
//! The crate is organised bottom-up:
//!
//! * [`sigproc`] steering-vector algebra, real-filter DFT helpers and the
//!   discrete Hilbert operator behind the causality penalty.
//! * [`model`] SIREN networks, the wrap-free complex head, hand-written
//!   reverse-mode gradients, Adam and the checkpoint container.
//! * [`loss`] log-magnitude / phase / time-domain / causality objectives.
//! * [`data`] grid datasets, the synthetic scene generator, file I/O, splits
//!   and batching.
//! * [`baseline`] SCF and nearest-neighbour interpolators.
//! * [`eval`] metrics and evaluation protocols.
//! * [`train`] the optimisation loop with early stopping and resume.
//! * [`config`] / [`commands`] the flat key-value run configuration and the
//!   command implementations behind the `nsteer` binary.

pub mod baseline;
pub mod commands;
pub mod config;
mod container;
pub mod data;
pub mod error;
pub mod eval;
pub mod loss;
pub mod model;
pub mod parallel;
pub mod seeds;
pub mod sigproc;
pub mod train;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

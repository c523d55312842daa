//! Desk-scale model of a GRIN-lens / single-mode-fiber collection system for
//! polarization-entangled photon pairs.
//!
//! The crate is split along the physical pipeline:
//!
//! - [`beam_optics`]: Gaussian-beam ABCD propagation through GRIN rods and
//!   free space, fiber-mode coupling and misalignment sweeps.
//! - [`polkit`]: two-photon polarization states, Jones operators for
//!   waveplates and analyzers, fidelity and Wootters concurrence/tangle.
//! - [`expsim`]: the entangled-pair source, mirror-scan phase control and
//!   Poissonian coincidence counting with accidentals.
//! - [`tomo`]: 16-setting two-qubit tomography, linear inversion,
//!   maximum-likelihood reconstruction and bootstrap error bars.
//! - [`fitkit`]: damped least-squares fits of fringes and Gaussian profiles.
//! - [`config`] and [`cli`]: the JSON run configuration, presets, and the
//!   command implementations behind the `grinpol` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beam_optics;
pub mod cli;
pub mod config;
pub mod error;
pub mod expsim;
pub mod fitkit;
pub mod io;
pub mod polkit;
pub mod seeds;
pub mod tomo;

pub use error::{Error, Result};

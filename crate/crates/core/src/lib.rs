//! Design and analysis toolkit for high-impedance granular-aluminum meander
//! ring resonators.
//!
//! The forward model ([`material`], [`ring_model`]) predicts L, C, f0 and Z
//! from film and layout parameters; [`calibration`] fits its constants to
//! device tables and [`design_opt`] searches for maximum-impedance layouts.
//! The analysis side fits reflection traces ([`resonance_fit`]), frequency
//! noise spectra ([`noise_psd`]) and power-dependent frequency shifts
//! ([`photon_response`]). [`synth`] generates the seeded synthetic data used
//! to validate every fitter.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod design_opt;
pub mod error;
pub mod io;
pub mod lsq;
pub mod material;
pub mod noise_psd;
pub mod photon_response;
pub mod resonance_fit;
pub mod ring_model;
pub mod synth;

pub use error::{Error, Result};

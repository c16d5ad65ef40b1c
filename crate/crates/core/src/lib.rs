//! Simulator and analysis toolkit for the energy-degenerate biexciton-exciton
//! photon cascade of a quantum-dot twin-photon source.
//!
//! The crate is organized around the measurement chain of a twin-photon
//! experiment:
//!
//! * [`model`] - four-level rate-equation model, steady state, closed-form and
//!   numeric second-order correlation functions, instrument-response
//!   convolution.
//! * [`mc`] - stochastic quantum-jump trajectories (CW and pulsed) and the
//!   detection chain (filters, efficiency, beamsplitter, jitter, dark counts).
//! * [`correlator`] - coincidence histograms, g² normalization, pulsed peak
//!   areas, model fits, twin-fraction and twin-photon-rate arithmetic.
//! * [`hom`] - Hong-Ou-Mandel interference of twin-photon pulses and
//!   visibility extraction.
//! * [`pnr`] - photon-number-resolving (pulse-area) detection, binomial loss
//!   inversion and bootstrap uncertainties.
//! * [`spectra`] - polarization-resolved quadruplet spectra, constrained
//!   Lorentzian fits, fine-structure-splitting extraction.
//! * [`numerics`] - shared services: damped least squares, matrix exponential,
//!   adaptive quadrature, splittable deterministic random streams.
//! * [`cli`] - the `twinphoton` command-line front end.

// Validation guards are written as `!(x > 0.0)` so that NaN inputs are
// rejected along with non-positive ones; the suggested `x <= 0.0` would let
// NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod correlator;
pub mod error;
pub mod hom;
pub mod io;
pub mod mc;
pub mod model;
pub mod numerics;
pub mod pnr;
pub mod spectra;

pub use error::{Error, Result};

//! Numerical laboratory for fractional Dirac operators on flat 2-tori.
//!
//! The crate assembles generalized Dirac operators on a truncated
//! Fourier x fiber basis, evaluates their spectral calculus (fractional
//! powers, heat and sine propagators), solves the inhomogeneous wave
//! equation exactly per eigenmode, and runs the boundary-control recovery
//! pipeline (inner products from local wave data, distances, cut times,
//! fiber frames and connection coefficients) against closed-form oracles.

pub mod clifford;
pub mod config;
pub mod dirac;
pub mod error;
pub mod experiments;
pub mod fractional;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod output;
pub mod recovery;
pub mod wave;

pub use error::{LabError, Result};
pub use num_complex::Complex64 as C64;

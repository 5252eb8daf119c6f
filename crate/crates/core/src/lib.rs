//! Simulator and analysis toolkit for a superconducting cavity coupled to a
//! flux-pumped lossy mode ("dissipator") used for on-demand cavity reset and
//! refrigeration.
//!
//! The crate is organized bottom-up:
//!
//! - [`hilbert`]: labeled tensor-product spaces, dense operators, density
//!   matrices.
//! - [`model`]: device parameters, flux tuning curve, drive calibration, and
//!   Hamiltonian/collapse-operator builders in both lab and rotating frames.
//! - [`dynamics`]: Lindblad propagation (fixed-step RK4), steady states via
//!   the vectorized Liouvillian, and closed-form ringdown references.
//! - [`analytics`]: the closed-form rate and thermodynamics formulas
//!   (swap rates, induced loss, occupations, dephasing budgets, detailed
//!   balance).
//! - [`experiments`]: parameter sweeps reproducing the ringdown, reset,
//!   refrigeration, and flux-spectroscopy measurements.
//! - [`calibration`]: damped Gauss-Newton least squares and the fitters used
//!   to reduce sweep data (exponential, Lorentzian, avoided crossing, flux
//!   curve).
//!
//! Unit convention: every frequency, rate, and coupling inside this crate is
//! angular, in rad/us; time is in us and temperature in kelvin. Helpers in
//! [`constants`] convert the linear-frequency values quoted by instruments
//! (GHz/MHz/kHz) at the boundary. A rate like `kappa_c = 2.997 rad/us` is
//! numerically the familiar `3.0 us^-1` energy decay rate.

pub mod analytics;
pub mod calibration;
pub mod constants;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod hilbert;
pub mod model;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix type backing every operator.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Dense complex vector (pure states, vectorized density matrices).
pub type CVector = nalgebra::DVector<C64>;

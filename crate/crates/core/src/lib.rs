//! Photon-assisted tunneling spectroscopy of a two-electron double quantum
//! dot: five-level Hamiltonian, rotating-frame drive, phonon relaxation,
//! simulated lock-in spectra, pulse-reference calibration, parameter fits
//! and relaxation-mechanism estimates.
//!
//! Units throughout: energies in μeV, fields in T, frequencies in GHz,
//! times in ns, rates in 1/ns, temperatures in K.

pub mod calibration;
pub mod constants;
pub mod dissipation;
pub mod error;
pub mod fitting;
pub mod mechanisms;
pub mod numerics;
pub mod peaks;
pub mod physics;
pub mod rwa;
pub mod spectra;
pub mod sweep;
pub mod synth;

pub use dissipation::PhononBath;
pub use error::{Error, Result};
pub use physics::{DeviceParams, FieldPoint};
pub use rwa::DriveParams;
pub use sweep::Execution;

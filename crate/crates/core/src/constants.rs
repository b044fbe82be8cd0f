//! Physical constants in the unit system used throughout the crate.
//!
//! Energies are in μeV, fields in T, frequencies in GHz, times in ns and
//! temperatures in K.

use std::f64::consts::PI;

/// Planck constant h in μeV per GHz.
pub const PLANCK_UEV_PER_GHZ: f64 = 4.135667;

/// Bohr magneton μ_B in μeV per T.
pub const BOHR_MAGNETON_UEV_PER_T: f64 = 57.8838;

/// Boltzmann constant k_B in μeV per K.
pub const BOLTZMANN_UEV_PER_K: f64 = 86.17333;

/// Reduced Planck constant ħ = h/2π in μeV·ns.
pub const HBAR_UEV_NS: f64 = PLANCK_UEV_PER_GHZ / (2.0 * PI);

/// Photon energy hν in μeV for a frequency in GHz.
pub fn photon_energy(nu_ghz: f64) -> f64 {
    PLANCK_UEV_PER_GHZ * nu_ghz
}

/// Zeeman energy |g| μ_B B in μeV.
pub fn zeeman_energy(g_abs: f64, field_t: f64) -> f64 {
    g_abs * BOHR_MAGNETON_UEV_PER_T * field_t
}

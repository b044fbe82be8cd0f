//! Rotating-frame treatment of the microwave drive.
//!
//! Eigenlevels are grouped into bands separated by roughly one photon
//! energy. In the frame rotating with the drive, band `n` is shifted down by
//! `n·hν` and the detuning modulation `Ω cos(νt)` couples adjacent bands
//! through the S(0,2) projector.

use nalgebra::Matrix5;

use crate::constants::photon_energy;
use crate::error::{Error, Result};
use crate::physics::{EigenSystem, C64};

/// Microwave drive: frequency (GHz) and detuning amplitude Ω (μeV).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveParams {
    pub nu: f64,
    pub omega: f64,
}

impl DriveParams {
    pub fn new(nu: f64, omega: f64) -> Self {
        Self { nu, omega }
    }

    /// Checks `nu > 0` and `omega ≥ 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "drive frequency must be positive, got {}",
                self.nu
            )));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "drive amplitude must be non-negative, got {}",
                self.omega
            )));
        }
        Ok(())
    }

    /// Photon energy hν in μeV.
    pub fn photon_energy(&self) -> f64 {
        photon_energy(self.nu)
    }

    /// Same frequency with a different amplitude.
    pub fn with_omega(self, omega: f64) -> Self {
        Self { omega, ..self }
    }
}

/// Band index of every eigenstate plus RWA diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct BandAssignment {
    /// Band index of eigenstate `k` (ascending-energy order).
    pub band_index: [i32; 5],
    /// Photon energy used for the grouping (μeV).
    pub photon_energy: f64,
    /// Largest deviation of a band's mean offset from its integer multiple
    /// of hν, in units of hν.
    pub worst_offset: f64,
    /// Largest energy spread inside one band, in units of hν.
    pub worst_spread: f64,
}

impl BandAssignment {
    /// True when every band lies within hν/3 of its nominal position and
    /// no band is wider than hν/3.
    pub fn rwa_valid(&self) -> bool {
        self.worst_offset <= 1.0 / 3.0 && self.worst_spread < 1.0 / 3.0
    }

    /// Distinct band indices in ascending order.
    pub fn bands(&self) -> Vec<i32> {
        let mut b: Vec<i32> = self.band_index.to_vec();
        b.sort_unstable();
        b.dedup();
        b
    }

    /// Orthogonal projector onto band `n` in the eigenbasis.
    pub fn projector(&self, n: i32) -> Matrix5<C64> {
        let mut p = Matrix5::<C64>::zeros();
        for k in 0..5 {
            if self.band_index[k] == n {
                p[(k, k)] = C64::new(1.0, 0.0);
            }
        }
        p
    }

    /// True when eigenstates `i` and `j` share a band.
    pub fn same_band(&self, i: usize, j: usize) -> bool {
        self.band_index[i] == self.band_index[j]
    }
}

/// Rotating-frame Hamiltonian and drive coupling, both in the eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatingFrameModel {
    /// Diagonal `E_k − n_k hν`.
    pub h_eff: Matrix5<C64>,
    /// Adjacent-band coupling `Ω ⟨i|S02⟩⟨S02|j⟩` plus its conjugate.
    pub v_drive: Matrix5<C64>,
}

/// Groups ascending eigenenergies into photon bands.
///
/// A new cluster starts whenever a level lies more than hν/3 above the
/// lowest member of the current cluster. Each cluster gets the index
/// `round((mean − E_ground)/hν)`; clusters that round to the same index are
/// merged.
pub fn assign_bands(eig: &EigenSystem, nu: f64) -> BandAssignment {
    assign_bands_from_energies(&eig.energies, nu)
}

/// [`assign_bands`] on bare ascending energies.
pub fn assign_bands_from_energies(energies: &[f64; 5], nu: f64) -> BandAssignment {
    let hv = photon_energy(nu);
    let mut clusters: Vec<Vec<usize>> = vec![vec![0]];
    for k in 1..5 {
        let first = clusters.last().expect("non-empty")[0];
        if energies[k] - energies[first] > hv / 3.0 {
            clusters.push(vec![k]);
        } else {
            clusters.last_mut().expect("non-empty").push(k);
        }
    }
    let mut band_index = [0i32; 5];
    for c in &clusters {
        let mean = c.iter().map(|&k| energies[k]).sum::<f64>() / c.len() as f64;
        let n = ((mean - energies[0]) / hv).round() as i32;
        for &k in c {
            band_index[k] = n;
        }
    }

    let mut worst_offset: f64 = 0.0;
    let mut worst_spread: f64 = 0.0;
    let mut bands: Vec<i32> = band_index.to_vec();
    bands.dedup();
    let mean_of = |n: i32| {
        let members: Vec<f64> = (0..5).filter(|&k| band_index[k] == n).map(|k| energies[k]).collect();
        let spread = members.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - members.iter().cloned().fold(f64::INFINITY, f64::min);
        (members.iter().sum::<f64>() / members.len() as f64, spread)
    };
    let (base, _) = mean_of(band_index[0]);
    for &n in &bands {
        let (m, spread) = mean_of(n);
        worst_offset = worst_offset.max(((m - base) - n as f64 * hv).abs() / hv);
        worst_spread = worst_spread.max(spread / hv);
    }
    BandAssignment {
        band_index,
        photon_energy: hv,
        worst_offset,
        worst_spread,
    }
}

/// Builds the rotating-frame model for a drive.
pub fn build_drive_perturbation(eig: &EigenSystem, bands: &BandAssignment, drive: &DriveParams) -> RotatingFrameModel {
    let hv = bands.photon_energy;
    let mut h_eff = Matrix5::<C64>::zeros();
    for k in 0..5 {
        h_eff[(k, k)] = C64::new(eig.energies[k] - bands.band_index[k] as f64 * hv, 0.0);
    }
    let mut v_drive = Matrix5::<C64>::zeros();
    if drive.omega != 0.0 {
        let omega = C64::new(drive.omega, 0.0);
        for i in 0..5 {
            for j in 0..5 {
                if bands.band_index[j] == bands.band_index[i] + 1 {
                    let v = omega * eig.s02_amplitude(i).conj() * eig.s02_amplitude(j);
                    v_drive[(i, j)] = v;
                    v_drive[(j, i)] = v.conj();
                }
            }
        }
    }
    RotatingFrameModel { h_eff, v_drive }
}

//! Simulated photon-assisted tunneling spectra.
//!
//! Each grid point is an independent stationary-state problem: the lock-in
//! signal is the drop in S(0,2) population when the drive is switched on.

use crate::dissipation::{
    build_superoperator, dipole_matrix, steady_state, transition_rates, DensityMatrix, PhononBath,
};
use crate::error::{Error, Result};
use crate::peaks::{find_lorentzians, PeakSearch};
use crate::physics::{build_hamiltonian, eigensystem, DeviceParams, EigenSystem, FieldPoint};
use crate::rwa::{assign_bands, build_drive_perturbation, BandAssignment, DriveParams};
use crate::sweep::{map_indexed, Execution};

/// Stationary states with and without drive at one `(B, ε)` point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSolution {
    pub eigen: EigenSystem,
    pub bands: BandAssignment,
    pub idle: DensityMatrix,
    pub driven: DensityMatrix,
    /// S(0,2) population without drive.
    pub p_idle: f64,
    /// S(0,2) population with drive.
    pub p_driven: f64,
}

impl PointSolution {
    /// `P(Ω = 0) − P(Ω)`; positive when the drive empties S(0,2).
    pub fn delta_n(&self) -> f64 {
        self.p_idle - self.p_driven
    }
}

/// Time-averaged S(0,2) population of a rotating-frame state.
///
/// Coherences between different bands oscillate at multiples of ν in the lab
/// frame and average out, so only same-band pairs contribute:
/// `P = Re Σ_{band(i)=band(j)} ρ_ij ⟨j|S02⟩⟨S02|i⟩`.
pub fn s02_population(rho: &DensityMatrix, eig: &EigenSystem, bands: &BandAssignment) -> f64 {
    let d = dipole_matrix(eig);
    let mut p = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            if bands.same_band(i, j) {
                p += (rho.rho[(i, j)] * d[(j, i)]).re;
            }
        }
    }
    p
}

/// Solves the driven and undriven stationary states at one point.
pub fn solve_point(
    device: &DeviceParams,
    point: FieldPoint,
    drive: &DriveParams,
    bath: &PhononBath,
) -> Result<PointSolution> {
    device.validate()?;
    drive.validate()?;
    bath.validate()?;
    let eigen = eigensystem(&build_hamiltonian(device, point))?;
    let bands = assign_bands(&eigen, drive.nu);
    let rates = transition_rates(&eigen, bath);
    let solve = |omega: f64| -> Result<DensityMatrix> {
        let model = build_drive_perturbation(&eigen, &bands, &drive.with_omega(omega));
        steady_state(&build_superoperator(&model, &rates))
    };
    let idle = solve(0.0)?;
    let driven = solve(drive.omega)?;
    let p_idle = s02_population(&idle, &eigen, &bands);
    let p_driven = s02_population(&driven, &eigen, &bands);
    Ok(PointSolution {
        eigen,
        bands,
        idle,
        driven,
        p_idle,
        p_driven,
    })
}

/// Lock-in signal Δn at one point.
pub fn lockin_delta_n(device: &DeviceParams, point: FieldPoint, drive: &DriveParams, bath: &PhononBath) -> Result<f64> {
    solve_point(device, point, drive, bath).map(|s| s.delta_n())
}

/// Evenly spaced closed interval `[min, max]` with `count` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisRange {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    /// Checks `count ≥ 2` and `min < max`.
    pub fn validate(&self, name: &str) -> Result<()> {
        if self.count < 2 {
            return Err(Error::InvalidInput(format!(
                "{name} axis needs at least 2 samples, got {}",
                self.count
            )));
        }
        if !(self.min < self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidInput(format!(
                "{name} axis range must be finite and ordered, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    /// Sample values, with both end points exact.
    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|k| {
                if k + 1 == n {
                    self.max
                } else {
                    self.min + (self.max - self.min) * k as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

/// Slow axis of a scan: magnetic field, or drive amplitude at fixed field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanAxis {
    /// Field sweep in T.
    Field(AxisRange),
    /// Drive-amplitude sweep in μeV at fixed field `b_ext` (T).
    Power { b_ext: f64, omega: AxisRange },
}

impl ScanAxis {
    /// CSV column name of the slow axis.
    pub fn label(&self) -> &'static str {
        match self {
            ScanAxis::Field(_) => "B_T",
            ScanAxis::Power { .. } => "omega_ueV",
        }
    }

    pub fn range(&self) -> &AxisRange {
        match self {
            ScanAxis::Field(r) => r,
            ScanAxis::Power { omega, .. } => omega,
        }
    }
}

/// Full description of a two-dimensional scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSpec {
    pub epsilon: AxisRange,
    pub axis: ScanAxis,
    pub drive: DriveParams,
    pub bath: PhononBath,
    pub device: DeviceParams,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        self.epsilon.validate("detuning")?;
        match &self.axis {
            ScanAxis::Field(r) => r.validate("field")?,
            ScanAxis::Power { b_ext, omega } => {
                omega.validate("drive amplitude")?;
                if omega.min < 0.0 {
                    return Err(Error::InvalidInput("drive amplitudes must be non-negative".into()));
                }
                if !b_ext.is_finite() {
                    return Err(Error::InvalidInput("field must be finite".into()));
                }
            }
        }
        self.device.validate()?;
        self.drive.validate()?;
        self.bath.validate()
    }

    /// Field, detuning and drive at grid cell `(row, col)`.
    fn cell(&self, axis: &[f64], eps: &[f64], row: usize, col: usize) -> (FieldPoint, DriveParams) {
        match self.axis {
            ScanAxis::Field(_) => (FieldPoint::new(axis[row], eps[col]), self.drive),
            ScanAxis::Power { b_ext, .. } => (FieldPoint::new(b_ext, eps[col]), self.drive.with_omega(axis[row])),
        }
    }
}

/// Grid cell whose stationary state could not be computed.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedCell {
    pub row: usize,
    pub col: usize,
    pub diagnostic: String,
}

/// Δn over (slow axis × detuning), stored row-major with one row per
/// slow-axis value. Masked cells hold NaN and are listed in `masked`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub spec: ScanSpec,
    pub axis_values: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub delta_n: Vec<f64>,
    pub masked: Vec<MaskedCell>,
}

impl SpectrumGrid {
    pub fn rows(&self) -> usize {
        self.axis_values.len()
    }

    pub fn cols(&self) -> usize {
        self.epsilon.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.delta_n[row * self.cols() + col]
    }

    /// One detuning trace.
    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.cols();
        &self.delta_n[row * n..(row + 1) * n]
    }
}

/// Evaluates [`lockin_delta_n`] on every grid cell.
///
/// Cells are independent; the result is identical for every execution
/// policy. Per-cell failures are masked rather than aborting the scan.
pub fn scan_spectrum(spec: &ScanSpec, exec: Execution) -> Result<SpectrumGrid> {
    spec.validate()?;
    let axis_values = spec.axis.range().values();
    let epsilon = spec.epsilon.values();
    let cols = epsilon.len();
    let cells = map_indexed(axis_values.len() * cols, exec, |k| {
        let (point, drive) = spec.cell(&axis_values, &epsilon, k / cols, k % cols);
        lockin_delta_n(&spec.device, point, &drive, &spec.bath)
    });
    let mut delta_n = Vec::with_capacity(cells.len());
    let mut masked = Vec::new();
    for (k, c) in cells.into_iter().enumerate() {
        match c {
            Ok(v) if v.is_finite() => delta_n.push(v),
            Ok(v) => {
                delta_n.push(f64::NAN);
                masked.push(MaskedCell {
                    row: k / cols,
                    col: k % cols,
                    diagnostic: format!("non-finite signal {v}"),
                });
            }
            Err(e) => {
                delta_n.push(f64::NAN);
                masked.push(MaskedCell {
                    row: k / cols,
                    col: k % cols,
                    diagnostic: e.to_string(),
                });
            }
        }
    }
    Ok(SpectrumGrid {
        spec: *spec,
        axis_values,
        epsilon,
        delta_n,
        masked,
    })
}

/// One fitted resonance line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Field (T) or drive amplitude (μeV) of the row.
    pub axis: f64,
    /// Line center in μeV.
    pub center: f64,
    /// +1 for Δn > 0, −1 for Δn < 0.
    pub sign: i8,
    /// Signed peak value.
    pub height: f64,
    /// Full width at half maximum in μeV.
    pub fwhm: f64,
}

impl Peak {
    /// Signed Lorentzian area `π h w / 2` in μeV.
    pub fn area(&self) -> f64 {
        std::f64::consts::FRAC_PI_2 * self.height * self.fwhm
    }
}

/// Fitted lines sorted by axis value, then center.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeakList {
    pub peaks: Vec<Peak>,
}

impl PeakList {
    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    /// Appends another list and restores the ordering.
    pub fn extend(&mut self, other: PeakList) {
        self.peaks.extend(other.peaks);
        self.peaks
            .sort_by(|a, b| a.axis.total_cmp(&b.axis).then(a.center.total_cmp(&b.center)));
    }
}

/// Decomposes one trace into Lorentzian lines.
pub fn locate_peaks_in_trace(axis: f64, epsilon: &[f64], trace: &[f64], opts: &PeakSearch) -> Result<PeakList> {
    let (x, y): (Vec<f64>, Vec<f64>) = epsilon
        .iter()
        .zip(trace)
        .filter(|(_, v)| v.is_finite())
        .map(|(&e, &v)| (e, v))
        .unzip();
    if x.len() < 8 {
        return Err(Error::InvalidInput(format!(
            "peak search needs at least 8 finite samples, got {}",
            x.len()
        )));
    }
    let lines = find_lorentzians(&x, &y, opts)?;
    let peaks = lines
        .into_iter()
        .map(|l| Peak {
            axis,
            center: l.center,
            sign: if l.height >= 0.0 { 1 } else { -1 },
            height: l.height,
            fwhm: l.fwhm,
        })
        .collect();
    Ok(PeakList { peaks })
}

/// Decomposes grid row `row` into Lorentzian lines.
pub fn locate_peaks(grid: &SpectrumGrid, row: usize) -> Result<PeakList> {
    if row >= grid.rows() {
        return Err(Error::InvalidInput(format!(
            "row {row} outside grid of {} rows",
            grid.rows()
        )));
    }
    locate_peaks_in_trace(
        grid.axis_values[row],
        &grid.epsilon,
        grid.row(row),
        &PeakSearch::default(),
    )
}

/// Time-averaged lock-in signal of an exponentially decaying response,
/// `(1 − e^{−Γτ})/(Γτ)`, equal to 1 at `Γτ = 0`.
///
/// Requires `tau > 0` and `gamma_s ≥ 0`.
pub fn relaxation_decay_signal(gamma_s: f64, tau: f64) -> f64 {
    let x = gamma_s * tau;
    if x == 0.0 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_signal_limits() {
        assert_eq!(relaxation_decay_signal(0.0, 3.0), 1.0);
        assert!((relaxation_decay_signal(1.0, 1.0) - 0.632_120_558_828_557_7).abs() < 1e-15);
        let ln2 = std::f64::consts::LN_2;
        assert!((relaxation_decay_signal(ln2, 1.0) - 0.5 / ln2).abs() < 1e-15);
        assert!((relaxation_decay_signal(1e-12, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_values_hit_end_points() {
        let v = AxisRange::new(-1.0, 2.0, 7).values();
        assert_eq!(v.len(), 7);
        assert_eq!(v[0], -1.0);
        assert_eq!(v[6], 2.0);
        assert!(AxisRange::new(1.0, 1.0, 5).validate("x").is_err());
        assert!(AxisRange::new(0.0, 1.0, 1).validate("x").is_err());
    }

    #[test]
    fn off_resonance_signal_vanishes() {
        let dn = lockin_delta_n(
            &DeviceParams::reference(),
            FieldPoint::new(2.5, 150.0),
            &DriveParams::new(11.0, 1.0),
            &PhononBath::default(),
        )
        .unwrap();
        assert!(dn.abs() < 1e-3, "{dn}");
    }
}

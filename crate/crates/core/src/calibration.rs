//! Post-processing of measured gate-voltage scans: lever-arm conversion,
//! per-row alignment on the ST⁺ reference peak, and the shear from the
//! reference-relative detuning ε* to the detuning ε.
//!
//! Every stage moves a row rigidly, so distances along detuning inside a row
//! are preserved. Rows are re-gridded by linear interpolation onto a common
//! uniform lattice that covers the union of all rows; lattice nodes outside
//! a row's measured range hold NaN.

use crate::constants::{photon_energy, BOHR_MAGNETON_UEV_PER_T};
use crate::error::{Error, Result};
use crate::peaks::{estimate_noise, fit_lorentzians_with_offset, half_max_width, Lorentzian};
use crate::physics::{st_plus_detuning_unchecked, DeviceParams};
use crate::sweep::{map_indexed, Execution};

/// One measured row at fixed field.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub b_ext: f64,
    /// Gate-voltage offsets in mV, strictly increasing.
    pub gate_mv: Vec<f64>,
    pub signal: Vec<f64>,
}

/// Measured scan taken with detuning pulses of amplitude `p_eps_mv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScan {
    pub rows: Vec<RawRow>,
    pub p_eps_mv: f64,
}

impl RawScan {
    /// Checks unique fields, matching lengths and monotone gate axes.
    pub fn validate(&self) -> Result<()> {
        if !self.p_eps_mv.is_finite() {
            return Err(Error::InvalidInput("pulse amplitude must be finite".into()));
        }
        let mut fields: Vec<f64> = self.rows.iter().map(|r| r.b_ext).collect();
        fields.sort_by(f64::total_cmp);
        if fields.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("raw scan rows must have unique fields".into()));
        }
        for r in &self.rows {
            if r.gate_mv.len() != r.signal.len() {
                return Err(Error::InvalidInput(format!(
                    "row at B = {} T has mismatched lengths",
                    r.b_ext
                )));
            }
            if r.gate_mv.len() < 2 || r.gate_mv.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidInput(format!(
                    "row at B = {} T needs at least 2 strictly increasing gate samples",
                    r.b_ext
                )));
            }
        }
        Ok(())
    }
}

/// Gate-voltage to energy conversion factor α in μeV/mV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeverArm {
    pub alpha: f64,
}

impl LeverArm {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("lever arm must be positive, got {alpha}")));
        }
        Ok(Self { alpha })
    }
}

/// Lever arm from the voltage spacing of adjacent multi-photon lines,
/// `α = hν / ΔV`.
pub fn lever_arm_from_sidebands(voltage_spacing_mv: f64, nu: f64) -> Result<LeverArm> {
    if !(voltage_spacing_mv > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sideband spacing must be positive, got {voltage_spacing_mv}"
        )));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidInput(format!(
            "drive frequency must be positive, got {nu}"
        )));
    }
    LeverArm::new(photon_energy(nu) / voltage_spacing_mv)
}

/// Energy axis of a calibrated scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyScale {
    /// Detuning relative to the ST⁺ reference, which sits at `α P_ε`.
    EpsilonStar,
    /// Detuning ε.
    Epsilon,
}

impl EnergyScale {
    pub fn label(self) -> &'static str {
        match self {
            EnergyScale::EpsilonStar => "epsilon_star_ueV",
            EnergyScale::Epsilon => "epsilon_ueV",
        }
    }
}

/// Per-row shift from ε* to ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShearMode {
    /// Shift by `|g| μ_B |B|`.
    PaperFaithful,
    /// Shift by the ST⁺ anticrossing detuning `(E_z² − t_c²)/E_z`.
    Exact,
}

/// What [`align_rows`] does with a row whose reference cannot be found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnMissing {
    Fail,
    Drop,
}

/// One calibrated row.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedRow {
    pub b_ext: f64,
    /// Total rigid shift applied to `α·V` to reach the current axis (μeV).
    pub shift_uev: f64,
    /// Signal on the common axis; NaN outside the measured range.
    pub signal: Vec<f64>,
}

/// Row removed during alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedRow {
    pub b_ext: f64,
    pub reason: String,
}

/// Rows on a common uniform energy axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedScan {
    pub axis: Vec<f64>,
    pub rows: Vec<CalibratedRow>,
    pub scale: EnergyScale,
    pub shear: Option<ShearMode>,
    pub lever: LeverArm,
    pub p_eps_mv: f64,
    pub dropped: Vec<DroppedRow>,
}

impl CalibratedScan {
    /// Grid spacing of the common axis in μeV.
    pub fn spacing(&self) -> f64 {
        self.axis[1] - self.axis[0]
    }

    /// Converts an ε*-scale scan back into drift-free gate units, dropping
    /// NaN padding. Each row is offset by the model position `ε_ST+(B)` so
    /// that aligning the result again reproduces this scan.
    pub fn to_raw(&self, device: &DeviceParams) -> Result<RawScan> {
        if self.scale != EnergyScale::EpsilonStar {
            return Err(Error::InvalidInput(
                "only epsilon-star scans convert back to gate units".into(),
            ));
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let offset = st_plus_detuning_unchecked(device, r.b_ext);
                let (gate_mv, signal) = self
                    .axis
                    .iter()
                    .zip(&r.signal)
                    .filter(|(_, s)| s.is_finite())
                    .map(|(&e, &s)| ((e + offset) / self.lever.alpha, s))
                    .unzip();
                RawRow {
                    b_ext: r.b_ext,
                    gate_mv,
                    signal,
                }
            })
            .collect();
        Ok(RawScan {
            rows,
            p_eps_mv: self.p_eps_mv,
        })
    }
}

/// Expected reference position in `α·V` units and the search half-width.
fn reference_window(b_ext: f64, lever: LeverArm, p_eps_mv: f64, device: &DeviceParams, spacing_uev: f64) -> (f64, f64) {
    let center = st_plus_detuning_unchecked(device, b_ext) + lever.alpha * p_eps_mv;
    (center, (0.25 * center.abs()).max(4.0 * spacing_uev))
}

/// Gate offset (mV) of the ST⁺ reference peak in one row.
///
/// The search is restricted to the model-predicted position
/// `ε_ST+(B) + α P_ε` ± 25 %. The window maximum above the window median
/// must exceed three times the row noise; the center then comes from a
/// single-Lorentzian fit on a constant offset.
pub fn locate_reference_peak(row: &RawRow, lever: LeverArm, p_eps_mv: f64, device: &DeviceParams) -> Result<f64> {
    let n = row.gate_mv.len();
    if n < 2 || row.signal.len() != n {
        return Err(Error::InvalidInput(
            "reference search needs matching gate and signal samples".into(),
        ));
    }
    let spacing = lever.alpha * (row.gate_mv[n - 1] - row.gate_mv[0]) / (n - 1) as f64;
    let (center, half) = reference_window(row.b_ext, lever, p_eps_mv, device, spacing);
    let (x, y): (Vec<f64>, Vec<f64>) = row
        .gate_mv
        .iter()
        .zip(&row.signal)
        .filter(|(v, s)| ((lever.alpha * *v) - center).abs() <= half && s.is_finite())
        .map(|(&v, &s)| (v, s))
        .unzip();
    let missing = || Error::MissingReference { field_t: row.b_ext };
    if x.len() < 4 {
        return Err(missing());
    }
    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    let baseline = sorted[sorted.len() / 2];
    let y: Vec<f64> = y.iter().map(|v| v - baseline).collect();
    let (imax, &peak) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(missing)?;
    let noise = estimate_noise(&row.signal);
    let interior = imax > 0 && imax + 1 < y.len();
    if !interior || !(peak > 0.0) || peak <= 3.0 * noise {
        return Err(missing());
    }
    let initial = [Lorentzian {
        center: x[imax],
        height: peak,
        fwhm: half_max_width(&x, &y, imax),
    }];
    let (lines, _, _) = fit_lorentzians_with_offset(&x, &y, &initial, 0.0)?;
    Ok(lines[0].center)
}

/// Linear interpolation of `(x, y)` at `t`; NaN outside `[x₀, x_last]`.
fn interpolate(x: &[f64], y: &[f64], t: f64) -> f64 {
    let n = x.len();
    let tol = 1e-9 * (x[n - 1] - x[0]).abs().max(1.0);
    if t < x[0] - tol || t > x[n - 1] + tol {
        return f64::NAN;
    }
    let k = x.partition_point(|&v| v <= t).clamp(1, n - 1);
    let (x0, x1) = (x[k - 1], x[k]);
    let w = ((t - x0) / (x1 - x0)).clamp(0.0, 1.0);
    y[k - 1] * (1.0 - w) + y[k] * w
}

/// Uniform lattice `anchor + k·d` covering `[lo, hi]`.
fn lattice(anchor: f64, d: f64, lo: f64, hi: f64) -> Vec<f64> {
    let k0 = ((lo - anchor) / d - 1e-9).ceil() as i64;
    let k1 = ((hi - anchor) / d + 1e-9).floor() as i64;
    (k0..=k1).map(|k| anchor + k as f64 * d).collect()
}

/// Places rigidly shifted rows `(x_k + s_k, y_k)` on a common lattice.
fn regrid(rows: &[(f64, Vec<f64>, Vec<f64>)], anchor: f64, d: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let lo = rows.iter().map(|(s, x, _)| x[0] + s).fold(f64::INFINITY, f64::min);
    let hi = rows
        .iter()
        .map(|(s, x, _)| x[x.len() - 1] + s)
        .fold(f64::NEG_INFINITY, f64::max);
    let axis = lattice(anchor, d, lo, hi);
    let signals = rows
        .iter()
        .map(|(s, x, y)| axis.iter().map(|&e| interpolate(x, y, e - s)).collect())
        .collect();
    (axis, signals)
}

/// Shifts every row so its reference peak sits at `ε* = α P_ε` and
/// re-grids all rows onto a common lattice through `α P_ε`.
pub fn align_rows(
    raw: &RawScan,
    lever: LeverArm,
    device: &DeviceParams,
    on_missing: OnMissing,
    exec: Execution,
) -> Result<CalibratedScan> {
    raw.validate()?;
    let located = map_indexed(raw.rows.len(), exec, |k| {
        locate_reference_peak(&raw.rows[k], lever, raw.p_eps_mv, device)
    });
    let target = lever.alpha * raw.p_eps_mv;
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (row, loc) in raw.rows.iter().zip(located) {
        match loc {
            Ok(v_ref) => {
                let x: Vec<f64> = row.gate_mv.iter().map(|v| lever.alpha * v).collect();
                kept.push((row.b_ext, target - lever.alpha * v_ref, x, row.signal.clone()));
            }
            Err(e) => match on_missing {
                OnMissing::Fail => return Err(e),
                OnMissing::Drop => {
                    log::warn!("dropping row at B = {} T: {e}", row.b_ext);
                    dropped.push(DroppedRow {
                        b_ext: row.b_ext,
                        reason: e.to_string(),
                    });
                }
            },
        }
    }
    if kept.is_empty() {
        return Err(Error::MissingReference {
            field_t: raw.rows.first().map_or(f64::NAN, |r| r.b_ext),
        });
    }
    kept.sort_by(|a, b| a.0.total_cmp(&b.0));
    let d = kept
        .iter()
        .map(|(_, _, x, _)| (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64)
        .fold(f64::INFINITY, f64::min);
    let shifted: Vec<(f64, Vec<f64>, Vec<f64>)> = kept.iter().map(|(_, s, x, y)| (*s, x.clone(), y.clone())).collect();
    let (axis, signals) = regrid(&shifted, target, d);
    let rows = kept
        .iter()
        .zip(signals)
        .map(|((b, s, _, _), signal)| CalibratedRow {
            b_ext: *b,
            shift_uev: *s,
            signal,
        })
        .collect();
    Ok(CalibratedScan {
        axis,
        rows,
        scale: EnergyScale::EpsilonStar,
        shear: None,
        lever,
        p_eps_mv: raw.p_eps_mv,
        dropped,
    })
}

/// Per-row shear `ε − ε*` for a mode.
pub fn shear_offset(device: &DeviceParams, b_ext: f64, mode: ShearMode) -> f64 {
    match mode {
        ShearMode::PaperFaithful => device.g_abs * BOHR_MAGNETON_UEV_PER_T * b_ext.abs(),
        ShearMode::Exact => st_plus_detuning_unchecked(device, b_ext),
    }
}

fn shift_rows(
    cal: &CalibratedScan,
    device: &DeviceParams,
    mode: ShearMode,
    sign: f64,
) -> (Vec<f64>, Vec<CalibratedRow>) {
    let offsets: Vec<f64> = cal
        .rows
        .iter()
        .map(|r| sign * shear_offset(device, r.b_ext, mode))
        .collect();
    let parts: Vec<(f64, Vec<f64>, Vec<f64>)> = cal
        .rows
        .iter()
        .zip(&offsets)
        .map(|(r, &s)| {
            let (x, y): (Vec<f64>, Vec<f64>) = cal
                .axis
                .iter()
                .zip(&r.signal)
                .filter(|(_, v)| v.is_finite())
                .map(|(&e, &v)| (e, v))
                .unzip();
            (s, x, y)
        })
        .collect();
    let (axis, signals) = regrid(&parts, cal.axis[0], cal.spacing());
    let rows = cal
        .rows
        .iter()
        .zip(offsets)
        .zip(signals)
        .map(|((r, s), signal)| CalibratedRow {
            b_ext: r.b_ext,
            shift_uev: r.shift_uev + s,
            signal,
        })
        .collect();
    (axis, rows)
}

/// Shifts every ε*-scale row by its shear offset towards positive
/// detuning. The common lattice keeps its spacing and phase, so
/// [`unshear_to_epsilon_star`] maps back onto the original nodes.
pub fn shear_to_epsilon(cal: &CalibratedScan, device: &DeviceParams, mode: ShearMode) -> Result<CalibratedScan> {
    if cal.scale != EnergyScale::EpsilonStar {
        return Err(Error::InvalidInput("shear expects an epsilon-star scan".into()));
    }
    let (axis, rows) = shift_rows(cal, device, mode, 1.0);
    Ok(CalibratedScan {
        axis,
        rows,
        scale: EnergyScale::Epsilon,
        shear: Some(mode),
        dropped: cal.dropped.clone(),
        ..*cal
    })
}

/// Inverse of [`shear_to_epsilon`].
pub fn unshear_to_epsilon_star(cal: &CalibratedScan, device: &DeviceParams) -> Result<CalibratedScan> {
    let mode = match (cal.scale, cal.shear) {
        (EnergyScale::Epsilon, Some(m)) => m,
        _ => return Err(Error::InvalidInput("inverse shear expects a sheared scan".into())),
    };
    let (axis, rows) = shift_rows(cal, device, mode, -1.0);
    Ok(CalibratedScan {
        axis,
        rows,
        scale: EnergyScale::EpsilonStar,
        shear: None,
        dropped: cal.dropped.clone(),
        ..*cal
    })
}

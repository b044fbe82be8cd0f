//! Seeded synthetic data for round-trip tests and the `synth` subcommand.
//!
//! Every random draw comes from a ChaCha8 stream selected by `(seed,
//! stream)`, so outputs depend only on the seed and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::calibration::{LeverArm, RawRow, RawScan};
use crate::dissipation::PhononBath;
use crate::error::{Error, Result};
use crate::fitting::{
    closed_form_delta_eps_prime, model_delta_eps_plus, model_delta_eps_pm, PeakSeries, Scenario, SeriesKind,
    SeriesPoint,
};
use crate::peaks::Lorentzian;
use crate::physics::{st_plus_detuning_unchecked, DeviceParams, FieldPoint};
use crate::rwa::DriveParams;
use crate::spectra::{lockin_delta_n, relaxation_decay_signal, AxisRange};
use crate::sweep::{map_indexed, Execution};

/// Independent generator for one `(seed, stream)` pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(sigma: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| Error::InvalidInput(format!("noise level {sigma}: {e}")))
}

/// Red-line series `Δε⁺` and/or `Δε⁻` from the forward model plus
/// Gaussian noise of width `sigma` (μeV). Rows carry `sigma` as their
/// uncertainty when it is positive.
pub fn line_distance_series(
    device: &DeviceParams,
    nu: f64,
    fields: &AxisRange,
    kinds: &[SeriesKind],
    scenario: Scenario,
    sigma: f64,
    seed: u64,
) -> Result<PeakSeries> {
    fields.validate("field")?;
    let noise = normal(sigma)?;
    let mut rng = stream_rng(seed, 0);
    let mut points = Vec::new();
    for b in fields.values() {
        for &kind in kinds {
            let clean = match kind {
                SeriesKind::Plus => model_delta_eps_plus(b, nu, device, scenario)?,
                SeriesKind::Minus => model_delta_eps_pm(b, nu, device, scenario)?.minus,
                SeriesKind::Prime => closed_form_delta_eps_prime(b, nu, device)?,
            };
            points.push(SeriesPoint {
                b_ext: b,
                delta_eps: clean + noise.sample(&mut rng),
                kind,
                sigma: (sigma > 0.0).then_some(sigma),
            });
        }
    }
    Ok(PeakSeries::new(nu, points))
}

/// Time-averaged decay signals `(τ, (1 − e^{−Γτ})/(Γτ) + noise)`, clamped to
/// `(0, 1]`.
pub fn relaxation_series(gamma_s: f64, taus: &[f64], sigma: f64, seed: u64) -> Result<Vec<(f64, f64)>> {
    if !(gamma_s >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "relaxation rate must be non-negative, got {gamma_s}"
        )));
    }
    let noise = normal(sigma)?;
    let mut rng = stream_rng(seed, 0);
    taus.iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(Error::InvalidInput(format!("pulse time must be positive, got {t}")));
            }
            let s = relaxation_decay_signal(gamma_s, t) + noise.sample(&mut rng);
            Ok((t, s.clamp(1e-9, 1.0)))
        })
        .collect()
}

/// Recipe for a measured-looking scan with row drifts and a pulse reference.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftedScanSpec {
    pub device: DeviceParams,
    pub drive: DriveParams,
    pub bath: PhononBath,
    pub lever: LeverArm,
    pub p_eps_mv: f64,
    pub fields: Vec<f64>,
    /// Raw energy axis `α·V` before drift (μeV).
    pub energy: AxisRange,
    /// Row offsets are drawn uniformly from `[−max, max]` (μeV).
    pub drift_max_uev: f64,
    pub reference_height: f64,
    pub reference_fwhm_uev: f64,
    /// Multiplies the simulated Δn.
    pub signal_scale: f64,
    pub noise_sigma: f64,
}

/// Synthetic raw scan and the drift applied to each row (μeV).
///
/// Row `k` at raw energy `u = α·V` carries the lock-in signal at detuning
/// `ε = u − drift_k` plus the ST⁺ reference line at
/// `u = ε_ST+(B) + α P_ε + drift_k`.
pub fn drifted_raw_scan(spec: &DriftedScanSpec, seed: u64, exec: Execution) -> Result<(RawScan, Vec<f64>)> {
    spec.energy.validate("energy")?;
    if !(spec.drift_max_uev >= 0.0) {
        return Err(Error::InvalidInput("drift bound must be non-negative".into()));
    }
    let noise = normal(spec.noise_sigma)?;
    let drift_dist = Uniform::new_inclusive(-spec.drift_max_uev, spec.drift_max_uev)
        .map_err(|e| Error::InvalidInput(format!("drift bound: {e}")))?;
    let mut drift_rng = stream_rng(seed, 0);
    let drifts: Vec<f64> = spec.fields.iter().map(|_| drift_dist.sample(&mut drift_rng)).collect();
    let u = spec.energy.values();
    let cols = u.len();
    let cells = map_indexed(spec.fields.len() * cols, exec, |k| {
        let (r, c) = (k / cols, k % cols);
        let point = FieldPoint::new(spec.fields[r], u[c] - drifts[r]);
        lockin_delta_n(&spec.device, point, &spec.drive, &spec.bath)
    });
    let mut rows = Vec::with_capacity(spec.fields.len());
    for (r, &b) in spec.fields.iter().enumerate() {
        let reference = Lorentzian {
            center: st_plus_detuning_unchecked(&spec.device, b) + spec.lever.alpha * spec.p_eps_mv + drifts[r],
            height: spec.reference_height,
            fwhm: spec.reference_fwhm_uev,
        };
        let mut rng = stream_rng(seed, 1 + r as u64);
        let mut signal = Vec::with_capacity(cols);
        for c in 0..cols {
            let dn = cells[r * cols + c].clone()?;
            signal.push(spec.signal_scale * dn + reference.eval(u[c]) + noise.sample(&mut rng));
        }
        rows.push(RawRow {
            b_ext: b,
            gate_mv: u.iter().map(|v| v / spec.lever.alpha).collect(),
            signal,
        });
    }
    Ok((
        RawScan {
            rows,
            p_eps_mv: spec.p_eps_mv,
        },
        drifts,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        use rand::Rng;
        let a: u64 = stream_rng(7, 3).random();
        let b: u64 = stream_rng(7, 3).random();
        let c: u64 = stream_rng(7, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_relaxation_series_is_exact() {
        let s = relaxation_series(0.5, &[1.0, 2.0], 0.0, 1).unwrap();
        assert_eq!(s[0].1, relaxation_decay_signal(0.5, 1.0));
    }
}

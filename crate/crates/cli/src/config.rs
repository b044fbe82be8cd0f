//! Run configuration.
//!
//! A run is described by one TOML file. Top-level keys are `seed` and
//! `threads`; everything else lives in sections:
//!
//! ```toml
//! seed = 7
//!
//! [device]            # g_abs, t_c (μeV), b0 (T) required
//! g_abs = 0.382
//! t_c = 8.7
//! b0 = 0.109
//! t_so_y = 0.435      # optional, default 0
//!
//! [drive]
//! nu = 11.0           # GHz
//! omega = 1.0         # μeV, default 1
//!
//! [levels]
//! b_ext = 1.5
//! eps_min = -60.0
//! eps_max = 120.0
//! points = 361
//!
//! [scan]
//! eps_min = -60.0
//! eps_max = 140.0
//! eps_points = 150
//! [scan.field]        # or [scan.power] with b_ext, omega_min, omega_max, omega_points
//! b_min = 0.5
//! b_max = 2.8
//! b_points = 100
//! ```
//!
//! Further sections: `[bath]`, `[calibration]`, `[fit]`, `[mechanism]` and
//! `[synth.series]`, `[synth.relax]`, `[synth.drift]`. Unknown keys are
//! rejected everywhere. Optional keys take the defaults documented on each
//! field; the resolved file written next to every output lists them all.

use anyhow::{anyhow, bail, Context, Result};
use patspec::calibration::{lever_arm_from_sidebands, LeverArm, OnMissing, ShearMode};
use patspec::fitting::{Scenario, SeriesKind};
use patspec::spectra::{AxisRange, ScanAxis, ScanSpec};
use patspec::{DeviceParams, DriveParams, PhononBath};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed for every random stream.
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; absent or 0 uses every core. Never affects results,
    /// so it is not echoed.
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub device: Option<DeviceSection>,
    #[serde(default)]
    pub bath: BathSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<LevelsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<MechanismSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    pub g_abs: f64,
    pub t_c: f64,
    pub b0: f64,
    #[serde(default)]
    pub t_so_y: f64,
    #[serde(default)]
    pub t_so_z: f64,
    #[serde(default)]
    pub db_x_perp: f64,
    #[serde(default)]
    pub db_y_perp: f64,
    #[serde(default)]
    pub db_par: f64,
}

impl DeviceSection {
    pub fn params(&self) -> DeviceParams {
        DeviceParams::new(self.g_abs, self.t_c, self.b0)
            .with_spin_orbit(self.t_so_y, self.t_so_z)
            .with_gradient(self.db_x_perp, self.db_y_perp, self.db_par)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathSection {
    pub temperature: f64,
    pub coupling_eta: f64,
    pub cutoff_uev: f64,
    pub exponent_p: u32,
    pub dephasing_rate: f64,
}

impl Default for BathSection {
    fn default() -> Self {
        let b = PhononBath::default();
        Self {
            temperature: b.temperature,
            coupling_eta: b.coupling_eta,
            cutoff_uev: b.cutoff_uev,
            exponent_p: b.exponent_p,
            dephasing_rate: b.dephasing_rate,
        }
    }
}

impl BathSection {
    pub fn bath(&self) -> PhononBath {
        PhononBath {
            temperature: self.temperature,
            coupling_eta: self.coupling_eta,
            cutoff_uev: self.cutoff_uev,
            exponent_p: self.exponent_p,
            dephasing_rate: self.dephasing_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub nu: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
}

fn default_omega() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsSection {
    pub b_ext: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    #[serde(default = "default_level_points")]
    pub points: usize,
}

fn default_level_points() -> usize {
    401
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldAxis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerAxis>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FieldAxis {
    pub b_min: f64,
    pub b_max: f64,
    pub b_points: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PowerAxis {
    pub b_ext: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub omega_points: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    /// Pulse amplitude in mV.
    pub p_eps_mv: f64,
    /// Lever arm in μeV/mV; alternatively give `sideband_spacing_mv`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Voltage spacing of adjacent multi-photon lines at `[drive] nu`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sideband_spacing_mv: Option<f64>,
    /// `drop` (default) or `fail`.
    #[serde(default = "default_on_missing")]
    pub on_missing: String,
    /// `none` (default), `paper` or `exact`.
    #[serde(default = "default_shear")]
    pub shear: String,
}

fn default_on_missing() -> String {
    "drop".into()
}

fn default_shear() -> String {
    "none".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// |g| held fixed in the `tcb0` fit; defaults to `[device] g_abs`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_abs: Option<f64>,
    /// `singlet`, `triplet0` or `both` (default) for the remanence fit.
    #[serde(default = "default_scenario")]
    pub scenario: String,
    /// Refuse a |g| fit over a window where the model is curved.
    #[serde(default = "default_true")]
    pub check_linearity: bool,
}

fn default_scenario() -> String {
    "both".into()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSection {
    /// Orbital level spacing Δ in μeV.
    #[serde(default = "default_delta")]
    pub delta_orbital: f64,
    /// Dot radius in nm; derived from Δ when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_nm: Option<f64>,
    #[serde(default = "default_effective_mass")]
    pub effective_mass: f64,
    /// Dot separation in nm.
    #[serde(default = "default_separation")]
    pub a_nm: f64,
    /// Angle of the interdot axis to the crystal axis in rad.
    #[serde(default)]
    pub theta: f64,
    /// Rashba and Dresselhaus weights.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_lambda")]
    pub lambda_so_um: f64,
    #[serde(default = "default_hyperfine")]
    pub a_hf: f64,
    #[serde(default = "default_nuclei")]
    pub n_nuclei: f64,
    /// Field direction (x, y, z) with z along the interdot axis.
    #[serde(default = "default_direction")]
    pub field_direction: [f64; 3],
}

fn default_delta() -> f64 {
    1000.0
}
fn default_effective_mass() -> f64 {
    patspec::mechanisms::GAAS_EFFECTIVE_MASS
}
fn default_separation() -> f64 {
    75.0
}
fn default_alpha() -> f64 {
    1.0
}
fn default_lambda() -> f64 {
    10.0
}
fn default_hyperfine() -> f64 {
    100.0
}
fn default_nuclei() -> f64 {
    4e6
}
fn default_direction() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<SynthSeries>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relax: Option<SynthRelax>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<SynthDrift>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSeries {
    /// Drive frequencies in GHz, one series each.
    pub frequencies: Vec<f64>,
    pub b_min: f64,
    pub b_max: f64,
    pub b_points: usize,
    /// Any of `plus`, `minus`, `prime`.
    pub kinds: Vec<String>,
    /// `singlet` (default) or `triplet0`.
    #[serde(default = "default_singlet")]
    pub scenario: String,
    /// Gaussian noise in μeV.
    #[serde(default)]
    pub sigma: f64,
}

fn default_singlet() -> String {
    "singlet".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SynthRelax {
    /// Γ_s in 1/ns.
    pub gamma_s: f64,
    /// Pulse periods in ns.
    pub taus: Vec<f64>,
    #[serde(default)]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SynthDrift {
    pub b_min: f64,
    pub b_max: f64,
    pub b_points: usize,
    /// Raw energy axis `α·V` in μeV.
    pub u_min: f64,
    pub u_max: f64,
    pub u_points: usize,
    pub drift_max: f64,
    #[serde(default = "default_reference_height")]
    pub reference_height: f64,
    #[serde(default = "default_reference_fwhm")]
    pub reference_fwhm: f64,
    #[serde(default = "default_scale")]
    pub signal_scale: f64,
    #[serde(default)]
    pub noise_sigma: f64,
}

fn default_reference_height() -> f64 {
    0.1
}
fn default_reference_fwhm() -> f64 {
    3.0
}
fn default_scale() -> f64 {
    1.0
}

fn need<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T> {
    section
        .as_ref()
        .ok_or_else(|| anyhow!("missing required section [{name}]"))
}

fn finite_range(name: &str, lo: f64, hi: f64, n: usize) -> Result<AxisRange> {
    let r = AxisRange::new(lo, hi, n);
    r.validate(name)?;
    Ok(r)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("invalid configuration")?;
        cfg.bath.bath().validate()?;
        if let Some(d) = &cfg.device {
            d.params().validate()?;
        }
        if let Some(d) = &cfg.drive {
            DriveParams::new(d.nu, d.omega).validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    /// Resolved configuration as TOML.
    pub fn echo(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn device(&self) -> Result<DeviceParams> {
        Ok(need(&self.device, "device")?.params())
    }

    pub fn drive(&self) -> Result<DriveParams> {
        let d = need(&self.drive, "drive")?;
        Ok(DriveParams::new(d.nu, d.omega))
    }

    pub fn levels(&self) -> Result<&LevelsSection> {
        need(&self.levels, "levels")
    }

    pub fn scan_spec(&self) -> Result<ScanSpec> {
        let s = need(&self.scan, "scan")?;
        let axis = match (&s.field, &s.power) {
            (Some(f), None) => ScanAxis::Field(finite_range("field", f.b_min, f.b_max, f.b_points)?),
            (None, Some(p)) => ScanAxis::Power {
                b_ext: p.b_ext,
                omega: finite_range("drive amplitude", p.omega_min, p.omega_max, p.omega_points)?,
            },
            _ => bail!("[scan] needs exactly one of [scan.field] or [scan.power]"),
        };
        let spec = ScanSpec {
            epsilon: finite_range("detuning", s.eps_min, s.eps_max, s.eps_points)?,
            axis,
            drive: self.drive()?,
            bath: self.bath.bath(),
            device: self.device()?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn calibration(&self) -> Result<&CalibrationSection> {
        need(&self.calibration, "calibration")
    }

    pub fn lever_arm(&self) -> Result<LeverArm> {
        let c = self.calibration()?;
        match (c.alpha, c.sideband_spacing_mv) {
            (Some(a), None) => Ok(LeverArm::new(a)?),
            (None, Some(dv)) => Ok(lever_arm_from_sidebands(dv, self.drive()?.nu)?),
            _ => bail!("[calibration] needs exactly one of alpha or sideband_spacing_mv"),
        }
    }

    pub fn on_missing(&self) -> Result<OnMissing> {
        match self.calibration()?.on_missing.as_str() {
            "drop" => Ok(OnMissing::Drop),
            "fail" => Ok(OnMissing::Fail),
            other => bail!("calibration.on_missing must be drop or fail, got '{other}'"),
        }
    }

    pub fn fit(&self) -> FitSection {
        self.fit.clone().unwrap_or(FitSection {
            g_abs: None,
            scenario: default_scenario(),
            check_linearity: true,
        })
    }

    pub fn mechanism(&self) -> Result<&MechanismSection> {
        need(&self.mechanism, "mechanism")
    }

    pub fn synth(&self) -> Result<&SynthSection> {
        need(&self.synth, "synth")
    }
}

/// Shear selector: `none`, `paper` or `exact`.
pub fn parse_shear(s: &str) -> Result<Option<ShearMode>> {
    match s {
        "none" => Ok(None),
        "paper" => Ok(Some(ShearMode::PaperFaithful)),
        "exact" => Ok(Some(ShearMode::Exact)),
        other => bail!("shear mode must be none, paper or exact, got '{other}'"),
    }
}

/// Scenario selector: `singlet`, `triplet0`, or `both`.
pub fn parse_scenarios(s: &str) -> Result<Vec<Scenario>> {
    match s {
        "singlet" => Ok(vec![Scenario::Singlet]),
        "triplet0" => Ok(vec![Scenario::Triplet0]),
        "both" => Ok(vec![Scenario::Singlet, Scenario::Triplet0]),
        other => bail!("scenario must be singlet, triplet0 or both, got '{other}'"),
    }
}

pub fn parse_kinds(kinds: &[String]) -> Result<Vec<SeriesKind>> {
    if kinds.is_empty() {
        bail!("synth.series.kinds must not be empty");
    }
    kinds.iter().map(|k| Ok(SeriesKind::parse(k)?)).collect()
}

//! Single-electron spin-flip tunneling: spin-orbit and hyperfine matrix
//! elements between the dots and their ratio.
//!
//! Lengths in nm except the spin-orbit length (μm); energies in μeV.

use crate::error::{Error, Result};

/// `ħ²/m_e` in μeV·nm².
pub const HBAR2_OVER_ME_UEV_NM2: f64 = 76_199.642_229_719_23;

/// GaAs conduction-band effective mass in units of `m_e`.
pub const GAAS_EFFECTIVE_MASS: f64 = 0.067;

/// Double-dot geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DotGeometry {
    /// Single-dot wavefunction size σ (nm).
    pub sigma_nm: f64,
    /// Interdot distance a (nm).
    pub a_nm: f64,
    /// Angle θ between the interdot axis and the spin-orbit frame (rad).
    pub theta: f64,
    /// Single-dot level spacing Δ (μeV).
    pub delta_orbital: f64,
}

impl DotGeometry {
    /// Geometry with `Δ = ħ²/(m* σ²)` for effective mass `m_eff` (units of `m_e`).
    pub fn from_sigma(sigma_nm: f64, a_nm: f64, theta: f64, m_eff: f64) -> Result<Self> {
        if !(m_eff > 0.0) {
            return Err(Error::InvalidInput(format!(
                "effective mass must be positive, got {m_eff}"
            )));
        }
        if !(sigma_nm > 0.0) {
            return Err(Error::InvalidInput(format!(
                "dot size must be positive, got {sigma_nm}"
            )));
        }
        let g = Self {
            sigma_nm,
            a_nm,
            theta,
            delta_orbital: HBAR2_OVER_ME_UEV_NM2 / (m_eff * sigma_nm * sigma_nm),
        };
        g.validate()?;
        Ok(g)
    }

    /// Dot size `σ = ħ/√(m* Δ)` for a level spacing Δ.
    pub fn sigma_for_spacing(delta_orbital: f64, m_eff: f64) -> f64 {
        (HBAR2_OVER_ME_UEV_NM2 / (m_eff * delta_orbital)).sqrt()
    }

    /// Checks σ > 0, a ≥ 0 and Δ > 0.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_nm > 0.0 && self.sigma_nm.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "dot size must be positive, got {}",
                self.sigma_nm
            )));
        }
        if !(self.a_nm >= 0.0 && self.a_nm.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "interdot distance must be non-negative, got {}",
                self.a_nm
            )));
        }
        if !(self.delta_orbital > 0.0 && self.delta_orbital.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "orbital spacing must be positive, got {}",
                self.delta_orbital
            )));
        }
        Ok(())
    }

    /// Overlap factor `exp(−a²/8σ²)`.
    pub fn overlap(&self) -> f64 {
        (-self.a_nm * self.a_nm / (8.0 * self.sigma_nm * self.sigma_nm)).exp()
    }
}

/// Relative Rashba and Dresselhaus weights and the spin-orbit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoCouplingParams {
    pub alpha: f64,
    pub beta: f64,
    /// Spin-orbit length λ_SO (μm).
    pub lambda_so_um: f64,
}

impl SoCouplingParams {
    /// Normalizes `(α, β)` to `α² + β² = 1`.
    pub fn new(alpha: f64, beta: f64, lambda_so_um: f64) -> Result<Self> {
        let norm = alpha.hypot(beta);
        if !(norm > 0.0) {
            return Err(Error::InvalidInput(
                "Rashba and Dresselhaus weights cannot both vanish".into(),
            ));
        }
        if !(lambda_so_um > 0.0 && lambda_so_um.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "spin-orbit length must be positive, got {lambda_so_um}"
            )));
        }
        Ok(Self {
            alpha: alpha / norm,
            beta: beta / norm,
            lambda_so_um,
        })
    }

    fn lambda_nm(&self) -> f64 {
        1e3 * self.lambda_so_um
    }
}

/// Hyperfine coupling strength and nuclei per dot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperfineParams {
    pub a_uev: f64,
    pub n_nuclei: f64,
}

impl HyperfineParams {
    pub fn new(a_uev: f64, n_nuclei: f64) -> Result<Self> {
        if !(a_uev > 0.0 && a_uev.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "hyperfine coupling must be positive, got {a_uev}"
            )));
        }
        if !(n_nuclei >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "nuclei count must be at least 1, got {n_nuclei}"
            )));
        }
        Ok(Self { a_uev, n_nuclei })
    }

    /// Single-dot rms Overhauser energy `A/√N`.
    pub fn single_dot_rms(&self) -> f64 {
        self.a_uev / self.n_nuclei.sqrt()
    }
}

/// Spin-orbit vector `n = (n_z, n_y)` in the frame whose z axis is the
/// interdot axis:
/// `n_z = −cos θ [(α−β) cos θ + (α+β) sin θ]`,
/// `n_y = −sin θ [(β−α) sin θ + (α+β) cos θ]`.
pub fn so_direction_vector(theta: f64, alpha: f64, beta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let nz = -c * ((alpha - beta) * c + (alpha + beta) * s);
    let ny = -s * ((beta - alpha) * s + (alpha + beta) * c);
    (nz, ny)
}

/// `|t_SO| = Δ (a/4λ_SO) exp(−a²/8σ²) |n|`.
pub fn t_so_magnitude(geom: &DotGeometry, so: &SoCouplingParams) -> f64 {
    let (nz, ny) = so_direction_vector(geom.theta, so.alpha, so.beta);
    geom.delta_orbital * (geom.a_nm / (4.0 * so.lambda_nm())) * geom.overlap() * nz.hypot(ny)
}

/// Interdot hyperfine matrix element `(A/√N) exp(−a²/8σ²)`.
pub fn t_nuc_rms(geom: &DotGeometry, hf: &HyperfineParams) -> f64 {
    hf.single_dot_rms() * geom.overlap()
}

/// Angular factor `3|n × B|/(2|B|)` for a field direction `(b_x, b_y, b_z)`
/// and the spin-orbit vector `(n_z, n_y)` from [`so_direction_vector`].
pub fn field_angle_factor(n: (f64, f64), b_dir: (f64, f64, f64)) -> Result<f64> {
    let (nz, ny) = n;
    let (bx, by, bz) = b_dir;
    let bnorm = (bx * bx + by * by + bz * bz).sqrt();
    if !(bnorm > 0.0) {
        return Err(Error::InvalidInput("field direction must be non-zero".into()));
    }
    let cx = ny * bz - nz * by;
    let cy = nz * bx;
    let cz = -ny * bx;
    Ok(1.5 * (cx * cx + cy * cy + cz * cz).sqrt() / bnorm)
}

/// `|t_SO|/|t_nuc| = (Δ/(A/√N)) · f · (a/4λ_SO)` with the angular factor
/// `f ∈ [0, 3/2]`. The overlap factors of both elements cancel.
pub fn matrix_element_ratio(
    geom: &DotGeometry,
    so: &SoCouplingParams,
    hf: &HyperfineParams,
    field_angle_factor: f64,
) -> Result<f64> {
    geom.validate()?;
    if !(0.0..=1.5).contains(&field_angle_factor) {
        return Err(Error::InvalidInput(format!(
            "field angle factor must lie in [0, 1.5], got {field_angle_factor}"
        )));
    }
    Ok(geom.delta_orbital / hf.single_dot_rms() * field_angle_factor * geom.a_nm / (4.0 * so.lambda_nm()))
}

/// Main-text rate estimate and its relation to the element ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct MainTextRatio {
    /// `(E₀√N/4A)(d/λ_SO)`.
    pub expression: f64,
    /// Square of the expression.
    pub square: f64,
    pub note: &'static str,
}

/// Evaluates `(E₀√N/4A)(d/λ_SO)` and its square.
///
/// The expression is a ratio of matrix elements; a ratio of rates goes with
/// its square. Both are returned.
pub fn rate_ratio_main_text(e0_uev: f64, hf: &HyperfineParams, d_nm: f64, lambda_so_um: f64) -> Result<MainTextRatio> {
    if !(lambda_so_um > 0.0) {
        return Err(Error::InvalidInput(format!(
            "spin-orbit length must be positive, got {lambda_so_um}"
        )));
    }
    let expression = e0_uev * hf.n_nuclei.sqrt() / (4.0 * hf.a_uev) * d_nm / (1e3 * lambda_so_um);
    Ok(MainTextRatio {
        expression,
        square: expression * expression,
        note: "expression has the form of a matrix-element ratio; its square is the corresponding rate ratio",
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_vector_special_angles() {
        let (nz, ny) = so_direction_vector(0.0, 0.8, 0.6);
        assert!((nz + 0.2).abs() < 1e-15 && ny == 0.0);
        let (nz, ny) = so_direction_vector(std::f64::consts::FRAC_PI_2, 0.8, 0.6);
        assert!(nz.abs() < 1e-15 && (ny - 0.2).abs() < 1e-15);
    }

    #[test]
    fn reference_spacing_size() {
        let s = DotGeometry::sigma_for_spacing(1000.0, GAAS_EFFECTIVE_MASS);
        assert!((s - 33.72).abs() < 0.01, "{s}");
    }

    #[test]
    fn angle_factor_vanishes_parallel() {
        assert_eq!(field_angle_factor((0.6, 0.8), (0.0, 0.8, 0.6)).unwrap(), 0.0);
        let f = field_angle_factor((1.0, 0.0), (1.0, 0.0, 0.0)).unwrap();
        assert!((f - 1.5).abs() < 1e-15);
    }
}

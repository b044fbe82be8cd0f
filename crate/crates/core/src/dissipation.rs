//! Phonon-induced relaxation, the Lindblad generator in the rotating frame,
//! and its stationary state.
//!
//! Density matrices are vectorized column by column: element `(r, c)` sits
//! at index `r + 5c`.

use nalgebra::{Matrix5, SMatrix, SVector};

use crate::constants::{BOLTZMANN_UEV_PER_K, HBAR_UEV_NS, PLANCK_UEV_PER_GHZ};
use crate::error::{Error, Result};
use crate::physics::{EigenSystem, C64};
use crate::rwa::RotatingFrameModel;

/// Vectorized 5×5 operator dimension.
pub const DIM: usize = 25;

/// 25×25 complex matrix acting on vectorized density matrices.
pub type SuperMatrix = SMatrix<C64, DIM, DIM>;

const KERNEL_RTOL: f64 = 1e-13;

/// Phonon bath and phenomenological dephasing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhononBath {
    /// Temperature in K.
    pub temperature: f64,
    /// Rate prefactor η in 1/ns.
    pub coupling_eta: f64,
    /// Spectral cutoff energy in μeV.
    pub cutoff_uev: f64,
    /// Low-energy power law of the spectral density.
    pub exponent_p: u32,
    /// Pure dephasing rate on the S(0,2) population in 1/ns.
    pub dephasing_rate: f64,
}

impl Default for PhononBath {
    /// 100 mK, cutoff 80 GHz·h, cubic spectral density, a floor linewidth of
    /// 1 GHz·h for full-contrast charge transitions, and η calibrated by
    /// [`calibrated_coupling`].
    fn default() -> Self {
        let cutoff = 80.0 * PLANCK_UEV_PER_GHZ;
        let p = 3;
        Self {
            temperature: 0.1,
            coupling_eta: calibrated_coupling(0.01, 45.0, 8.7, 100.0, cutoff, p),
            cutoff_uev: cutoff,
            exponent_p: p,
            dephasing_rate: 2.0 * std::f64::consts::PI,
        }
    }
}

impl PhononBath {
    /// Checks the type invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidInput("temperature must be non-negative".into()));
        }
        if !(self.coupling_eta >= 0.0 && self.coupling_eta.is_finite()) {
            return Err(Error::InvalidInput("coupling_eta must be non-negative".into()));
        }
        if !(self.cutoff_uev > 0.0 && self.cutoff_uev.is_finite()) {
            return Err(Error::InvalidInput("cutoff_uev must be positive".into()));
        }
        if !(self.dephasing_rate >= 0.0 && self.dephasing_rate.is_finite()) {
            return Err(Error::InvalidInput("dephasing_rate must be non-negative".into()));
        }
        Ok(())
    }

    /// Copy without phonon coupling.
    pub fn without_relaxation(self) -> Self {
        Self {
            coupling_eta: 0.0,
            ..self
        }
    }
}

/// Coupling η that yields `rate` (1/ns) for a singlet-to-singlet transition
/// of energy `splitting` (μeV) whose dipole weight is evaluated at detuning
/// `epsilon` for tunnel coupling `t_c`: `|D|² = t_c²/(ε² + 4t_c²)`.
pub fn calibrated_coupling(rate: f64, splitting: f64, t_c: f64, epsilon: f64, cutoff: f64, p: u32) -> f64 {
    let d2 = t_c * t_c / (epsilon * epsilon + 4.0 * t_c * t_c);
    rate / (d2 * spectral_shape(splitting, cutoff, p))
}

fn spectral_shape(omega: f64, cutoff: f64, p: u32) -> f64 {
    let x = omega / cutoff;
    x.powi(p as i32) * (-x * x).exp()
}

/// Spectral density `J(ω) = (ω/ω_c)^p exp(−(ω/ω_c)²)`.
pub fn spectral_density(omega_uev: f64, bath: &PhononBath) -> Result<f64> {
    if omega_uev < 0.0 || omega_uev.is_nan() {
        return Err(Error::Domain(format!(
            "spectral density needs omega >= 0, got {omega_uev}"
        )));
    }
    Ok(spectral_shape(omega_uev, bath.cutoff_uev, bath.exponent_p))
}

/// Bose occupation at energy `omega` (μeV) and temperature `t` (K).
pub fn bose_occupation(omega: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    1.0 / (omega / (BOLTZMANN_UEV_PER_K * t)).exp_m1()
}

/// Golden-rule rates between eigenstates plus dephasing data.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    /// `gamma[i][j]` is the rate from eigenstate `j` to eigenstate `i` (1/ns).
    pub gamma: [[f64; 5]; 5],
    /// Pure dephasing rate (1/ns).
    pub dephasing_rate: f64,
    /// Diagonal S(0,2) weights `⟨k|D|k⟩` entering the dephasing operator.
    pub dephasing_weights: [f64; 5],
}

/// Dipole matrix `⟨i|D|j⟩ = ⟨i|S02⟩⟨S02|j⟩` in the eigenbasis.
pub fn dipole_matrix(eig: &EigenSystem) -> Matrix5<C64> {
    Matrix5::from_fn(|i, j| eig.s02_amplitude(i).conj() * eig.s02_amplitude(j))
}

/// Golden-rule rates `η |D_ij|² J(ΔE) (n_B + 1)` downward and
/// `η |D_ij|² J(ΔE) n_B` upward, from lab-frame energy differences.
pub fn transition_rates(eig: &EigenSystem, bath: &PhononBath) -> RateMatrix {
    let w: [f64; 5] = std::array::from_fn(|k| eig.s02_amplitude(k).norm_sqr());
    let mut gamma = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            if i == j {
                continue;
            }
            let de = eig.energies[j] - eig.energies[i];
            let omega = de.abs();
            if omega == 0.0 || bath.coupling_eta == 0.0 {
                continue;
            }
            let base = bath.coupling_eta * w[i] * w[j] * spectral_shape(omega, bath.cutoff_uev, bath.exponent_p);
            let n = bose_occupation(omega, bath.temperature);
            gamma[i][j] = if de > 0.0 { base * (n + 1.0) } else { base * n };
        }
    }
    RateMatrix {
        gamma,
        dephasing_rate: bath.dephasing_rate,
        dephasing_weights: w,
    }
}

/// Generator of the rotating-frame master equation on vectorized ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    pub generator: SuperMatrix,
}

/// Vector index of density-matrix element `(r, c)`.
#[inline]
pub fn vec_index(r: usize, c: usize) -> usize {
    r + 5 * c
}

/// Builds `−(i/ħ)[H_eff + V, ρ] + Σ γ_ij D[|i⟩⟨j|]ρ + γ_φ D[diag(w)]ρ`.
pub fn build_superoperator(model: &RotatingFrameModel, rates: &RateMatrix) -> Superoperator {
    let h = model.h_eff + model.v_drive;
    let mut l = SuperMatrix::zeros();
    let mi = C64::new(0.0, -1.0 / HBAR_UEV_NS);

    for r in 0..5 {
        for c in 0..5 {
            let row = vec_index(r, c);
            for k in 0..5 {
                l[(row, vec_index(k, c))] += mi * h[(r, k)];
                l[(row, vec_index(r, k))] -= mi * h[(k, c)];
            }
        }
    }

    for i in 0..5 {
        for j in 0..5 {
            let g = rates.gamma[i][j];
            if g == 0.0 {
                continue;
            }
            l[(vec_index(i, i), vec_index(j, j))] += C64::new(g, 0.0);
            for k in 0..5 {
                l[(vec_index(j, k), vec_index(j, k))] -= C64::new(g / 2.0, 0.0);
                l[(vec_index(k, j), vec_index(k, j))] -= C64::new(g / 2.0, 0.0);
            }
        }
    }

    let gp = rates.dephasing_rate;
    if gp != 0.0 {
        let w = &rates.dephasing_weights;
        for r in 0..5 {
            for c in 0..5 {
                let d = w[r] - w[c];
                l[(vec_index(r, c), vec_index(r, c))] -= C64::new(gp * d * d / 2.0, 0.0);
            }
        }
    }
    Superoperator { generator: l }
}

/// 5×5 density matrix in the eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub rho: Matrix5<C64>,
}

impl DensityMatrix {
    /// Reassembles a density matrix from its column-stacked vector.
    pub fn from_vector(v: &SVector<C64, DIM>) -> Self {
        Self {
            rho: Matrix5::from_fn(|r, c| v[vec_index(r, c)]),
        }
    }

    /// Column-stacked vector form.
    pub fn to_vector(&self) -> SVector<C64, DIM> {
        SVector::from_fn(|k, _| self.rho[(k % 5, k / 5)])
    }

    /// Complex trace.
    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    /// Diagonal populations.
    pub fn populations(&self) -> [f64; 5] {
        std::array::from_fn(|k| self.rho[(k, k)].re)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Frobenius norm of ρ − ρ†.
    pub fn hermiticity_defect(&self) -> f64 {
        (self.rho - self.rho.adjoint()).norm()
    }
}

/// Trace functional as a vector: `vec(I)`.
pub fn trace_vector() -> SVector<C64, DIM> {
    SVector::from_fn(|k, _| {
        if k % 5 == k / 5 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Dimension of the numerical kernel of the generator.
pub fn kernel_dimension(superop: &Superoperator) -> usize {
    let sv = superop.generator.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return DIM;
    }
    sv.iter().filter(|&&s| s <= KERNEL_RTOL * max).count()
}

/// Stationary state from the bordered system `[[L, b], [bᵀ, 0]]·[ρ; λ] = [0; 1]`
/// with `b = vec(I)`.
pub fn steady_state(superop: &Superoperator) -> Result<DensityMatrix> {
    match kernel_dimension(superop) {
        0 => return Err(Error::NoSteadyState),
        1 => {}
        d => return Err(Error::Multiplicity { dimension: d }),
    }
    let b = trace_vector();
    let mut m = SMatrix::<C64, 26, 26>::zeros();
    m.fixed_view_mut::<DIM, DIM>(0, 0).copy_from(&superop.generator);
    for k in 0..DIM {
        m[(k, DIM)] = b[k];
        m[(DIM, k)] = b[k];
    }
    let mut rhs = SVector::<C64, 26>::zeros();
    rhs[DIM] = C64::new(1.0, 0.0);
    let x = m.lu().solve(&rhs).ok_or(Error::NoSteadyState)?;
    let v: SVector<C64, DIM> = x.fixed_rows::<DIM>(0).into_owned();
    let mut dm = DensityMatrix::from_vector(&v);
    dm.rho = (dm.rho + dm.rho.adjoint()) * C64::new(0.5, 0.0);
    let tr = dm.trace().re;
    dm.rho /= C64::new(tr, 0.0);
    Ok(dm)
}

/// Thermal state with populations `exp(−E_k/k_BT)/Z` in the eigenbasis.
/// At zero temperature the weight is shared equally by degenerate ground states.
pub fn gibbs_state(energies: &[f64; 5], temperature: f64) -> DensityMatrix {
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: [f64; 5] = if temperature > 0.0 {
        std::array::from_fn(|k| (-(energies[k] - e0) / (BOLTZMANN_UEV_PER_K * temperature)).exp())
    } else {
        std::array::from_fn(|k| if energies[k] - e0 <= 1e-12 { 1.0 } else { 0.0 })
    };
    let z: f64 = weights.iter().sum();
    DensityMatrix {
        rho: Matrix5::from_fn(|r, c| {
            if r == c {
                C64::new(weights[r] / z, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }),
    }
}

/// Dense propagation `exp(L t) vec(ρ₀)`.
pub fn propagate(superop: &Superoperator, rho0: &DensityMatrix, t_ns: f64) -> DensityMatrix {
    let p = (superop.generator * C64::new(t_ns, 0.0)).exp();
    DensityMatrix::from_vector(&(p * rho0.to_vector()))
}

/// Long-time limit of dense propagation from `rho0`.
///
/// Starts from `exp(L τ)` with `τ = 1/‖L‖` and squares the propagator until
/// it stops changing, restoring trace preservation after every squaring.
pub fn asymptotic_state(superop: &Superoperator, rho0: &DensityMatrix) -> DensityMatrix {
    let norm = superop.generator.norm().max(1e-300);
    let mut p = (superop.generator * C64::new(1.0 / norm, 0.0)).exp();
    let b = trace_vector();
    let bt = b.transpose();
    for _ in 0..200 {
        let mut next = p * p;
        let defect = bt - bt * next;
        next += b * defect * C64::new(1.0 / 5.0, 0.0);
        let change = (next - p).norm();
        p = next;
        if change < 1e-15 {
            break;
        }
    }
    DensityMatrix::from_vector(&(p * rho0.to_vector()))
}

//! Five-level two-electron Hamiltonian, its spectral decomposition and
//! closed-form level-position helpers.
//!
//! The ordered basis is `(T⁻(1,1), ↓↑, ↑↓, T⁺(1,1), S(0,2))`. Positive
//! detuning ε lowers S(0,2), so at large ε the ground state is the doubly
//! occupied singlet.

use nalgebra::{Complex, Matrix5, SymmetricEigen, Vector5};

use crate::constants::{photon_energy, zeeman_energy, BOHR_MAGNETON_UEV_PER_T};
use crate::error::{Error, Result};

/// Complex scalar used for all matrices.
pub type C64 = Complex<f64>;

/// Index of T⁻(1,1) in the basis.
pub const T_MINUS: usize = 0;
/// Index of |↓↑⟩ in the basis.
pub const DOWN_UP: usize = 1;
/// Index of |↑↓⟩ in the basis.
pub const UP_DOWN: usize = 2;
/// Index of T⁺(1,1) in the basis.
pub const T_PLUS: usize = 3;
/// Index of S(0,2) in the basis.
pub const S02: usize = 4;

const HERMITIAN_TOL: f64 = 1e-12;

/// Static double-dot parameters. Energies in μeV, fields in T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceParams {
    /// Magnitude of the effective electron g-factor.
    pub g_abs: f64,
    /// Spin-conserving tunnel coupling.
    pub t_c: f64,
    /// Spin-orbit tunnel coupling along y.
    pub t_so_y: f64,
    /// Spin-orbit tunnel coupling along z.
    pub t_so_z: f64,
    /// Micromagnet field added to the external field.
    pub b0: f64,
    /// Inter-dot perpendicular field difference, x component.
    pub db_x_perp: f64,
    /// Inter-dot perpendicular field difference, y component.
    pub db_y_perp: f64,
    /// Inter-dot parallel field difference.
    pub db_par: f64,
}

impl DeviceParams {
    /// Device with the given |g|, t_c and b0 and no spin-orbit or gradient terms.
    pub fn new(g_abs: f64, t_c: f64, b0: f64) -> Self {
        Self {
            g_abs,
            t_c,
            t_so_y: 0.0,
            t_so_z: 0.0,
            b0,
            db_x_perp: 0.0,
            db_y_perp: 0.0,
            db_par: 0.0,
        }
    }

    /// Reference device: |g| = 0.382, t_c = 8.7 μeV, b0 = 109 mT, spin-orbit
    /// coupling at 5% of t_c along y and a ±6 mT micromagnet gradient.
    pub fn reference() -> Self {
        let t_c = 8.7;
        Self {
            g_abs: 0.382,
            t_c,
            t_so_y: 0.05 * t_c,
            t_so_z: 0.0,
            b0: 0.109,
            db_x_perp: -0.006,
            db_y_perp: 0.0,
            db_par: 0.006,
        }
    }

    /// Copy with the spin-orbit couplings replaced.
    pub fn with_spin_orbit(mut self, t_so_y: f64, t_so_z: f64) -> Self {
        self.t_so_y = t_so_y;
        self.t_so_z = t_so_z;
        self
    }

    /// Copy with the field-gradient components replaced.
    pub fn with_gradient(mut self, db_x_perp: f64, db_y_perp: f64, db_par: f64) -> Self {
        self.db_x_perp = db_x_perp;
        self.db_y_perp = db_y_perp;
        self.db_par = db_par;
        self
    }

    /// Checks the type invariants.
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.g_abs,
            self.t_c,
            self.t_so_y,
            self.t_so_z,
            self.b0,
            self.db_x_perp,
            self.db_y_perp,
            self.db_par,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("device parameters must be finite".into()));
        }
        if self.g_abs <= 0.0 {
            return Err(Error::InvalidInput("g_abs must be positive".into()));
        }
        if self.t_c < 0.0 {
            return Err(Error::InvalidInput("t_c must be non-negative".into()));
        }
        Ok(())
    }

    /// Zeeman energy E_z = |g| μ_B (B + b0) in μeV.
    pub fn zeeman(&self, b_ext: f64) -> f64 {
        zeeman_energy(self.g_abs, b_ext + self.b0)
    }
}

/// Operating point: external in-plane field (T) and detuning (μeV).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint {
    pub b_ext: f64,
    pub epsilon: f64,
}

impl FieldPoint {
    pub fn new(b_ext: f64, epsilon: f64) -> Self {
        Self { b_ext, epsilon }
    }
}

/// Hermitian 5×5 energy matrix in μeV.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    pub matrix: Matrix5<C64>,
}

impl Hamiltonian {
    /// Wraps an arbitrary matrix, e.g. for testing the eigensolver.
    pub fn from_matrix(matrix: Matrix5<C64>) -> Self {
        Self { matrix }
    }

    /// Frobenius norm of H − H†.
    pub fn hermiticity_defect(&self) -> f64 {
        (self.matrix - self.matrix.adjoint()).norm()
    }
}

/// Spin/charge character labels used for state classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Character {
    S02,
    S11,
    TMinus,
    T0,
    TPlus,
}

impl Character {
    /// All labels in the order used by [`EigenSystem::character`].
    pub const ALL: [Character; 5] = [
        Character::S02,
        Character::S11,
        Character::TMinus,
        Character::T0,
        Character::TPlus,
    ];

    /// Short label used in CSV output.
    pub fn label(self) -> &'static str {
        match self {
            Character::S02 => "S02",
            Character::S11 => "S11",
            Character::TMinus => "Tm",
            Character::T0 => "T0",
            Character::TPlus => "Tp",
        }
    }

    /// Position of this label inside a character-weight array.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Reference vector of this character in the ordered basis.
    pub fn vector(self) -> Vector5<C64> {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = Vector5::<C64>::zeros();
        match self {
            Character::S02 => v[S02] = C64::new(1.0, 0.0),
            Character::S11 => {
                v[UP_DOWN] = C64::new(r, 0.0);
                v[DOWN_UP] = C64::new(-r, 0.0);
            }
            Character::TMinus => v[T_MINUS] = C64::new(1.0, 0.0),
            Character::T0 => {
                v[UP_DOWN] = C64::new(r, 0.0);
                v[DOWN_UP] = C64::new(r, 0.0);
            }
            Character::TPlus => v[T_PLUS] = C64::new(1.0, 0.0),
        }
        v
    }
}

/// Spectral decomposition with ascending energies.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    /// Energies in ascending order (μeV).
    pub energies: [f64; 5],
    /// Column `k` is the eigenvector of `energies[k]`.
    pub states: Matrix5<C64>,
    /// `character[k][c]` is the weight of state `k` on `Character::ALL[c]`.
    pub character: [[f64; 5]; 5],
}

impl EigenSystem {
    /// Eigenvector `k` as a column vector.
    pub fn state(&self, k: usize) -> Vector5<C64> {
        self.states.column(k).into_owned()
    }

    /// Amplitude ⟨S(0,2)|k⟩.
    pub fn s02_amplitude(&self, k: usize) -> C64 {
        self.states[(S02, k)]
    }

    /// Weight of state `k` on a character.
    pub fn weight(&self, k: usize, c: Character) -> f64 {
        self.character[k][c.index()]
    }

    /// Dominant character of state `k`.
    pub fn dominant(&self, k: usize) -> Character {
        let row = &self.character[k];
        let mut best = 0;
        for c in 1..5 {
            if row[c] > row[best] {
                best = c;
            }
        }
        Character::ALL[best]
    }

    /// Index of the state with the largest weight on `c`.
    pub fn most_like(&self, c: Character) -> usize {
        let mut best = 0;
        for k in 1..5 {
            if self.weight(k, c) > self.weight(best, c) {
                best = k;
            }
        }
        best
    }
}

/// Builds the five-level Hamiltonian at an operating point.
///
/// Diagonal `(E_z, −g μ_B ΔB∥, +g μ_B ΔB∥, −E_z, −ε)` with
/// `E_z = |g| μ_B (B + b0)`. Perpendicular gradients couple the (1,1)
/// states through `p = g μ_B (ΔB_x − iΔB_y)/2`; the singlet-like
/// combinations couple to S(0,2) through `(∓i t_so,z ∓ t_c)/√2` and both
/// polarized triplets through `−t_so,y/√2`.
pub fn build_hamiltonian(params: &DeviceParams, point: FieldPoint) -> Hamiltonian {
    let gmu = params.g_abs * BOHR_MAGNETON_UEV_PER_T;
    let ez = params.zeeman(point.b_ext);
    let par = gmu * params.db_par;
    let p = C64::new(gmu * params.db_x_perp / 2.0, -gmu * params.db_y_perp / 2.0);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let so_y = C64::new(-params.t_so_y * r, 0.0);
    let du_s = C64::new(-params.t_c * r, -params.t_so_z * r);
    let ud_s = C64::new(params.t_c * r, -params.t_so_z * r);

    let mut m = Matrix5::<C64>::zeros();
    m[(T_MINUS, T_MINUS)] = C64::new(ez, 0.0);
    m[(DOWN_UP, DOWN_UP)] = C64::new(-par, 0.0);
    m[(UP_DOWN, UP_DOWN)] = C64::new(par, 0.0);
    m[(T_PLUS, T_PLUS)] = C64::new(-ez, 0.0);
    m[(S02, S02)] = C64::new(-point.epsilon, 0.0);

    let mut set = |i: usize, j: usize, v: C64| {
        m[(i, j)] = v;
        m[(j, i)] = v.conj();
    };
    set(T_MINUS, DOWN_UP, p);
    set(T_MINUS, UP_DOWN, -p);
    set(DOWN_UP, T_PLUS, -p);
    set(UP_DOWN, T_PLUS, p);
    set(T_MINUS, S02, so_y);
    set(T_PLUS, S02, so_y);
    set(DOWN_UP, S02, du_s);
    set(UP_DOWN, S02, ud_s);
    Hamiltonian { matrix: m }
}

/// Diagonalizes a Hermitian 5×5 matrix.
///
/// Energies come out ascending. Within a numerically degenerate subspace the
/// basis is rebuilt by Gram–Schmidt over the projected standard basis
/// vectors, and every vector gets the phase that makes its first
/// non-negligible component real and positive, so the output is
/// deterministic.
pub fn eigensystem(h: &Hamiltonian) -> Result<EigenSystem> {
    let scale = h.matrix.norm().max(1.0);
    if h.hermiticity_defect() > HERMITIAN_TOL * scale {
        return Err(Error::InvalidInput(format!(
            "matrix is not Hermitian (defect {:.3e})",
            h.hermiticity_defect()
        )));
    }
    let herm = (h.matrix + h.matrix.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);

    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut energies = [0.0; 5];
    let mut states = Matrix5::<C64>::zeros();
    for (k, &src) in order.iter().enumerate() {
        energies[k] = eig.eigenvalues[src];
        states.set_column(k, &eig.eigenvectors.column(src));
    }

    let degenerate_tol = 1e-9 * scale;
    let mut start = 0;
    while start < 5 {
        let mut end = start + 1;
        while end < 5 && energies[end] - energies[end - 1] <= degenerate_tol {
            end += 1;
        }
        if end - start > 1 {
            canonical_subspace(&mut states, start, end);
            let mean = energies[start..end].iter().sum::<f64>() / (end - start) as f64;
            energies[start..end].iter_mut().for_each(|e| *e = mean);
        }
        start = end;
    }
    for k in 0..5 {
        let v = fix_phase(states.column(k).into_owned());
        states.set_column(k, &v);
    }

    let refs: Vec<Vector5<C64>> = Character::ALL.iter().map(|c| c.vector()).collect();
    let mut character = [[0.0; 5]; 5];
    for k in 0..5 {
        let v = states.column(k);
        for (c, r) in refs.iter().enumerate() {
            character[k][c] = r.dotc(&v).norm_sqr();
        }
    }
    Ok(EigenSystem {
        energies,
        states,
        character,
    })
}

fn canonical_subspace(states: &mut Matrix5<C64>, start: usize, end: usize) {
    let span: Vec<Vector5<C64>> = (start..end).map(|k| states.column(k).into_owned()).collect();
    let mut basis: Vec<Vector5<C64>> = Vec::with_capacity(end - start);
    for e in 0..5 {
        if basis.len() == span.len() {
            break;
        }
        let mut v = Vector5::<C64>::zeros();
        for s in &span {
            v += s * s[e].conj();
        }
        for b in &basis {
            let c = b.dotc(&v);
            v -= b * c;
        }
        let n = v.norm();
        if n > 1e-6 {
            basis.push(v / C64::new(n, 0.0));
        }
    }
    for (offset, b) in basis.iter().enumerate() {
        states.set_column(start + offset, b);
    }
}

fn fix_phase(v: Vector5<C64>) -> Vector5<C64> {
    let max = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    match v.iter().find(|c| c.norm() > 1e-8 * max.max(1e-300)) {
        Some(c) => {
            let phase = c.conj() / C64::new(c.norm(), 0.0);
            v * phase
        }
        None => v,
    }
}

/// Exchange energy J(ε) = (−ε + √(ε² + 4t_c²))/2, the splitting between the
/// antibonding singlet and T⁰ at zero gradient.
///
/// Evaluated as `2t_c² / (ε + √(ε² + 4t_c²))` to avoid cancellation at large ε.
pub fn exchange_energy(params: &DeviceParams, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!(
            "exchange energy requires epsilon > 0, got {epsilon}"
        )));
    }
    let t = params.t_c;
    Ok(2.0 * t * t / (epsilon + (epsilon * epsilon + 4.0 * t * t).sqrt()))
}

/// Lower and upper hybridized singlet energies `(−ε ∓ √(ε² + 4t_c²))/2`
/// without spin-orbit or gradient terms.
pub fn singlet_branches(t_c: f64, epsilon: f64) -> (f64, f64) {
    let root = (epsilon * epsilon + 4.0 * t_c * t_c).sqrt();
    ((-epsilon - root) / 2.0, (-epsilon + root) / 2.0)
}

/// Detuning where the lower singlet branch is degenerate with T⁺,
/// `(E_z² − t_c²)/E_z`, without the E_z > t_c check.
pub fn st_plus_detuning_unchecked(params: &DeviceParams, b_ext: f64) -> f64 {
    let ez = params.zeeman(b_ext);
    (ez * ez - params.t_c * params.t_c) / ez
}

/// Detuning of the ST⁺ anticrossing, `(E_z² − t_c²)/E_z`.
pub fn st_plus_anticrossing_detuning(params: &DeviceParams, b_ext: f64) -> Result<f64> {
    let ez = params.zeeman(b_ext);
    if ez <= params.t_c {
        return Err(Error::NoCrossing {
            zeeman_uev: ez,
            t_c_uev: params.t_c,
        });
    }
    Ok(st_plus_detuning_unchecked(params, b_ext))
}

/// External field satisfying `|g| μ_B (B + b0) = hν`.
pub fn triplet_resonance_field(params: &DeviceParams, nu_ghz: f64) -> Result<f64> {
    if !(nu_ghz > 0.0) {
        return Err(Error::InvalidInput(format!("frequency must be positive, got {nu_ghz}")));
    }
    let field = photon_energy(nu_ghz) / (params.g_abs * BOHR_MAGNETON_UEV_PER_T) - params.b0;
    if field <= 0.0 {
        return Err(Error::UnreachableField { field_t: field });
    }
    Ok(field)
}

/// One detuning sample of a level diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRow {
    pub epsilon: f64,
    /// Branch energies, in the branch order fixed by the first row.
    pub energies: [f64; 5],
    /// Dominant character of each branch at this detuning.
    pub labels: [Character; 5],
}

/// Eigenenergies versus detuning with branch continuity.
///
/// The first row is ordered by energy; every later row assigns its states to
/// branches by the permutation maximizing the summed squared overlap with
/// the previous row, so labels never swap at near-degeneracies.
pub fn level_diagram(
    params: &DeviceParams,
    b_ext: f64,
    epsilon_range: (f64, f64),
    n_points: usize,
) -> Result<Vec<LevelRow>> {
    if n_points < 2 {
        return Err(Error::InvalidInput("level diagram needs at least 2 points".into()));
    }
    let (lo, hi) = epsilon_range;
    let perms = permutations5();
    let mut rows = Vec::with_capacity(n_points);
    let mut prev: Option<Matrix5<C64>> = None;
    for i in 0..n_points {
        let eps = lo + (hi - lo) * i as f64 / (n_points - 1) as f64;
        let eig = eigensystem(&build_hamiltonian(params, FieldPoint::new(b_ext, eps)))?;
        let assign: [usize; 5] = match &prev {
            None => [0, 1, 2, 3, 4],
            Some(p) => {
                let ov = p.adjoint() * eig.states;
                let mut best = perms[0];
                let mut best_score = f64::NEG_INFINITY;
                for perm in &perms {
                    let score: f64 = (0..5).map(|b| ov[(b, perm[b])].norm_sqr()).sum();
                    if score > best_score + 1e-12 {
                        best_score = score;
                        best = *perm;
                    }
                }
                best
            }
        };
        let mut tracked = Matrix5::<C64>::zeros();
        let mut energies = [0.0; 5];
        let mut labels = [Character::S02; 5];
        for b in 0..5 {
            let k = assign[b];
            tracked.set_column(b, &eig.states.column(k));
            energies[b] = eig.energies[k];
            labels[b] = eig.dominant(k);
        }
        prev = Some(tracked);
        rows.push(LevelRow {
            epsilon: eps,
            energies,
            labels,
        });
    }
    Ok(rows)
}

fn permutations5() -> Vec<[usize; 5]> {
    let mut out = Vec::with_capacity(120);
    let mut p = [0usize, 1, 2, 3, 4];
    heap_permute(&mut p, 5, &mut out);
    out.sort();
    out
}

fn heap_permute(p: &mut [usize; 5], k: usize, out: &mut Vec<[usize; 5]>) {
    if k == 1 {
        out.push(*p);
        return;
    }
    heap_permute(p, k - 1, out);
    for i in 0..k - 1 {
        if k.is_multiple_of(2) {
            p.swap(i, k - 1);
        } else {
            p.swap(0, k - 1);
        }
        heap_permute(p, k - 1, out);
    }
}

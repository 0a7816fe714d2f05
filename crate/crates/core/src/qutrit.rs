//! Qutrit states and Hamiltonians.
//!
//! Everything is expressed with ħ = 1: energies and Rabi frequencies are
//! angular frequencies in rad/s. [`units`] converts to μeV for reporting.

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::error::{invalid, require_finite, Error, Result};
use crate::linalg::{self, c, fix_phase, hermitian_deviation, jacobi_eigh, max_abs, Mat3, Vec3};

pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
pub const TRACE_TOLERANCE: f64 = 1e-12;
pub const NORM_TOLERANCE: f64 = 1e-12;
pub const MIN_EIGENVALUE: f64 = -1e-10;

pub mod units {
    /// Reduced Planck constant in eV·s.
    pub const HBAR_EV_S: f64 = 6.582119569e-16;

    /// Angular frequency (rad/s, ħ = 1) to μeV.
    pub fn rad_s_to_uev(omega: f64) -> f64 {
        omega * HBAR_EV_S * 1e6
    }

    pub fn uev_to_rad_s(energy: f64) -> f64 {
        energy / (HBAR_EV_S * 1e6)
    }

    /// 2π·f for a frequency given in Hz.
    pub fn angular(hz: f64) -> f64 {
        2.0 * std::f64::consts::PI * hz
    }
}

/// Transition frequencies of the three lowest levels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BatteryLevels {
    omega01: f64,
    omega12: f64,
}

impl BatteryLevels {
    pub fn new(omega01: f64, omega12: f64) -> Result<Self> {
        require_finite("omega01", omega01)?;
        require_finite("omega12", omega12)?;
        if omega01 <= 0.0 || omega12 <= 0.0 {
            return Err(invalid(format!(
                "transition frequencies must be positive, got ω01 = {omega01}, ω12 = {omega12}"
            )));
        }
        Ok(Self { omega01, omega12 })
    }

    /// The transmon device: ω01 = 2π·6.266 GHz, ω12 = 2π·6.011 GHz.
    pub fn transmon() -> Self {
        Self {
            omega01: units::angular(6.266e9),
            omega12: units::angular(6.011e9),
        }
    }

    pub fn omega01(&self) -> f64 {
        self.omega01
    }

    pub fn omega12(&self) -> f64 {
        self.omega12
    }

    /// Level energies `[0, ω01, ω01 + ω12]` (cumulative convention).
    pub fn energies(&self) -> [f64; 3] {
        [0.0, self.omega01, self.omega01 + self.omega12]
    }

    /// Energy of the fully charged state |2⟩, which is also the maximum ergotropy.
    pub fn max_energy(&self) -> f64 {
        self.omega01 + self.omega12
    }
}

/// A 3×3 Hermitian operator (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianOperator(Mat3);

impl HermitianOperator {
    pub fn new(m: Mat3) -> Result<Self> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("operator has non-finite entries"));
        }
        let dev = hermitian_deviation(&m);
        if dev > HERMITIAN_TOLERANCE * max_abs(&m).max(1.0) {
            return Err(invalid(format!("operator is not Hermitian (deviation {dev:e})")));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    /// Diagonal entries (real parts).
    pub fn diagonal(&self) -> [f64; 3] {
        [self.0[(0, 0)].re, self.0[(1, 1)].re, self.0[(2, 2)].re]
    }

    pub fn is_diagonal(&self) -> bool {
        let scale = max_abs(&self.0).max(f64::MIN_POSITIVE);
        (0..3).all(|i| (0..3).all(|j| i == j || self.0[(i, j)].norm() <= 1e-12 * scale))
    }
}

/// Eigenvalues in ascending order with their orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub eigenvalues: [f64; 3],
    pub eigenvectors: [Vec3; 3],
}

impl EigenSystem {
    /// Matrix whose columns are the eigenvectors.
    pub fn vectors(&self) -> Mat3 {
        Mat3::from_columns(&self.eigenvectors)
    }

    pub fn reconstruct(&self) -> Mat3 {
        let v = self.vectors();
        let d = Mat3::from_diagonal(&Vector3::from(self.eigenvalues).map(c));
        v * d * v.adjoint()
    }
}

/// A normalized qutrit ket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState(Vec3);

impl PureState {
    pub fn new(amplitudes: Vec3) -> Result<Self> {
        let n2 = amplitudes.norm_squared();
        if !n2.is_finite() || (n2 - 1.0).abs() > NORM_TOLERANCE {
            return Err(invalid(format!("state norm² is {n2}, expected 1")));
        }
        Ok(Self(amplitudes))
    }

    /// Normalizes `amplitudes`; fails on the zero vector.
    pub fn normalized(amplitudes: Vec3) -> Result<Self> {
        let n = amplitudes.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(invalid("cannot normalize a zero or non-finite vector"));
        }
        Ok(Self(amplitudes / c(n)))
    }

    /// Computational basis state |level⟩.
    pub fn basis(level: usize) -> Self {
        assert!(level < 3, "qutrit level must be 0, 1 or 2");
        let mut v = Vec3::zeros();
        v[level] = linalg::ONE;
        Self(v)
    }

    pub(crate) fn from_vector_unchecked(v: Vec3) -> Self {
        Self(v)
    }

    pub fn amplitudes(&self) -> &Vec3 {
        &self.0
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.0[0].norm_sqr(), self.0[1].norm_sqr(), self.0[2].norm_sqr()]
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.0.dotc(&other.0)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix(linalg::outer(&self.0, &self.0))
    }
}

/// A qutrit density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Mat3);

impl DensityMatrix {
    pub fn new(m: Mat3) -> Result<Self> {
        let rho = Self(m);
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        Self(m)
    }

    /// Checks the three state invariants.
    pub fn validate(&self) -> Result<()> {
        let m = &self.0;
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("density matrix has non-finite entries"));
        }
        let dev = hermitian_deviation(m);
        if dev > HERMITIAN_TOLERANCE {
            return Err(invalid(format!("density matrix is not Hermitian (deviation {dev:e})")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
            return Err(invalid(format!("density matrix trace is {tr}, expected 1")));
        }
        let min = self.eigenvalues_descending()[2];
        if min < MIN_EIGENVALUE {
            return Err(invalid(format!("density matrix has negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn basis(level: usize) -> Self {
        PureState::basis(level).to_density()
    }

    pub fn maximally_mixed() -> Self {
        Self(Mat3::identity() / c(3.0))
    }

    /// Diagonal state with the given populations.
    pub fn diagonal(populations: [f64; 3]) -> Result<Self> {
        Self::new(Mat3::from_diagonal(&Vector3::from(populations).map(c)))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.0[(0, 0)].re, self.0[(1, 1)].re, self.0[(2, 2)].re]
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// Spectrum sorted from largest to smallest.
    pub fn eigenvalues_descending(&self) -> [f64; 3] {
        let (vals, _) = jacobi_eigh(&self.0);
        let mut v = [vals[0], vals[1], vals[2]];
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    /// Spectral decomposition with eigenvalues sorted descending.
    pub fn spectral(&self) -> ([f64; 3], [Vec3; 3]) {
        let (vals, vecs) = jacobi_eigh(&self.0);
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        (
            idx.map(|k| vals[k]),
            idx.map(|k| fix_phase(&vecs.column(k).into_owned())),
        )
    }

    /// `U ρ U†`
    pub fn conjugate_by(&self, u: &Mat3) -> DensityMatrix {
        DensityMatrix(u * self.0 * u.adjoint())
    }

    /// Trace distance ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let (vals, _) = jacobi_eigh(&(self.0 - other.0));
        0.5 * vals.iter().map(|x| x.abs()).sum::<f64>()
    }

    /// Uhlmann fidelity (Tr √(√ρ σ √ρ))², clamped to 1. Near-singular
    /// states put O(√ε) roundoff into the square roots.
    pub fn fidelity(&self, other: &DensityMatrix) -> f64 {
        let sqrt_rho = linalg::hermitian_function(&self.0, |x| x.max(0.0).sqrt());
        let inner = sqrt_rho * other.0 * sqrt_rho;
        let inner = (inner + inner.adjoint()) * c(0.5);
        let (vals, _) = jacobi_eigh(&inner);
        let s: f64 = vals.iter().map(|x| x.max(0.0).sqrt()).sum();
        (s * s).min(1.0)
    }
}

/// H0 = diag(0, ω01, ω01 + ω12).
pub fn build_bare_hamiltonian(levels: &BatteryLevels) -> HermitianOperator {
    let e = levels.energies();
    HermitianOperator(Mat3::from_diagonal(&Vector3::from(e).map(c)))
}

/// Resonant drive `Ω1(|0⟩⟨1| + h.c.) + Ω2(|1⟩⟨2| + h.c.)`.
pub fn build_drive_hamiltonian(omega1: f64, omega2: f64) -> Result<HermitianOperator> {
    require_finite("omega1", omega1)?;
    require_finite("omega2", omega2)?;
    Ok(HermitianOperator(drive_matrix(omega1, omega2)))
}

pub(crate) fn drive_matrix(omega1: f64, omega2: f64) -> Mat3 {
    let mut m = Mat3::zeros();
    m[(0, 1)] = c(omega1);
    m[(1, 0)] = c(omega1);
    m[(1, 2)] = c(omega2);
    m[(2, 1)] = c(omega2);
    m
}

/// Hermitian eigendecomposition with ascending eigenvalues and eigenvectors
/// whose largest component is real and positive.
pub fn eig_hermitian(h: &HermitianOperator) -> Result<EigenSystem> {
    let m = h.matrix();
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOLERANCE * max_abs(m).max(1.0) {
        return Err(invalid(format!("matrix is not Hermitian (deviation {dev:e})")));
    }
    let (vals, vecs) = jacobi_eigh(m);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    Ok(EigenSystem {
        eigenvalues: idx.map(|k| vals[k]),
        eigenvectors: idx.map(|k| fix_phase(&vecs.column(k).into_owned())),
    })
}

/// Dark and bright eigenstates of the drive Hamiltonian.
#[derive(Debug, Clone, Copy)]
pub struct DarkBright {
    /// `(Ω2|0⟩ − Ω1|2⟩)/Δ`, eigenvalue 0.
    pub dark: PureState,
    /// `(Ω1|0⟩ + Δ|1⟩ + Ω2|2⟩)/(√2Δ)`, eigenvalue +Δ.
    pub bright_plus: PureState,
    /// `(Ω1|0⟩ − Δ|1⟩ + Ω2|2⟩)/(√2Δ)`, eigenvalue −Δ.
    pub bright_minus: PureState,
}

pub fn dark_bright_states(omega1: f64, omega2: f64) -> Result<DarkBright> {
    require_finite("omega1", omega1)?;
    require_finite("omega2", omega2)?;
    let gap = omega1.hypot(omega2);
    if gap == 0.0 {
        return Err(Error::DegenerateEigensystem(
            "zero drive field: all three eigenvalues vanish".into(),
        ));
    }
    let dark = Vec3::new(c(omega2 / gap), linalg::ZERO, c(-omega1 / gap));
    let bright = |sign: f64| {
        let k = 1.0 / (std::f64::consts::SQRT_2 * gap);
        Vec3::new(c(omega1 * k), c(sign * gap * k), c(omega2 * k))
    };
    Ok(DarkBright {
        dark: PureState(dark),
        bright_plus: PureState(bright(1.0)),
        bright_minus: PureState(bright(-1.0)),
    })
}

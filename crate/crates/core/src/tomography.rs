//! Nine-rotation qutrit state tomography.
//!
//! Each rotation `Ui` maps a measurement basis state `|ψi⟩` to `|0⟩`, so the
//! ground-state population after `Ui` is `⟨ψi|ρ|ψi⟩`. Recording all three
//! outcome populations for the nine rotations gives 27 linear equations in
//! the 9 real parameters of ρ.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{c, jacobi_eigh, outer, sigma, Mat3, Vec3, I};
use crate::qutrit::{DensityMatrix, PureState};

pub const N_ROTATIONS: usize = 9;
/// Required `|⟨0|U|ψ⟩|` for a rotation to pass verification.
const VERIFY_TOLERANCE: f64 = 1e-10;
/// Largest accepted condition number of the 27×9 design matrix.
pub const MAX_CONDITION_NUMBER: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// `(θ)_axis^{ab}`: `exp(−iθσ/2)` on the two-level subspace `{a, b}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub theta: f64,
    pub axis: Axis,
    pub levels: (usize, usize),
}

impl Pulse {
    pub fn unitary(&self) -> Mat3 {
        let (a, b) = self.levels;
        let (s, co) = (self.theta / 2.0).sin_cos();
        let mut u = Mat3::identity();
        u[(a, a)] = c(co);
        u[(b, b)] = c(co);
        match self.axis {
            Axis::X => {
                u[(a, b)] = -I * s;
                u[(b, a)] = -I * s;
            }
            Axis::Y => {
                u[(a, b)] = c(-s);
                u[(b, a)] = c(s);
            }
        }
        u
    }
}

/// Which way a multi-pulse entry was multiplied out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Composition {
    /// Product as written: the last-listed pulse acts first.
    AsWritten,
    /// The first-listed pulse acts first.
    Reversed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyRotation {
    /// 1 to 9.
    pub label: usize,
    pub pulses: Vec<Pulse>,
    pub unitary: Mat3,
    pub target_basis: PureState,
    pub composition: Composition,
}

fn pulse(theta: f64, axis: Axis, a: usize, b: usize) -> Pulse {
    Pulse {
        theta,
        axis,
        levels: (a, b),
    }
}

fn ket(a: [(f64, f64); 3]) -> PureState {
    let z = a.map(|(re, im)| Complex64::new(re, im));
    PureState::normalized(Vec3::new(z[0], z[1], z[2])).expect("non-zero basis vector")
}

fn table() -> Vec<(Vec<Pulse>, PureState)> {
    use Axis::{X, Y};
    let h = FRAC_1_SQRT_2;
    vec![
        (vec![], PureState::basis(0)),
        (vec![pulse(PI, X, 0, 1)], PureState::basis(1)),
        (vec![pulse(PI, X, 0, 1), pulse(PI, X, 1, 2)], PureState::basis(2)),
        (vec![pulse(PI / 2.0, Y, 0, 1)], ket([(h, 0.0), (-h, 0.0), (0.0, 0.0)])),
        (vec![pulse(PI / 2.0, X, 0, 1)], ket([(h, 0.0), (0.0, h), (0.0, 0.0)])),
        (
            vec![pulse(PI, X, 0, 1), pulse(PI / 2.0, Y, 1, 2)],
            ket([(0.0, 0.0), (h, 0.0), (-h, 0.0)]),
        ),
        (
            vec![pulse(PI, X, 0, 1), pulse(PI / 2.0, X, 1, 2)],
            ket([(0.0, 0.0), (h, 0.0), (0.0, h)]),
        ),
        (
            vec![pulse(PI / 2.0, X, 0, 1), pulse(PI, X, 1, 2)],
            ket([(h, 0.0), (0.0, 0.0), (-h, 0.0)]),
        ),
        // with these pulses the state sent to |0⟩ is (|0⟩ − i|2⟩)/√2
        (
            vec![pulse(PI / 2.0, Y, 0, 1), pulse(PI, X, 1, 2)],
            ket([(h, 0.0), (0.0, 0.0), (0.0, -h)]),
        ),
    ]
}

fn maps_to_ground(u: &Mat3, target: &PureState) -> bool {
    let image = u * target.amplitudes();
    (image[0].norm() - 1.0).abs() <= VERIFY_TOLERANCE
}

/// Builds and verifies the nine tomography rotations.
pub fn tomography_set() -> Result<Vec<TomographyRotation>> {
    table()
        .into_iter()
        .enumerate()
        .map(|(k, (pulses, target))| {
            let as_written = pulses.iter().fold(Mat3::identity(), |acc, p| acc * p.unitary());
            let reversed = pulses.iter().rev().fold(Mat3::identity(), |acc, p| acc * p.unitary());
            let (unitary, composition) = if maps_to_ground(&as_written, &target) {
                (as_written, Composition::AsWritten)
            } else if maps_to_ground(&reversed, &target) {
                (reversed, Composition::Reversed)
            } else {
                return Err(Error::Construction(format!(
                    "rotation {} does not map its basis state to |0⟩ in either order",
                    k + 1
                )));
            };
            Ok(TomographyRotation {
                label: k + 1,
                pulses,
                unitary,
                target_basis: target,
                composition,
            })
        })
        .collect()
}

/// Outcome populations after each rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub probabilities: [[f64; 3]; N_ROTATIONS],
    pub shots: Option<u64>,
}

impl MeasurementRecord {
    pub fn new(probabilities: [[f64; 3]; N_ROTATIONS], shots: Option<u64>) -> Result<Self> {
        if shots == Some(0) {
            return Err(invalid("shots must be positive"));
        }
        for (i, row) in probabilities.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(p.is_finite() && *p >= -1e-12)) || (sum - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("row {} is not a probability vector: {row:?}", i + 1)));
            }
        }
        Ok(Self { probabilities, shots })
    }
}

/// Ideal or sampled measurement outcomes for `state`.
///
/// With `shots`, each row is a multinomial draw from a ChaCha8 stream
/// seeded with `seed`; identical inputs give identical records.
pub fn simulate_measurements(state: &DensityMatrix, shots: Option<u64>, seed: u64) -> Result<MeasurementRecord> {
    if shots == Some(0) {
        return Err(invalid("shots must be positive"));
    }
    let set = tomography_set()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probabilities = [[0.0; 3]; N_ROTATIONS];
    for (row, rot) in probabilities.iter_mut().zip(&set) {
        let exact = state.conjugate_by(&rot.unitary).populations().map(|p| p.max(0.0));
        let total: f64 = exact.iter().sum();
        let exact = exact.map(|p| p / total);
        *row = match shots {
            None => exact,
            Some(n) => {
                let mut left = n;
                let mut mass = 1.0;
                let mut counts = [0u64; 3];
                for k in 0..2 {
                    let p = if mass > 0.0 {
                        (exact[k] / mass).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let draw = Binomial::new(left, p)
                        .map_err(|e| invalid(format!("binomial parameters: {e}")))?
                        .sample(&mut rng);
                    counts[k] = draw;
                    left -= draw;
                    mass -= exact[k];
                }
                counts[2] = left;
                counts.map(|x| x as f64 / n as f64)
            }
        };
    }
    MeasurementRecord::new(probabilities, shots)
}

/// Hermitian basis for the 9 real parameters: the three diagonal
/// projectors, then `|a⟩⟨b| + h.c.` and `i|a⟩⟨b| + h.c.` for each pair.
fn parameter_basis() -> [Mat3; 9] {
    let sym = |a: usize, b: usize| sigma(a, b) + sigma(b, a);
    let asym = |a: usize, b: usize| (sigma(a, b) - sigma(b, a)) * I;
    [
        sigma(0, 0),
        sigma(1, 1),
        sigma(2, 2),
        sym(0, 1),
        asym(0, 1),
        sym(0, 2),
        asym(0, 2),
        sym(1, 2),
        asym(1, 2),
    ]
}

fn design_matrix(set: &[TomographyRotation]) -> DMatrix<f64> {
    let basis = parameter_basis();
    let mut a = DMatrix::zeros(3 * set.len(), basis.len());
    for (i, rot) in set.iter().enumerate() {
        for (m, e) in basis.iter().enumerate() {
            let image = rot.unitary * e * rot.unitary.adjoint();
            for k in 0..3 {
                a[(3 * i + k, m)] = image[(k, k)].re;
            }
        }
    }
    a
}

/// Ratio of the extreme singular values of the 27×9 design matrix.
pub fn design_condition_number() -> Result<f64> {
    let svd = design_matrix(&tomography_set()?).svd(false, false);
    let s = &svd.singular_values;
    Ok(s.max() / s.min())
}

/// Linear-inversion reconstruction followed by projection onto valid states.
pub fn reconstruct(record: &MeasurementRecord) -> Result<DensityMatrix> {
    let set = tomography_set()?;
    let a = design_matrix(&set);
    let svd = a.svd(true, true);
    let s = &svd.singular_values;
    let cond = s.max() / s.min();
    if cond.is_nan() || cond >= MAX_CONDITION_NUMBER {
        return Err(Error::Construction(format!(
            "tomography design matrix is ill-conditioned (κ = {cond:e})"
        )));
    }
    let b = DVector::from_iterator(27, record.probabilities.iter().flatten().copied());
    let x = svd.solve(&b, 0.0).map_err(|e| Error::Construction(e.to_string()))?;
    let raw = parameter_basis()
        .iter()
        .zip(x.iter())
        .fold(Mat3::zeros(), |acc, (e, v)| acc + e * c(*v));
    Ok(project_to_states(&raw))
}

/// Clips negative eigenvalues of a Hermitian matrix and rescales to unit trace.
pub fn project_to_states(m: &Mat3) -> DensityMatrix {
    let herm = (m + m.adjoint()) * c(0.5);
    let (vals, vecs) = jacobi_eigh(&herm);
    let clipped = vals.map(|v| v.max(0.0));
    let total = clipped.sum();
    if total <= 0.0 {
        return DensityMatrix::maximally_mixed();
    }
    let out = (0..3).fold(Mat3::zeros(), |acc, k| {
        let v = vecs.column(k).into_owned();
        acc + outer(&v, &v) * c(clipped[k] / total)
    });
    DensityMatrix::from_matrix_unchecked((out + out.adjoint()) * c(0.5))
}

//! Random-state generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::Matrix3;
use num_complex::Complex64;
use qutrit_battery::linalg::{Mat3, Vec3};
use qutrit_battery::{DensityMatrix, HermitianOperator, PureState};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_matrix(rng: &mut impl Rng) -> Mat3 {
    Matrix3::from_fn(|_, _| gaussian(rng))
}

pub fn random_hermitian(rng: &mut impl Rng) -> HermitianOperator {
    let g = random_matrix(rng);
    HermitianOperator::new((g + g.adjoint()) * Complex64::new(0.5, 0.0)).unwrap()
}

pub fn random_pure(rng: &mut impl Rng) -> PureState {
    PureState::normalized(Vec3::from_fn(|_, _| gaussian(rng))).unwrap()
}

/// Ginibre ensemble: `G G† / Tr(G G†)`, full rank with probability one.
pub fn random_density(rng: &mut impl Rng) -> DensityMatrix {
    let g = random_matrix(rng);
    let m = g * g.adjoint();
    let tr = m.trace();
    let mut m = m / tr;
    // exact Hermiticity after the division
    m = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    DensityMatrix::new(m).unwrap()
}

/// Real roots of `λ³ + a λ² + b λ + c` by Viète's trigonometric form, which
/// applies because a Hermitian characteristic polynomial has three real roots.
pub fn cubic_roots(a: f64, b: f64, c: f64) -> [f64; 3] {
    let p = b - a * a / 3.0;
    let q = 2.0 * a.powi(3) / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    if p.abs() < 1e-300 {
        let r = (-q).cbrt() + shift;
        return [r; 3];
    }
    let m = 2.0 * (-p / 3.0).sqrt();
    let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
    let theta = arg.acos() / 3.0;
    let mut r = [0, 1, 2].map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift);
    r.sort_by(|x, y| x.partial_cmp(y).unwrap());
    r
}

pub fn char_poly(m: &Mat3) -> (f64, f64, f64) {
    let tr = m.trace().re;
    let minor = |i: usize, j: usize| (m[(i, i)] * m[(j, j)] - m[(i, j)] * m[(j, i)]).re;
    let c1 = minor(0, 1) + minor(0, 2) + minor(1, 2);
    let det = m.determinant().re;
    (-tr, c1, -det)
}

/// Eigenvalues of a Hermitian matrix from its characteristic polynomial.
pub fn spectrum(m: &Mat3) -> [f64; 3] {
    let (a, b, c) = char_poly(m);
    cubic_roots(a, b, c)
}

pub const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Lowest energy reachable by pairing eigenvalues with levels, by trying
/// every pairing.
pub fn brute_force_passive_energy(eigenvalues: [f64; 3], energies: [f64; 3]) -> f64 {
    PERMUTATIONS
        .iter()
        .map(|p| (0..3).map(|n| eigenvalues[p[n]] * energies[n]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

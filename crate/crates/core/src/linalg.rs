//! Small dense helpers for 3×3 complex matrices.
//!
//! The Hermitian eigensolver is a cyclic complex Jacobi iteration. At this
//! size it converges in a handful of sweeps and needs no pivoting logic.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

pub type Mat3 = Matrix3<Complex64>;
pub type Vec3 = Vector3<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative off-diagonal threshold at which the Jacobi sweeps stop.
pub const JACOBI_TOLERANCE: f64 = 1e-14;
pub const JACOBI_MAX_SWEEPS: usize = 100;

const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Largest absolute entry.
pub fn max_abs(m: &Mat3) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Largest absolute entry of `m - m†`.
pub fn hermitian_deviation(m: &Mat3) -> f64 {
    max_abs(&(m - m.adjoint()))
}

fn off_diagonal_norm(m: &Mat3) -> f64 {
    PAIRS
        .iter()
        .map(|&(p, q)| 2.0 * m[(p, q)].norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Raw Jacobi diagonalization of a Hermitian matrix.
///
/// Returns unsorted eigenvalues and the unitary whose columns are the
/// matching eigenvectors. The caller is responsible for checking that the
/// input is Hermitian.
pub fn jacobi_eigh(h: &Mat3) -> (Vector3<f64>, Mat3) {
    let mut a = *h;
    let mut v = Mat3::identity();
    let scale = a.norm();
    if scale == 0.0 {
        return (Vector3::zeros(), v);
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= JACOBI_TOLERANCE * scale {
            break;
        }
        for &(p, q) in &PAIRS {
            let apq = a[(p, q)];
            let mag = apq.norm();
            if mag <= f64::MIN_POSITIVE {
                continue;
            }
            let phase = apq / mag;
            let app = a[(p, p)].re;
            let aqq = a[(q, q)].re;
            let theta = (aqq - app) / (2.0 * mag);
            let t = if theta >= 0.0 {
                1.0 / (theta + (1.0 + theta * theta).sqrt())
            } else {
                -1.0 / (-theta + (1.0 + theta * theta).sqrt())
            };
            let cs = 1.0 / (1.0 + t * t).sqrt();
            let sn = t * cs;
            let mut rot = Mat3::identity();
            rot[(p, p)] = c(cs);
            rot[(p, q)] = c(sn);
            rot[(q, p)] = -phase.conj() * sn;
            rot[(q, q)] = phase.conj() * cs;
            a = rot.adjoint() * a * rot;
            v *= rot;
        }
    }
    (Vector3::new(a[(0, 0)].re, a[(1, 1)].re, a[(2, 2)].re), v)
}

/// Multiply a vector by the phase that makes its largest-magnitude entry
/// real and positive.
pub fn fix_phase(v: &Vec3) -> Vec3 {
    let mut best = 0;
    for k in 1..3 {
        if v[k].norm() > v[best].norm() * (1.0 + 1e-12) {
            best = k;
        }
    }
    let mag = v[best].norm();
    if mag == 0.0 {
        return *v;
    }
    v * (v[best].conj() / mag)
}

/// `f(H)` for Hermitian `H`, applied through its spectral decomposition.
pub fn hermitian_function(h: &Mat3, f: impl Fn(f64) -> f64) -> Mat3 {
    let (vals, vecs) = jacobi_eigh(h);
    let d = Mat3::from_diagonal(&vals.map(|x| c(f(x))));
    vecs * d * vecs.adjoint()
}

/// Outer product `|a⟩⟨b|`.
pub fn outer(a: &Vec3, b: &Vec3) -> Mat3 {
    a * b.adjoint()
}

/// `|i⟩⟨j|` in the computational basis.
pub fn sigma(i: usize, j: usize) -> Mat3 {
    let mut m = Mat3::zeros();
    m[(i, j)] = ONE;
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes_complex_hermitian() {
        let h = Mat3::new(
            c(1.0),
            Complex64::new(0.5, 0.25),
            Complex64::new(-0.1, 0.7),
            Complex64::new(0.5, -0.25),
            c(-2.0),
            Complex64::new(0.0, 1.5),
            Complex64::new(-0.1, -0.7),
            Complex64::new(0.0, -1.5),
            c(0.3),
        );
        let (vals, vecs) = jacobi_eigh(&h);
        let recon = vecs * Mat3::from_diagonal(&vals.map(c)) * vecs.adjoint();
        assert!(max_abs(&(recon - h)) < 1e-13);
        assert!(max_abs(&(vecs.adjoint() * vecs - Mat3::identity())) < 1e-13);
    }

    #[test]
    fn zero_matrix_is_its_own_eigensystem() {
        let (vals, vecs) = jacobi_eigh(&Mat3::zeros());
        assert_eq!(vals, Vector3::zeros());
        assert_eq!(vecs, Mat3::identity());
    }

    #[test]
    fn fix_phase_makes_dominant_entry_positive() {
        let v = Vec3::new(c(0.1), Complex64::new(0.0, -0.9), c(0.2));
        let w = fix_phase(&v);
        assert!(w[1].im.abs() < 1e-15 && w[1].re > 0.0);
        assert!((w.norm() - v.norm()).abs() < 1e-15);
    }

    #[test]
    fn square_root_squares_back() {
        let h = Mat3::from_diagonal(&Vector3::new(c(4.0), c(1.0), c(0.25)));
        let r = hermitian_function(&h, f64::sqrt);
        assert!(max_abs(&(r * r - h)) < 1e-14);
    }
}

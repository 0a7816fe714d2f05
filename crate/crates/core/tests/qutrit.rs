//! Eigensolver and Hamiltonian checks against independent closed forms.

mod common;

use std::f64::consts::PI;

use common::{char_poly, cubic_roots};
use num_complex::Complex64;
use qutrit_battery::linalg::{max_abs, Mat3};
use qutrit_battery::{
    build_bare_hamiltonian, build_drive_hamiltonian, dark_bright_states, eig_hermitian, units, BatteryLevels,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn eigenvalues_match_cubic_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let h = common::random_hermitian(&mut rng);
        let eig = eig_hermitian(&h).unwrap();
        let (a, b, c) = char_poly(h.matrix());
        let roots = cubic_roots(a, b, c);
        let scale = max_abs(h.matrix()).max(1.0);
        for (x, y) in eig.eigenvalues.iter().zip(roots) {
            assert!((x - y).abs() < 1e-8 * scale, "{:?} vs {roots:?}", eig.eigenvalues);
        }
    }
}

#[test]
fn eigensystem_reconstructs_and_is_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let h = common::random_hermitian(&mut rng);
        let eig = eig_hermitian(&h).unwrap();
        assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let scale = max_abs(h.matrix());
        assert!(max_abs(&(eig.reconstruct() - h.matrix())) <= 1e-10 * scale);
        let v = eig.vectors();
        assert!(max_abs(&(v.adjoint() * v - Mat3::identity())) <= 1e-10);
    }
}

#[test]
fn drive_spectrum_is_symmetric_about_zero() {
    let e = eig_hermitian(&build_drive_hamiltonian(3.0, 4.0).unwrap()).unwrap();
    for (x, y) in e.eigenvalues.iter().zip([-5.0, 0.0, 5.0]) {
        assert!((x - y).abs() < 1e-12);
    }
    let e = eig_hermitian(&build_drive_hamiltonian(2.5, 0.0).unwrap()).unwrap();
    for (x, y) in e.eigenvalues.iter().zip([-2.5, 0.0, 2.5]) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn dark_and_bright_states_diagonalize_the_drive() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    use rand::Rng;
    for _ in 0..50 {
        let (o1, o2): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let gap = o1.hypot(o2);
        let h = build_drive_hamiltonian(o1, o2).unwrap();
        let db = dark_bright_states(o1, o2).unwrap();
        let pairs = [(db.dark, 0.0), (db.bright_plus, gap), (db.bright_minus, -gap)];
        for (s, e) in pairs {
            let hv = h.matrix() * s.amplitudes();
            let err = (hv - s.amplitudes() * Complex64::new(e, 0.0)).camax();
            assert!(err < 1e-10 * gap.max(1.0));
            assert!(s.amplitudes()[1].norm() < 1e-15 || e != 0.0);
        }
        for (i, a) in pairs.iter().enumerate() {
            for b in &pairs[i + 1..] {
                assert!(a.0.inner(&b.0).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn bare_hamiltonian_uses_cumulative_energies() {
    let lv = BatteryLevels::new(units::angular(6.266e9), units::angular(6.011e9)).unwrap();
    let d = build_bare_hamiltonian(&lv).diagonal();
    assert_eq!(d[0], 0.0);
    assert!((d[1] / (2.0 * PI * 6.266e9) - 1.0).abs() < 1e-14);
    assert!((d[2] / (2.0 * PI * 12.277e9) - 1.0).abs() < 1e-14);
    let unit = build_bare_hamiltonian(&BatteryLevels::new(1.0, 1.0).unwrap()).diagonal();
    assert_eq!(unit, [0.0, 1.0, 2.0]);
}

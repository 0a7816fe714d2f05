//! Ergotropy, passive states, the free-decay law and charging metrics,
//! checked against brute-force pairings and dense sampling.

mod common;

use common::{brute_force_passive_energy, spectrum};
use qutrit_battery::ergotropy::Crossing;
use qutrit_battery::linalg::{hermitian_function, Mat3};
use qutrit_battery::{
    analytic_populations, build_bare_hamiltonian, charging_metrics, crossing_times, ergotropy, instantaneous_energy,
    passive_state, self_discharge_ergotropy, units, BatteryLevels, DecayRates, DensityMatrix, ErgotropyTrace, Error,
    HermitianOperator,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn levels() -> BatteryLevels {
    BatteryLevels::transmon()
}

fn h0() -> HermitianOperator {
    build_bare_hamiltonian(&levels())
}

fn rates() -> DecayRates {
    DecayRates::sequential(51.4e3, 79.7e3).unwrap()
}

/// `Σ_{n,m} r_n ε_m (|⟨r_n|ε_m⟩|² − δ_nm)` with eigenvalues descending and
/// energies ascending.
fn double_sum(rho: &DensityMatrix, energies: [f64; 3]) -> f64 {
    let (r, vecs) = rho.spectral();
    let mut total = 0.0;
    for n in 0..3 {
        for (m, e) in energies.iter().enumerate() {
            let overlap = vecs[n][m].norm_sqr() - if n == m { 1.0 } else { 0.0 };
            total += r[n] * e * overlap;
        }
    }
    total
}

#[test]
fn ergotropy_matches_permutation_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = h0();
    let energies = levels().energies();
    let scale = levels().max_energy();
    for _ in 0..1000 {
        let rho = common::random_density(&mut rng);
        let mean = instantaneous_energy(&rho, &h);
        let eigs = spectrum(rho.matrix());
        let oracle = mean - brute_force_passive_energy(eigs, energies);
        let w = ergotropy(&rho, &h);
        assert!((w - oracle).abs() <= 1e-10 * scale, "{w} vs {oracle}");
        assert!((double_sum(&rho, energies) - w).abs() <= 1e-10 * scale);
        for p in common::PERMUTATIONS {
            let pairing: f64 = (0..3).map(|n| eigs[p[n]] * energies[n]).sum();
            assert!(w >= mean - pairing - 1e-10 * scale);
        }
        assert!(w >= 0.0 && w <= mean + 1e-10 * scale);
    }
}

#[test]
fn passive_state_energy_is_the_pairing_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let h = h0();
    let energies = levels().energies();
    let scale = levels().max_energy();
    for _ in 0..200 {
        let rho = common::random_density(&mut rng);
        let p = passive_state(&rho, &h);
        let want = brute_force_passive_energy(spectrum(rho.matrix()), energies);
        assert!((instantaneous_energy(&p, &h) - want).abs() <= 1e-10 * scale);
        assert!(ergotropy(&p, &h) <= 1e-10 * scale);
        let (a, b) = (p.eigenvalues_descending(), rho.eigenvalues_descending());
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-12);
        }
        let pops = p.populations();
        assert!(pops[0] >= pops[1] && pops[1] >= pops[2]);
    }
    assert_eq!(
        passive_state(&DensityMatrix::basis(2), &h).populations(),
        [1.0, 0.0, 0.0]
    );
    let mixed = passive_state(&DensityMatrix::maximally_mixed(), &h);
    assert!(mixed.trace_distance(&DensityMatrix::maximally_mixed()) < 1e-15);
}

#[test]
fn ergotropy_is_unitarily_covariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let h = h0();
    let scale = levels().max_energy();
    for _ in 0..100 {
        let rho = common::random_density(&mut rng);
        // U = exp(−iG) for a random Hermitian generator
        let g = common::random_hermitian(&mut rng);
        let cos = hermitian_function(g.matrix(), f64::cos);
        let sin = hermitian_function(g.matrix(), f64::sin);
        let u: Mat3 = cos - sin * qutrit_battery::linalg::I;
        let turned = rho.conjugate_by(&u);
        let passive = brute_force_passive_energy(spectrum(turned.matrix()), levels().energies());
        let want = instantaneous_energy(&turned, &h) - passive;
        assert!((ergotropy(&turned, &h) - want).abs() <= 1e-10 * scale);
    }
}

#[test]
fn diagonal_states_with_descending_populations_are_passive() {
    let h = h0();
    for p in [[1.0, 0.0, 0.0], [0.5, 0.3, 0.2], [0.4, 0.4, 0.2], [1.0 / 3.0; 3]] {
        let rho = DensityMatrix::diagonal(p).unwrap();
        assert_eq!(ergotropy(&rho, &h), 0.0);
    }
    let top = units::rad_s_to_uev(ergotropy(&DensityMatrix::basis(2), &h));
    assert!((top - 50.7736).abs() < 1e-3);
}

#[test]
fn free_decay_law_matches_general_ergotropy() {
    let (r, lv, h) = (rates(), levels(), h0());
    let scale = lv.max_energy();
    for k in 0..=6000 {
        let t = 60e-6 * k as f64 / 6000.0;
        let p = analytic_populations(t, &r).unwrap();
        let general = ergotropy(&DensityMatrix::diagonal(p).unwrap(), &h);
        let law = self_discharge_ergotropy(t, &r, &lv).unwrap();
        assert!((law - general).abs() <= 1e-10 * scale, "t = {t:e}");
    }
    assert!((self_discharge_ergotropy(0.0, &r, &lv).unwrap() / scale - 1.0).abs() < 1e-15);
    assert_eq!(self_discharge_ergotropy(1e-2, &r, &lv).unwrap(), 0.0);
    assert!(matches!(
        self_discharge_ergotropy(-1.0, &r, &lv),
        Err(Error::Range { .. })
    ));
}

#[test]
fn free_decay_law_holds_in_every_ordering() {
    // faster Γ10 reverses which populations cross first
    let lv = levels();
    let h = h0();
    for r in [
        DecayRates::sequential(200e3, 30e3).unwrap(),
        DecayRates::sequential(10e3, 300e3).unwrap(),
        DecayRates::sequential(79.7e3, 79.7e3).unwrap(),
    ] {
        for k in 0..=2000 {
            let t = 200e-6 * k as f64 / 2000.0;
            let p = analytic_populations(t, &r).unwrap();
            let general = ergotropy(&DensityMatrix::diagonal(p).unwrap(), &h);
            let law = self_discharge_ergotropy(t, &r, &lv).unwrap();
            assert!((law - general).abs() <= 1e-10 * lv.max_energy());
        }
    }
}

/// Crossing of `p[a] = p[b]` located by dense sampling.
fn sampled_crossing(r: &DecayRates, a: usize, b: usize) -> f64 {
    let n = 2_000_000;
    let t_max = 10.0 / r.gamma_10.min(r.gamma_21);
    let f = |t: f64| {
        let p = analytic_populations(t, r).unwrap();
        p[a] - p[b]
    };
    let mut prev = f(t_max / n as f64);
    for k in 2..=n {
        let t = t_max * k as f64 / n as f64;
        let cur = f(t);
        if prev.signum() != cur.signum() {
            return t - 0.5 * t_max / n as f64;
        }
        prev = cur;
    }
    panic!("no sign change");
}

#[test]
fn crossing_times_match_dense_sampling() {
    let r = rates();
    let c = crossing_times(&r).unwrap();
    assert!(c[0].time < c[1].time && c[1].time < c[2].time);
    let step = 10.0 / 51.4e3 / 2e6;
    for Crossing { pair, time } in c {
        let (a, b) = match pair {
            "p2=p1" => (2, 1),
            "p2=p0" => (2, 0),
            "p1=p0" => (1, 0),
            other => panic!("{other}"),
        };
        assert!((time - sampled_crossing(&r, a, b)).abs() <= step);
        let p = analytic_populations(time, &r).unwrap();
        assert!((p[a] - p[b]).abs() < 1e-10);
    }
    // the first root is where e^{−Γ21 t} equals ϱ11
    assert_eq!(c[0].pair, "p2=p1");
    let landmarks = [10.738e-6, 16.207e-6, 22.533e-6];
    for (x, y) in c.iter().zip(landmarks) {
        assert!((x.time - y).abs() < 1e-9);
    }
}

#[test]
fn crossing_times_scale_inversely_with_rates() {
    let base = crossing_times(&rates()).unwrap();
    for factor in [0.5, 3.0, 17.0] {
        let scaled = crossing_times(&rates().scaled(factor)).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            assert!((b.time * factor / a.time - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn ergotropy_vanishes_after_last_crossing() {
    let r = rates();
    let last = crossing_times(&r).unwrap()[2].time;
    for k in 1..200 {
        let t = last * (1.0 + 0.02 * k as f64);
        assert_eq!(self_discharge_ergotropy(t, &r, &levels()).unwrap(), 0.0);
    }
    assert!(self_discharge_ergotropy(0.99 * last, &r, &levels()).unwrap() > 0.0);
}

#[test]
fn charging_metrics_interpolate_the_first_crossing() {
    let trace = ErgotropyTrace::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 40.0, 60.0, 30.0], 60.0).unwrap();
    let m = charging_metrics(&trace, 0.5).unwrap();
    assert!((m.tau_c - 0.75).abs() < 1e-15);
    assert!((m.mean_power - 30.0 / 0.75).abs() < 1e-12);
    let full = ErgotropyTrace::new(vec![1e-9, 2e-9], vec![60.0, 60.0], 60.0).unwrap();
    assert_eq!(charging_metrics(&full, 1.0).unwrap().tau_c, 1e-9);
    assert!(matches!(charging_metrics(&trace, 0.0), Err(Error::Range { .. })));
    assert!(matches!(charging_metrics(&trace, 1.5), Err(Error::Range { .. })));
    let low = ErgotropyTrace::new(vec![0.0, 1.0], vec![0.0, 10.0], 60.0).unwrap();
    assert!(matches!(charging_metrics(&low, 0.99), Err(Error::NotCharged { .. })));
}

#[test]
fn trace_rejects_values_above_the_maximum() {
    assert!(ErgotropyTrace::new(vec![0.0, 1.0], vec![0.0, 61.0], 60.0).is_err());
    assert!(ErgotropyTrace::new(vec![0.0, 1.0], vec![-1.0, 1.0], 60.0).is_err());
    assert!(ErgotropyTrace::new(vec![1.0, 0.0], vec![0.0, 1.0], 60.0).is_err());
}

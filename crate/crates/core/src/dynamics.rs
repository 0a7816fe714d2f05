//! Coherent charging and dissipative self-discharge.
//!
//! Both integrators are fixed-step classical RK4 in the frame rotating with
//! the bare Hamiltonian, where the resonant drive is
//! `Ω1(t)(|0⟩⟨1| + h.c.) + Ω2(t)(|1⟩⟨2| + h.c.)`. Populations, energies and
//! ergotropy are identical in this frame and in the laboratory frame.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_finite, Error, Result};
use crate::linalg::{c, sigma, Mat3, Vec3, I};
use crate::pulse::PulseSchedule;
use crate::qutrit::{drive_matrix, DensityMatrix, HermitianOperator, PureState};

/// Upper bound on `dt` times the fastest rate in the generator.
pub const STABILITY_BOUND: f64 = 0.05;
/// Norm or trace drift beyond which a run is rejected.
pub const DRIFT_LIMIT: f64 = 1e-6;
const SLACK: f64 = 1e-12;

/// Sequential relaxation and pure dephasing rates, in 1/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRates {
    /// |1⟩ → |0⟩
    pub gamma_10: f64,
    /// |2⟩ → |1⟩
    pub gamma_21: f64,
    pub deph_1: f64,
    pub deph_2: f64,
}

impl DecayRates {
    pub fn new(gamma_10: f64, gamma_21: f64, deph_1: f64, deph_2: f64) -> Result<Self> {
        for (what, v) in [
            ("gamma_10", gamma_10),
            ("gamma_21", gamma_21),
            ("deph_1", deph_1),
            ("deph_2", deph_2),
        ] {
            require_finite(what, v)?;
            if v < 0.0 {
                return Err(invalid(format!("{what} must be ≥ 0, got {v}")));
            }
        }
        Ok(Self {
            gamma_10,
            gamma_21,
            deph_1,
            deph_2,
        })
    }

    /// Relaxation only.
    pub fn sequential(gamma_10: f64, gamma_21: f64) -> Result<Self> {
        Self::new(gamma_10, gamma_21, 0.0, 0.0)
    }

    /// Rates from relaxation and coherence times (s). Pure dephasing is
    /// `1/T_coher − 1/(2 T_relax)`, clamped at zero.
    pub fn from_times(t01_relax: f64, t12_relax: f64, t01_coher: f64, t12_coher: f64) -> Result<Self> {
        for (what, v) in [
            ("t01_relax", t01_relax),
            ("t12_relax", t12_relax),
            ("t01_coher", t01_coher),
            ("t12_coher", t12_coher),
        ] {
            require_finite(what, v)?;
            if v <= 0.0 {
                return Err(invalid(format!("{what} must be > 0, got {v}")));
            }
        }
        let deph = |coher: f64, relax: f64| (1.0 / coher - 0.5 / relax).max(0.0);
        Self::new(
            1.0 / t01_relax,
            1.0 / t12_relax,
            deph(t01_coher, t01_relax),
            deph(t12_coher, t12_relax),
        )
    }

    /// Measured transmon rates: Γ10 = 51.4 kHz, Γ21 = 79.7 kHz, dephasing
    /// from the coherence times 26.7 μs and 9.9 μs.
    pub fn transmon() -> Self {
        let deph = |coher: f64, relax: f64| (1.0 / coher - 0.5 / relax).max(0.0);
        Self {
            gamma_10: 51.4e3,
            gamma_21: 79.7e3,
            deph_1: deph(26.7e-6, 19.4e-6),
            deph_2: deph(9.9e-6, 12.5e-6),
        }
    }

    pub fn max_rate(&self) -> f64 {
        self.gamma_10.max(self.gamma_21).max(self.deph_1).max(self.deph_2)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            gamma_10: self.gamma_10 * factor,
            gamma_21: self.gamma_21 * factor,
            deph_1: self.deph_1 * factor,
            deph_2: self.deph_2 * factor,
        }
    }
}

/// States sampled on an output grid.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    /// Largest norm (unitary) or trace (Lindblad) deviation from 1 seen at
    /// the reported samples, before any renormalization.
    pub max_drift: f64,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &S)> {
        Some((*self.times.last()?, self.states.last()?))
    }
}

/// Anything that can be viewed as a density matrix.
pub trait QuantumState {
    fn density(&self) -> DensityMatrix;
    fn populations(&self) -> [f64; 3];
}

impl QuantumState for PureState {
    fn density(&self) -> DensityMatrix {
        self.to_density()
    }
    fn populations(&self) -> [f64; 3] {
        PureState::populations(self)
    }
}

impl QuantumState for DensityMatrix {
    fn density(&self) -> DensityMatrix {
        *self
    }
    fn populations(&self) -> [f64; 3] {
        DensityMatrix::populations(self)
    }
}

fn check_dt(dt: f64) -> Result<()> {
    require_finite("dt", dt)?;
    if dt <= 0.0 {
        return Err(invalid(format!("dt must be > 0, got {dt}")));
    }
    Ok(())
}

fn check_stability(dt: f64, rate: f64) -> Result<()> {
    if dt * rate > STABILITY_BOUND * (1.0 + SLACK) {
        return Err(Error::Range {
            what: "dt·rate",
            value: dt * rate,
            lo: 0.0,
            hi: STABILITY_BOUND,
        });
    }
    Ok(())
}

fn schrodinger_rhs(schedule: &PulseSchedule, t: f64, psi: &Vec3) -> Vec3 {
    let (o1, o2) = schedule.envelope_at(t);
    // −i H ψ with H tridiagonal and real
    Vec3::new(
        -I * c(o1) * psi[1],
        -I * (c(o1) * psi[0] + c(o2) * psi[2]),
        -I * c(o2) * psi[1],
    )
}

/// RK4 integration of `i∂t|ψ⟩ = H(t)|ψ⟩` over the schedule.
///
/// Each sample interval is split into `ceil(spacing/dt)` equal steps, so the
/// trajectory is reported on the schedule's own time grid. Reported states
/// are renormalized; the integrated vector is not.
pub fn evolve_schrodinger(initial: &PureState, schedule: &PulseSchedule, dt: f64) -> Result<Trajectory<PureState>> {
    check_dt(dt)?;
    let spacing = schedule.spacing();
    if dt > spacing * (1.0 + 1e-9) {
        return Err(Error::Range {
            what: "dt",
            value: dt,
            lo: 0.0,
            hi: spacing,
        });
    }
    check_stability(dt, schedule.peak_field())?;
    let sub = ((spacing / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = spacing / sub as f64;

    let times = schedule.times().to_vec();
    let mut states = Vec::with_capacity(times.len());
    let mut psi = *initial.amplitudes();
    let mut max_drift = 0.0_f64;
    states.push(*initial);
    for k in 0..times.len() - 1 {
        let t0 = times[k];
        for j in 0..sub {
            let t = t0 + j as f64 * h;
            let k1 = schrodinger_rhs(schedule, t, &psi);
            let k2 = schrodinger_rhs(schedule, t + 0.5 * h, &(psi + k1 * c(0.5 * h)));
            let k3 = schrodinger_rhs(schedule, t + 0.5 * h, &(psi + k2 * c(0.5 * h)));
            let k4 = schrodinger_rhs(schedule, t + h, &(psi + k3 * c(h)));
            psi += (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(h / 6.0);
        }
        let norm = psi.norm();
        let drift = (norm - 1.0).abs();
        if !norm.is_finite() || drift > DRIFT_LIMIT {
            return Err(Error::StepSize {
                quantity: "norm",
                drift,
                time: times[k + 1],
            });
        }
        max_drift = max_drift.max(drift);
        states.push(PureState::from_vector_unchecked(psi / c(norm)));
    }
    Ok(Trajectory {
        times,
        states,
        max_drift,
    })
}

struct Lindbladian<'a> {
    schedule: Option<&'a PulseSchedule>,
    jumps: Vec<Mat3>,
    /// Σ L†L / 2
    decay: Mat3,
}

impl<'a> Lindbladian<'a> {
    fn new(rates: &DecayRates, schedule: Option<&'a PulseSchedule>) -> Self {
        let jumps: Vec<Mat3> = [
            (rates.gamma_10, sigma(0, 1)),
            (rates.gamma_21, sigma(1, 2)),
            (rates.deph_1, sigma(1, 1)),
            (rates.deph_2, sigma(2, 2)),
        ]
        .into_iter()
        .filter(|(r, _)| *r > 0.0)
        .map(|(r, op)| op * c(r.sqrt()))
        .collect();
        let decay = jumps.iter().fold(Mat3::zeros(), |acc, l| acc + l.adjoint() * l) * c(0.5);
        Self { schedule, jumps, decay }
    }

    fn apply(&self, t: f64, rho: &Mat3) -> Mat3 {
        let mut out = -(self.decay * rho + rho * self.decay);
        if let Some(s) = self.schedule {
            let (o1, o2) = s.envelope_at(t);
            if o1 != 0.0 || o2 != 0.0 {
                let h = drive_matrix(o1, o2);
                out += (h * rho - rho * h) * (-I);
            }
        }
        for l in &self.jumps {
            out += l * rho * l.adjoint();
        }
        out
    }
}

/// RK4 integration of the Lindblad equation with sequential decay
/// `√Γ10 |0⟩⟨1|`, `√Γ21 |1⟩⟨2|` and dephasing `√γj |j⟩⟨j|`.
///
/// Integrates over `[0, t_end]` with `ceil(t_end/dt)` equal steps and
/// reports every `stride`-th step plus the final one. The optional schedule
/// drives the system for `t ≤ τ` and is off afterwards.
pub fn evolve_lindblad(
    initial: &DensityMatrix,
    rates: &DecayRates,
    schedule: Option<&PulseSchedule>,
    dt: f64,
    t_end: f64,
    stride: usize,
) -> Result<Trajectory<DensityMatrix>> {
    check_dt(dt)?;
    require_finite("t_end", t_end)?;
    if t_end < 0.0 {
        return Err(invalid(format!("t_end must be ≥ 0, got {t_end}")));
    }
    if stride == 0 {
        return Err(invalid("stride must be ≥ 1"));
    }
    let peak = schedule.map_or(0.0, |s| s.peak_field());
    check_stability(dt, rates.max_rate().max(peak))?;
    let n_steps = ((t_end / dt) * (1.0 - 1e-12)).ceil() as usize;
    let h = if n_steps == 0 { 0.0 } else { t_end / n_steps as f64 };

    let gen = Lindbladian::new(rates, schedule);
    let mut rho = *initial.matrix();
    let mut times = vec![0.0];
    let mut states = vec![*initial];
    let mut max_drift = 0.0_f64;
    for step in 0..n_steps {
        let t = step as f64 * h;
        let k1 = gen.apply(t, &rho);
        let k2 = gen.apply(t + 0.5 * h, &(rho + k1 * c(0.5 * h)));
        let k3 = gen.apply(t + 0.5 * h, &(rho + k2 * c(0.5 * h)));
        let k4 = gen.apply(t + h, &(rho + k3 * c(h)));
        rho += (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(h / 6.0);
        let done = step + 1;
        if done % stride == 0 || done == n_steps {
            let now = if done == n_steps { t_end } else { done as f64 * h };
            let tr = rho.trace();
            let drift = (tr - c(1.0)).norm();
            if !drift.is_finite() || drift > DRIFT_LIMIT {
                return Err(Error::StepSize {
                    quantity: "trace",
                    drift,
                    time: now,
                });
            }
            max_drift = max_drift.max(drift);
            times.push(now);
            states.push(DensityMatrix::from_matrix_unchecked(rho));
        }
    }
    Ok(Trajectory {
        times,
        states,
        max_drift,
    })
}

/// Closed-form populations `(ϱ00, ϱ11, ϱ22)` of the free decay from |2⟩.
pub fn analytic_populations(t: f64, rates: &DecayRates) -> Result<[f64; 3]> {
    require_finite("t", t)?;
    if t < 0.0 {
        return Err(Error::Range {
            what: "t",
            value: t,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let (g10, g21) = (rates.gamma_10, rates.gamma_21);
    let p2 = (-g21 * t).exp();
    let delta = g10 - g21;
    // Γ21 (e^{−Γ21 t} − e^{−Γ10 t}) / δ with the slower exponential factored
    // out, so it stays accurate as δ → 0 and cannot overflow
    let p1 = if delta == 0.0 {
        g21 * t * p2
    } else if delta > 0.0 {
        -g21 * p2 * (-delta * t).exp_m1() / delta
    } else {
        g21 * (-g10 * t).exp() * (delta * t).exp_m1() / delta
    };
    Ok([1.0 - p1 - p2, p1, p2])
}

/// `Re Tr[ρ H0]` in rad/s.
pub fn instantaneous_energy(state: &DensityMatrix, h0: &HermitianOperator) -> f64 {
    (state.matrix() * h0.matrix()).trace().re
}

/// `|⟨E0(t)|ψ(t)⟩|` along a Schrödinger trajectory on the schedule grid.
/// Points where the drive vanishes are skipped.
pub fn dark_state_overlap(traj: &Trajectory<PureState>, schedule: &PulseSchedule) -> Vec<f64> {
    traj.times
        .iter()
        .zip(&traj.states)
        .filter_map(|(t, psi)| {
            let (o1, o2) = schedule.envelope_at(*t);
            let db = crate::qutrit::dark_bright_states(o1, o2).ok()?;
            Some(db.dark.inner(psi).norm())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::{discretize, ChargeMode, ProtocolFamily, ProtocolTag};
    use crate::qutrit::{build_bare_hamiltonian, units, BatteryLevels};
    use std::f64::consts::PI;

    fn qab(tau: f64, mode: ChargeMode, n: usize) -> PulseSchedule {
        let f = ProtocolFamily::new(ProtocolTag::QabQuadratic, 2.0 * PI * 10e6, tau, mode).unwrap();
        discretize(&f, n, None).unwrap()
    }

    #[test]
    fn populations_at_endpoints() {
        let r = DecayRates::sequential(51.4e3, 79.7e3).unwrap();
        assert_eq!(analytic_populations(0.0, &r).unwrap(), [0.0, 0.0, 1.0]);
        let p = analytic_populations(1e-2, &r).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12 && p[2].abs() < 1e-12);
        assert!(analytic_populations(-1.0, &r).is_err());
    }

    #[test]
    fn populations_at_ten_microseconds() {
        let r = DecayRates::sequential(51.4e3, 79.7e3).unwrap();
        let p = analytic_populations(10e-6, &r).unwrap();
        for (got, want) in p.iter().zip([0.134, 0.415, 0.451]) {
            assert!((got - want).abs() < 5e-4, "{p:?}");
        }
    }

    #[test]
    fn degenerate_rates_are_continuous() {
        let g = 6e4;
        let eq = analytic_populations(7e-6, &DecayRates::sequential(g, g).unwrap()).unwrap();
        let near = analytic_populations(7e-6, &DecayRates::sequential(g * (1.0 + 1e-9), g).unwrap()).unwrap();
        assert!((eq[1] - g * 7e-6 * (-g * 7e-6).exp()).abs() < 1e-15);
        assert!((eq[1] - near[1]).abs() < 1e-9);
    }

    #[test]
    fn dephasing_from_times_is_clamped() {
        let r = DecayRates::from_times(19.4e-6, 12.5e-6, 26.7e-6, 9.9e-6).unwrap();
        assert!((r.deph_1 - (1.0 / 26.7e-6 - 0.5 / 19.4e-6)).abs() < 1e-6);
        let r = DecayRates::from_times(1.0, 1.0, 3.0, 3.0).unwrap();
        assert_eq!((r.deph_1, r.deph_2), (0.0, 0.0));
        assert!(DecayRates::new(-1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn zero_drive_leaves_state_unchanged() {
        let f = ProtocolFamily::new(ProtocolTag::LinearRamp, 1e6, 1e-6, ChargeMode::Stable).unwrap();
        let zero = PulseSchedule::new(vec![0.0, 0.5e-6, 1e-6], vec![0.0; 3], vec![0.0; 3], f).unwrap();
        let psi = PureState::normalized(Vec3::new(c(1.0), I, c(-0.5))).unwrap();
        let traj = evolve_schrodinger(&psi, &zero, 1e-8).unwrap();
        assert_eq!(traj.last().unwrap().1, &psi);

        let rho = DensityMatrix::basis(1);
        let free = DecayRates::sequential(0.0, 0.0).unwrap();
        let traj = evolve_lindblad(&rho, &free, None, 1e-9, 1e-6, 100).unwrap();
        for s in &traj.states {
            assert_eq!(s.matrix(), rho.matrix());
        }
    }

    #[test]
    fn schrodinger_rejects_coarse_steps() {
        let s = qab(100e-9, ChargeMode::Stable, 101);
        let psi = PureState::basis(0);
        assert!(matches!(
            evolve_schrodinger(&psi, &s, 2e-9),
            Err(Error::Range { what: "dt", .. })
        ));
        let s = qab(100e-9, ChargeMode::Stable, 11);
        assert!(matches!(
            evolve_schrodinger(&psi, &s, 5e-9),
            Err(Error::Range { what: "dt·rate", .. })
        ));
    }

    #[test]
    fn stable_qab_transfers_population() {
        let s = qab(600e-9, ChargeMode::Stable, 2001);
        let traj = evolve_schrodinger(&PureState::basis(0), &s, 0.1e-9).unwrap();
        let (_, last) = traj.last().unwrap();
        assert!(last.populations()[2] >= 0.99);
        assert_eq!(traj.times.len(), 2001);
    }

    #[test]
    fn unstable_energy_oscillates() {
        let s = qab(200e-9, ChargeMode::Unstable, 2001);
        let traj = evolve_schrodinger(&PureState::basis(0), &s, 0.1e-9).unwrap();
        let h0 = build_bare_hamiltonian(&BatteryLevels::transmon());
        let e: Vec<f64> = traj
            .states
            .iter()
            .map(|p| instantaneous_energy(&p.to_density(), &h0))
            .collect();
        let turns = e.windows(3).filter(|w| (w[1] - w[0]) * (w[2] - w[1]) < 0.0).count();
        assert!(turns >= 4, "only {turns} turning points");
    }

    #[test]
    fn energy_of_top_level() {
        let h0 = build_bare_hamiltonian(&BatteryLevels::transmon());
        let e = instantaneous_energy(&DensityMatrix::basis(2), &h0);
        assert!((e - 2.0 * PI * 12.277e9).abs() < 1e-3);
        assert_eq!(instantaneous_energy(&DensityMatrix::basis(0), &h0), 0.0);
        assert!((units::rad_s_to_uev(e) - 50.7736).abs() < 1e-3);
    }

    #[test]
    fn lindblad_requires_small_steps() {
        let r = DecayRates::sequential(1e6, 1e6).unwrap();
        assert!(evolve_lindblad(&DensityMatrix::basis(2), &r, None, 1e-7, 1e-6, 1).is_err());
        assert!(evolve_lindblad(&DensityMatrix::basis(2), &r, None, 1e-8, 1e-6, 0).is_err());
    }

    #[test]
    fn lindblad_output_grid() {
        let r = DecayRates::transmon();
        let traj = evolve_lindblad(&DensityMatrix::basis(2), &r, None, 1e-9, 1e-6, 100).unwrap();
        assert_eq!(traj.times.len(), 11);
        assert_eq!(*traj.times.last().unwrap(), 1e-6);
    }
}

//! Charging runs from |0⟩ and duration sweeps.
//!
//! A single run drives the battery with one schedule and records the
//! ergotropy along the way. A sweep repeats this over protocol durations τ
//! and locates the shortest τ whose final ergotropy reaches the threshold.

use serde::{Deserialize, Serialize};

use crate::brachistochrone::{solve_unconstrained, BoundaryValues};
use crate::dynamics::{evolve_schrodinger, Trajectory};
use crate::ergotropy::{charging_metrics, ChargingMetrics, ErgotropyTrace};
use crate::error::{invalid, Error, Result};
use crate::pulse::{discretize, ChargeMode, ProtocolFamily, ProtocolTag, PulseSchedule, DEFAULT_SAMPLES};
use crate::qutrit::{build_bare_hamiltonian, BatteryLevels, PureState};

/// Grid used for the unconstrained solution that seeds numerical schedules.
pub const SOLVER_GRID: usize = 2001;

/// One charging run.
#[derive(Debug, Clone)]
pub struct ChargeRun {
    pub schedule: PulseSchedule,
    pub trajectory: Trajectory<PureState>,
    pub trace: ErgotropyTrace,
}

impl ChargeRun {
    pub fn final_fraction(&self) -> f64 {
        let t = &self.trace;
        t.ergotropy[t.len() - 1] / t.normalization
    }
}

/// Samples for a run of duration `tau`: at most the default count, and
/// never so many that the spacing drops below `dt`.
pub fn sample_count(tau: f64, dt: f64) -> usize {
    let fit = (tau / dt * (1.0 + 1e-12)).floor() as usize + 1;
    fit.clamp(2, DEFAULT_SAMPLES)
}

/// Unconstrained solution for `mode` on the unit interval, the seed for
/// every numerical-family schedule.
pub fn unconstrained_seed(mode: ChargeMode, omega_max: f64) -> Result<PulseSchedule> {
    Ok(solve_unconstrained(&BoundaryValues::symmetric(mode), 1.0, omega_max, SOLVER_GRID)?.schedule)
}

/// Drives |0⟩ with `family` and records its ergotropy at every sample.
pub fn charge(
    family: &ProtocolFamily,
    levels: &BatteryLevels,
    dt: f64,
    solution: Option<&PulseSchedule>,
) -> Result<ChargeRun> {
    let schedule = discretize(family, sample_count(family.tau, dt), solution)?;
    let trajectory = evolve_schrodinger(&PureState::basis(0), &schedule, dt)?;
    let h0 = build_bare_hamiltonian(levels);
    let trace = ErgotropyTrace::from_states(&trajectory.times, &trajectory.states, &h0)?;
    Ok(ChargeRun {
        schedule,
        trajectory,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau: f64,
    pub final_fraction: f64,
    /// First time within the run at which the threshold is met.
    pub run_tau_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub tag: ProtocolTag,
    pub mode: ChargeMode,
    pub points: Vec<SweepPoint>,
    /// Shortest duration whose final ergotropy reaches the threshold,
    /// interpolated between sweep points; `None` if no duration does.
    pub metrics: Option<ChargingMetrics>,
}

/// Charges with every duration in `taus` and extracts the charging time.
///
/// The numerical family needs the unconstrained seed for `mode`.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    tag: ProtocolTag,
    mode: ChargeMode,
    omega_max: f64,
    taus: &[f64],
    levels: &BatteryLevels,
    dt: f64,
    threshold: f64,
    solution: Option<&PulseSchedule>,
) -> Result<Sweep> {
    if taus.is_empty() || taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("tau sweep must be non-empty and strictly ascending"));
    }
    let mut points = Vec::with_capacity(taus.len());
    let mut finals = Vec::with_capacity(taus.len());
    let mut normalization = 1.0;
    for &tau in taus {
        let family = ProtocolFamily::new(tag, omega_max, tau, mode)?;
        let run = charge(&family, levels, dt, solution)?;
        let run_tau_c = match charging_metrics(&run.trace, threshold) {
            Ok(m) => Some(m.tau_c),
            Err(Error::NotCharged { .. }) => None,
            Err(e) => return Err(e),
        };
        normalization = run.trace.normalization;
        finals.push(run.trace.ergotropy[run.trace.len() - 1]);
        points.push(SweepPoint {
            tau,
            final_fraction: run.final_fraction(),
            run_tau_c,
        });
    }
    Ok(Sweep {
        tag,
        mode,
        points,
        metrics: sweep_metrics(taus, finals, normalization, threshold)?,
    })
}

/// Charging time over durations: the final ergotropies (μeV) of runs with
/// durations `taus` are read as a trace in τ. `None` if no run charges.
pub fn sweep_metrics(
    taus: &[f64],
    finals: Vec<f64>,
    normalization: f64,
    threshold: f64,
) -> Result<Option<ChargingMetrics>> {
    let trace = ErgotropyTrace::new(taus.to_vec(), finals, normalization)?;
    match charging_metrics(&trace, threshold) {
        Ok(m) => Ok(Some(m)),
        Err(Error::NotCharged { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sample_count_respects_dt() {
        assert_eq!(sample_count(600e-9, 0.1e-9), 2001);
        assert_eq!(sample_count(100e-9, 0.1e-9), 1001);
        assert_eq!(sample_count(0.05e-9, 0.1e-9), 2);
    }

    #[test]
    fn long_stable_run_charges_fully() {
        let f = ProtocolFamily::new(ProtocolTag::QabQuadratic, 2.0 * PI * 10e6, 600e-9, ChargeMode::Stable).unwrap();
        let run = charge(&f, &BatteryLevels::transmon(), 0.1e-9, None).unwrap();
        assert!(run.final_fraction() > 0.99);
    }

    #[test]
    fn sweep_rejects_unsorted_durations() {
        let lv = BatteryLevels::transmon();
        let r = sweep(
            ProtocolTag::LinearRamp,
            ChargeMode::Stable,
            1e7,
            &[2e-7, 1e-7],
            &lv,
            1e-10,
            0.99,
            None,
        );
        assert!(r.is_err());
        let r = sweep(
            ProtocolTag::LinearRamp,
            ChargeMode::Stable,
            1e7,
            &[],
            &lv,
            1e-10,
            0.99,
            None,
        );
        assert!(r.is_err());
    }
}

//! Ergotropy, passive states and charging figures of merit.

use serde::{Deserialize, Serialize};

use crate::dynamics::{analytic_populations, DecayRates, QuantumState};
use crate::error::{invalid, Error, Result};
use crate::linalg::{c, jacobi_eigh, outer, Mat3, Vec3};
use crate::qutrit::{units, BatteryLevels, DensityMatrix, HermitianOperator};

/// Default fraction of the maximum ergotropy that counts as charged.
pub const DEFAULT_THRESHOLD: f64 = 0.99;
const TRACE_SLACK: f64 = 1e-9;

/// Energies of `h0` in ascending order with their eigenvectors.
fn energy_basis(h0: &HermitianOperator) -> ([f64; 3], [Vec3; 3]) {
    let (vals, vecs) = jacobi_eigh(h0.matrix());
    let mut idx = [0usize, 1, 2];
    // stable sort keeps basis order on degenerate levels
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    (idx.map(|k| vals[k]), idx.map(|k| vecs.column(k).into_owned()))
}

/// Extractable work `Tr[ρH0] − Tr[ρ_passive H0]`, in the units of `h0`.
pub fn ergotropy(state: &DensityMatrix, h0: &HermitianOperator) -> f64 {
    let (energies, _) = energy_basis(h0);
    let spectrum = state.eigenvalues_descending();
    let mean = (state.matrix() * h0.matrix()).trace().re;
    let passive: f64 = spectrum.iter().zip(&energies).map(|(p, e)| p * e).sum();
    (mean - passive).max(0.0)
}

/// Same spectrum as `state`, diagonal in the energy basis with the largest
/// eigenvalue on the lowest level.
pub fn passive_state(state: &DensityMatrix, h0: &HermitianOperator) -> DensityMatrix {
    let (_, basis) = energy_basis(h0);
    let spectrum = state.eigenvalues_descending();
    let m = spectrum
        .iter()
        .zip(&basis)
        .fold(Mat3::zeros(), |acc, (p, v)| acc + outer(v, v) * c(*p));
    DensityMatrix::from_matrix_unchecked(m)
}

/// Ergotropy of a diagonal state with populations `p` and level energies
/// `0 < e1 < e2`, by population ordering.
fn diagonal_ergotropy(p: [f64; 3], e1: f64, e2: f64) -> f64 {
    let [p0, p1, p2] = p;
    let value = if p2 >= p1 && p1 >= p0 {
        e2 * (p2 - p0)
    } else if p2 >= p0 && p0 >= p1 {
        e1 * (p1 - p0) + e2 * (p2 - p1)
    } else if p1 >= p2 && p2 >= p0 {
        e1 * (p1 - p2) + e2 * (p2 - p0)
    } else if p1 >= p0 && p0 >= p2 {
        e1 * (p1 - p0)
    } else if p0 >= p2 && p2 >= p1 {
        (e2 - e1) * (p2 - p1)
    } else {
        0.0
    };
    value.max(0.0)
}

/// Closed-form ergotropy (rad/s) during free decay from |2⟩.
///
/// Coherences stay zero, so the state is diagonal and its passive
/// arrangement is fixed by the ordering of the three populations.
pub fn self_discharge_ergotropy(t: f64, rates: &DecayRates, levels: &BatteryLevels) -> Result<f64> {
    let p = analytic_populations(t, rates)?;
    let e = levels.energies();
    Ok(diagonal_ergotropy(p, e[1], e[2]))
}

/// A time at which two populations of the free decay are equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub pair: &'static str,
    pub time: f64,
}

const CROSSING_PAIRS: [(&str, usize, usize); 3] = [("p2=p1", 2, 1), ("p2=p0", 2, 0), ("p1=p0", 1, 0)];
const CROSSING_SCAN: usize = 4000;

/// The three population crossings of the free decay from |2⟩, sorted by
/// time. Each root is bracketed on a scan of `(0, 10/min Γ]` and refined
/// by bisection.
pub fn crossing_times(rates: &DecayRates) -> Result<[Crossing; 3]> {
    let slowest = rates.gamma_10.min(rates.gamma_21);
    if slowest <= 0.0 {
        return Err(invalid("crossing times need both decay rates > 0"));
    }
    let t_max = 10.0 / slowest;
    let diff = |t: f64, a: usize, b: usize| -> Result<f64> {
        let p = analytic_populations(t, rates)?;
        Ok(p[a] - p[b])
    };
    let mut out = Vec::with_capacity(3);
    for (pair, a, b) in CROSSING_PAIRS {
        let grid = |k: usize| t_max * k as f64 / CROSSING_SCAN as f64;
        let mut bracket = None;
        let mut prev = diff(grid(1), a, b)?;
        for k in 2..=CROSSING_SCAN {
            let cur = diff(grid(k), a, b)?;
            if prev == 0.0 || prev.signum() != cur.signum() {
                bracket = Some((grid(k - 1), grid(k)));
                break;
            }
            prev = cur;
        }
        let (mut lo, mut hi) = bracket.ok_or(Error::NoCrossing { pair })?;
        let f_lo = diff(lo, a, b)?;
        while hi - lo > 1e-12 * hi {
            let mid = 0.5 * (lo + hi);
            let f_mid = diff(mid, a, b)?;
            if f_mid == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if f_mid.signum() == f_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(Crossing {
            pair,
            time: 0.5 * (lo + hi),
        });
    }
    out.sort_by(|x, y| x.time.total_cmp(&y.time));
    Ok([out[0], out[1], out[2]])
}

/// Ergotropy samples in μeV, normalized by the maximum ergotropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgotropyTrace {
    pub times: Vec<f64>,
    pub ergotropy: Vec<f64>,
    pub normalization: f64,
}

impl ErgotropyTrace {
    pub fn new(times: Vec<f64>, ergotropy: Vec<f64>, normalization: f64) -> Result<Self> {
        if times.is_empty() || times.len() != ergotropy.len() {
            return Err(invalid(format!(
                "trace needs equal non-zero lengths, got {} times and {} values",
                times.len(),
                ergotropy.len()
            )));
        }
        if !(normalization > 0.0 && normalization.is_finite()) {
            return Err(invalid(format!("normalization must be > 0, got {normalization}")));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("trace times must be finite and ascending"));
        }
        let hi = normalization * (1.0 + TRACE_SLACK);
        if let Some(bad) = ergotropy.iter().find(|e| !(**e >= 0.0 && **e <= hi)) {
            return Err(invalid(format!("ergotropy {bad} outside [0, {normalization}]")));
        }
        Ok(Self {
            times,
            ergotropy,
            normalization,
        })
    }

    /// Trace of `ergotropy(state)` along a trajectory, with the maximum
    /// ergotropy of `h0` as normalization.
    pub fn from_states<S: QuantumState>(times: &[f64], states: &[S], h0: &HermitianOperator) -> Result<Self> {
        let (energies, _) = energy_basis(h0);
        let e_max = units::rad_s_to_uev(energies[2] - energies[0]);
        let values = states
            .iter()
            .map(|s| units::rad_s_to_uev(ergotropy(&s.density(), h0)).min(e_max))
            .collect();
        Self::new(times.to_vec(), values, e_max)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.ergotropy.iter().map(|e| e / self.normalization).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargingMetrics {
    /// First time the trace reaches `threshold · E_max` (s).
    pub tau_c: f64,
    /// `threshold · E_max / tau_c` (μeV/s).
    pub mean_power: f64,
    pub threshold: f64,
}

/// First threshold crossing of the trace, linearly interpolated.
pub fn charging_metrics(trace: &ErgotropyTrace, threshold: f64) -> Result<ChargingMetrics> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Range {
            what: "threshold",
            value: threshold,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let target = threshold * trace.normalization;
    let i = trace
        .ergotropy
        .iter()
        .position(|e| *e >= target)
        .ok_or(Error::NotCharged { threshold })?;
    let tau_c = if i == 0 {
        trace.times[0]
    } else {
        let (t0, t1) = (trace.times[i - 1], trace.times[i]);
        let (e0, e1) = (trace.ergotropy[i - 1], trace.ergotropy[i]);
        t0 + (target - e0) / (e1 - e0) * (t1 - t0)
    };
    Ok(ChargingMetrics {
        tau_c,
        mean_power: target / tau_c,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qutrit::build_bare_hamiltonian;

    fn h0() -> HermitianOperator {
        build_bare_hamiltonian(&BatteryLevels::transmon())
    }

    #[test]
    fn top_level_is_fully_extractable() {
        let e = units::rad_s_to_uev(ergotropy(&DensityMatrix::basis(2), &h0()));
        assert!((e - 50.7736).abs() < 1e-3);
    }

    #[test]
    fn passive_diagonal_states_have_none() {
        for p in [[1.0, 0.0, 0.0], [0.5, 0.3, 0.2], [0.4, 0.4, 0.2], [1.0 / 3.0; 3]] {
            assert_eq!(ergotropy(&DensityMatrix::diagonal(p).unwrap(), &h0()), 0.0);
        }
    }

    #[test]
    fn passive_state_of_top_level_is_ground() {
        let p = passive_state(&DensityMatrix::basis(2), &h0());
        assert!(p.trace_distance(&DensityMatrix::basis(0)) < 1e-14);
        let m = passive_state(&DensityMatrix::maximally_mixed(), &h0());
        assert!(m.trace_distance(&DensityMatrix::maximally_mixed()) < 1e-14);
    }

    #[test]
    fn discharge_law_limits() {
        let r = DecayRates::transmon();
        let l = BatteryLevels::transmon();
        assert_eq!(self_discharge_ergotropy(0.0, &r, &l).unwrap(), l.max_energy());
        assert_eq!(self_discharge_ergotropy(1e-3, &r, &l).unwrap(), 0.0);
        assert!(self_discharge_ergotropy(-1e-9, &r, &l).is_err());
    }

    #[test]
    fn every_ordering_branch_matches_general_form() {
        let h = h0();
        let e = BatteryLevels::transmon().energies();
        let base = [0.5, 0.3, 0.2];
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for perm in perms {
            let p = perm.map(|k| base[k]);
            let general = ergotropy(&DensityMatrix::diagonal(p).unwrap(), &h);
            let piecewise = diagonal_ergotropy(p, e[1], e[2]);
            assert!((general - piecewise).abs() < 1e-10 * e[2], "{p:?}");
        }
    }

    #[test]
    fn crossing_times_for_transmon_rates() {
        let x = crossing_times(&DecayRates::transmon()).unwrap();
        let names: Vec<_> = x.iter().map(|c| c.pair).collect();
        assert_eq!(names, ["p2=p1", "p2=p0", "p1=p0"]);
        for (got, want) in x.iter().zip([10.738e-6, 16.207e-6, 22.533e-6]) {
            assert!((got.time - want).abs() < 2e-9, "{got:?}");
        }
    }

    #[test]
    fn crossing_needs_positive_rates() {
        assert!(crossing_times(&DecayRates::sequential(0.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn metrics_interpolate() {
        let t = ErgotropyTrace::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 1.0], 1.0).unwrap();
        let m = charging_metrics(&t, 0.75).unwrap();
        assert!((m.tau_c - 1.5).abs() < 1e-15);
        assert!((m.mean_power - 0.5).abs() < 1e-15);
        assert!(matches!(charging_metrics(&t, 1.5), Err(Error::Range { .. })));
        let flat = ErgotropyTrace::new(vec![0.0, 1.0], vec![0.2, 0.2], 1.0).unwrap();
        assert!(matches!(charging_metrics(&flat, 0.9), Err(Error::NotCharged { .. })));
        let full = ErgotropyTrace::new(vec![3.0, 4.0], vec![1.0, 1.0], 1.0).unwrap();
        assert_eq!(charging_metrics(&full, 0.99).unwrap().tau_c, 3.0);
    }

    #[test]
    fn trace_rejects_out_of_range_values() {
        assert!(ErgotropyTrace::new(vec![0.0], vec![1.1], 1.0).is_err());
        assert!(ErgotropyTrace::new(vec![0.0], vec![-0.1], 1.0).is_err());
        assert!(ErgotropyTrace::new(vec![1.0, 0.0], vec![0.1, 0.1], 1.0).is_err());
        assert!(ErgotropyTrace::new(vec![], vec![], 1.0).is_err());
    }
}

//! Experiment runners. Each writes its data files plus a manifest into the
//! configured output directory and returns the manifest path.

use std::path::PathBuf;

use qutrit_battery::brachistochrone::{el_residual, residual_scale, SolverIteration};
use qutrit_battery::charging::{sample_count, unconstrained_seed};
use qutrit_battery::ergotropy::Crossing;
use qutrit_battery::io::{
    ergotropy_rows, measurement_rows, read_schedule, schedule_rows, trajectory_rows, ScheduleRow,
};
use qutrit_battery::{
    build_bare_hamiltonian, charge, classify, crossing_times, discretize, evolve_lindblad, functional_time,
    reconstruct, second_derivative_test, self_discharge_ergotropy, simulate_measurements, solve_unconstrained,
    sweep_metrics, units, BoundaryValues, ChargeMode, ChargingMetrics, Criticality, DensityMatrix, DischargeVerdict,
    ErgotropyTrace, Error as CoreError, ProtocolFamily, ProtocolTag, PulseSchedule, QuantumState,
};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Context};
use crate::manifest::OutputSink;

fn file_stem(tag: ProtocolTag, mode: ChargeMode) -> String {
    format!("{}_{}", tag.as_str(), mode.as_str())
}

/// Unconstrained solutions for both modes, solved once per run.
struct Seeds([PulseSchedule; 2]);

impl Seeds {
    fn solve(omega_max: f64) -> Result<Self, CliError> {
        let solve = |mode: ChargeMode| {
            unconstrained_seed(mode, omega_max).context(|| format!("solving the {mode} brachistochrone"))
        };
        Ok(Self([solve(ChargeMode::Stable)?, solve(ChargeMode::Unstable)?]))
    }

    fn for_tag(&self, tag: ProtocolTag, mode: ChargeMode) -> Option<&PulseSchedule> {
        (tag == ProtocolTag::NumericalUnconstrained).then(|| &self.0[mode as usize])
    }
}

fn families(omega_max: f64, tau: f64) -> Result<Vec<ProtocolFamily>, CliError> {
    let mut out = Vec::new();
    for tag in ProtocolTag::ALL {
        for mode in ChargeMode::ALL {
            out.push(ProtocolFamily::new(tag, omega_max, tau, mode).context(|| format!("{tag} {mode}"))?);
        }
    }
    Ok(out)
}

/// Schedule CSVs for every family and mode at `protocol.tau_s`.
pub fn cmd_protocol(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let mut sink = OutputSink::create(&cfg.output_dir)?;
    let seeds = Seeds::solve(cfg.omega_max)?;
    let tau = cfg.protocol.tau;
    for family in families(cfg.omega_max, tau)? {
        let (tag, mode) = (family.tag, family.mode);
        let schedule = discretize(&family, sample_count(tau, cfg.dt), seeds.for_tag(tag, mode))
            .context(|| format!("sampling {tag} {mode}"))?;
        let rows = schedule_rows(&schedule);
        let path = sink.write_csv(&format!("schedule_{}.csv", file_stem(tag, mode)), &rows)?;

        let back = read_schedule(&path, family).context(|| format!("re-reading {}", path.display()))?;
        if schedule_rows(&back) != rows {
            return Err(CliError::Validation(format!("{} does not round-trip", path.display())));
        }
        if tag == ProtocolTag::CycloidLinear {
            check_linear_constraint(&rows, cfg.omega_max)
                .map_err(|i| CliError::Validation(format!("{}: row {i} violates Ω1 + Ω2 = Ωmax", path.display())))?;
        }
    }
    sink.finish("protocol", &cfg.raw)
}

fn check_linear_constraint(rows: &[ScheduleRow], omega_max: f64) -> Result<(), usize> {
    match rows
        .iter()
        .position(|r| (r.omega1_rad_s + r.omega2_rad_s - omega_max).abs() > 1e-12 * omega_max)
    {
        Some(i) => Err(i),
        None => Ok(()),
    }
}

/// One row of `charge_summary.csv`. Charging time and power are empty when
/// the run never reaches the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub family: String,
    pub mode: String,
    pub tau_s: f64,
    pub final_fraction: f64,
    pub tau_c_s: Option<f64>,
    pub mean_power: Option<f64>,
}

/// Charging time over the whole duration sweep of one family and mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub family: String,
    pub mode: String,
    pub threshold: f64,
    pub tau_c_s: Option<f64>,
    /// μeV/s
    pub mean_power: Option<f64>,
}

/// Ergotropy traces for every family, mode and sweep duration.
pub fn cmd_charge(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let mut sink = OutputSink::create(&cfg.output_dir)?;
    let seeds = Seeds::solve(cfg.omega_max)?;
    let stride = cfg.raw.charge.trace_stride;
    let mut summary = Vec::new();
    let mut sweeps = Vec::new();
    for tag in ProtocolTag::ALL {
        for mode in ChargeMode::ALL {
            let mut finals = Vec::with_capacity(cfg.tau_sweep.len());
            let mut normalization = 1.0;
            for (k, &tau) in cfg.tau_sweep.iter().enumerate() {
                let family = ProtocolFamily::new(tag, cfg.omega_max, tau, mode).context(|| format!("{tag} {mode}"))?;
                let run = charge(&family, &cfg.levels, cfg.dt, seeds.for_tag(tag, mode))
                    .context(|| format!("charging {tag} {mode} at tau = {tau:e} s"))?;
                let rows = ergotropy_rows(&run.trace);
                let last = rows.len() - 1;
                let kept: Vec<_> = rows
                    .into_iter()
                    .enumerate()
                    .filter(|(i, _)| i % stride == 0 || *i == last)
                    .map(|(_, r)| r)
                    .collect();
                sink.write_csv(&format!("ergotropy_{}_{k:03}.csv", file_stem(tag, mode)), &kept)?;
                let metrics = run_metrics(&run.trace, cfg.threshold)?;
                summary.push(SummaryRow {
                    family: tag.as_str().into(),
                    mode: mode.as_str().into(),
                    tau_s: tau,
                    final_fraction: run.final_fraction(),
                    tau_c_s: metrics.map(|m| m.tau_c),
                    mean_power: metrics.map(|m| m.mean_power),
                });
                normalization = run.trace.normalization;
                finals.push(run.trace.ergotropy[run.trace.len() - 1]);
            }
            let m = sweep_metrics(&cfg.tau_sweep, finals, normalization, cfg.threshold)
                .context(|| format!("sweep metrics for {tag} {mode}"))?;
            sweeps.push(SweepSummary {
                family: tag.as_str().into(),
                mode: mode.as_str().into(),
                threshold: cfg.threshold,
                tau_c_s: m.map(|m| m.tau_c),
                mean_power: m.map(|m| m.mean_power),
            });
        }
    }
    sink.write_csv("charge_summary.csv", &summary)?;
    sink.write_json("charge_sweeps.json", &sweeps)?;
    sink.finish("charge", &cfg.raw)
}

fn run_metrics(trace: &ErgotropyTrace, threshold: f64) -> Result<Option<ChargingMetrics>, CliError> {
    match qutrit_battery::charging_metrics(trace, threshold) {
        Ok(m) => Ok(Some(m)),
        Err(CoreError::NotCharged { .. }) => Ok(None),
        Err(e) => Err(e).context(|| "charging metrics".into()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DischargeReport {
    /// Largest |numeric − analytic| in units of the maximum ergotropy.
    pub max_deviation: f64,
    pub crossings: Vec<Crossing>,
    pub verdict: DischargeVerdict,
}

/// Free decay from |2⟩⟨2|: numeric and closed-form ergotropy, population
/// crossings and the discharge-model verdict.
pub fn cmd_discharge(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let mut sink = OutputSink::create(&cfg.output_dir)?;
    let h0 = build_bare_hamiltonian(&cfg.levels);
    let d = &cfg.raw.discharge;
    let traj = evolve_lindblad(&DensityMatrix::basis(2), &cfg.rates, None, cfg.dt, d.t_end_s, d.stride)
        .context(|| format!("integrating the free decay with dt = {:e} s", cfg.dt))?;
    let numeric = ErgotropyTrace::from_states(&traj.times, &traj.states, &h0).context(|| "numeric ergotropy".into())?;
    let analytic_values = traj
        .times
        .iter()
        .map(|t| {
            self_discharge_ergotropy(*t, &cfg.rates, &cfg.levels)
                .map(|e| units::rad_s_to_uev(e).min(numeric.normalization))
        })
        .collect::<Result<Vec<_>, _>>()
        .context(|| "closed-form ergotropy".into())?;
    let analytic = ErgotropyTrace::new(traj.times.clone(), analytic_values, numeric.normalization)
        .context(|| "closed-form ergotropy".into())?;
    let max_deviation = numeric
        .ergotropy
        .iter()
        .zip(&analytic.ergotropy)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
        / numeric.normalization;

    sink.write_csv("discharge_trajectory.csv", &trajectory_rows(&traj, &h0))?;
    sink.write_csv("discharge_ergotropy_numeric.csv", &ergotropy_rows(&numeric))?;
    sink.write_csv("discharge_ergotropy_analytic.csv", &ergotropy_rows(&analytic))?;
    let report = DischargeReport {
        max_deviation,
        crossings: crossing_times(&cfg.rates).context(|| "crossing times".into())?.to_vec(),
        verdict: classify(&numeric).context(|| "classifying the discharge".into())?,
    };
    sink.write_json("discharge_report.json", &report)?;
    sink.finish("discharge", &cfg.raw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub t_s: f64,
    pub residual1: f64,
    pub residual2: f64,
    /// Residuals over `Ωpeak³/τ²`.
    pub relative1: f64,
    pub relative2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalRow {
    pub family: String,
    pub mode: String,
    pub tau_s: f64,
    pub functional_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub family: String,
    pub mode: String,
    /// `None` when the schedule is not a critical point of its problem.
    pub verdict: Option<Criticality>,
    pub lambda_terms: Vec<[f64; 2]>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrachistochroneReport {
    pub tau_s: f64,
    pub n_grid: usize,
    pub n_modes: usize,
    pub verdicts: Vec<VerdictEntry>,
}

/// Solves the unconstrained problem for both modes at `protocol.tau_s` and
/// evaluates the functional and second variation of all four families.
pub fn cmd_brachistochrone(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let mut sink = OutputSink::create(&cfg.output_dir)?;
    let b = &cfg.raw.brachistochrone;
    let tau = cfg.protocol.tau;
    let mut solutions = Vec::new();
    for mode in ChargeMode::ALL {
        let sol = solve_unconstrained(&BoundaryValues::symmetric(mode), tau, cfg.omega_max, b.n_grid)
            .context(|| format!("solving the {mode} brachistochrone"))?;
        let stem = file_stem(ProtocolTag::NumericalUnconstrained, mode);
        sink.write_csv(&format!("solution_{stem}.csv"), &schedule_rows(&sol.schedule))?;
        sink.write_csv::<SolverIteration>(&format!("solver_log_{stem}.csv"), &sol.iterations)?;
        let (r1, r2) = el_residual(&sol.schedule).context(|| "EL residual".into())?;
        let times = &sol.schedule.times()[1..sol.schedule.len() - 1];
        let scale = residual_scale(&sol.schedule);
        let rows: Vec<ResidualRow> = times
            .iter()
            .zip(r1.iter().zip(&r2))
            .map(|(t, (a, b))| ResidualRow {
                t_s: *t,
                residual1: *a,
                residual2: *b,
                relative1: a / scale,
                relative2: b / scale,
            })
            .collect();
        sink.write_csv(&format!("el_residual_{stem}.csv"), &rows)?;
        solutions.push(sol.schedule);
    }

    let mut functionals = Vec::new();
    let mut verdicts = Vec::new();
    for family in families(cfg.omega_max, tau)? {
        let (tag, mode) = (family.tag, family.mode);
        let schedule = if tag == ProtocolTag::NumericalUnconstrained {
            solutions[mode as usize].clone()
        } else {
            discretize(&family, b.n_grid, None).context(|| format!("sampling {tag} {mode}"))?
        };
        let value = functional_time(&schedule)
            .context(|| format!("functional of {tag} {mode}"))?
            .value;
        functionals.push(FunctionalRow {
            family: tag.as_str().into(),
            mode: mode.as_str().into(),
            tau_s: tau,
            functional_s: value,
        });
        let entry = match second_derivative_test(&schedule, b.n_modes) {
            Ok(v) => VerdictEntry {
                family: tag.as_str().into(),
                mode: mode.as_str().into(),
                verdict: Some(v.verdict),
                lambda_terms: v.lambda_terms,
                note: None,
            },
            Err(e @ CoreError::NotCriticalPoint { .. }) => VerdictEntry {
                family: tag.as_str().into(),
                mode: mode.as_str().into(),
                verdict: None,
                lambda_terms: Vec::new(),
                note: Some(e.to_string()),
            },
            Err(e) => return Err(e).context(|| format!("second-derivative test of {tag} {mode}")),
        };
        verdicts.push(entry);
    }
    sink.write_csv("functionals.csv", &functionals)?;
    sink.write_json(
        "brachistochrone_report.json",
        &BrachistochroneReport {
            tau_s: tau,
            n_grid: b.n_grid,
            n_modes: b.n_modes,
            verdicts,
        },
    )?;
    sink.finish("brachistochrone", &cfg.raw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyReport {
    pub family: String,
    pub mode: String,
    pub tau_s: f64,
    pub sample_time_s: f64,
    pub seed: u64,
    pub shots: Option<u64>,
    pub true_populations: [f64; 3],
    pub fidelity_exact: f64,
    pub fidelity_sampled: Option<f64>,
    pub trace_distance_sampled: Option<f64>,
}

/// Reconstructs a state taken from a charging run of the configured
/// protocol, from exact and from sampled outcomes.
pub fn cmd_tomography(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let seed = cfg
        .seed
        .ok_or_else(|| CliError::Usage("tomography needs a seed (--seed N or seed = N)".into()))?;
    let mut sink = OutputSink::create(&cfg.output_dir)?;
    let family = cfg.protocol;
    let solution = match family.tag {
        ProtocolTag::NumericalUnconstrained => Some(
            unconstrained_seed(family.mode, cfg.omega_max)
                .context(|| format!("solving the {} brachistochrone", family.mode))?,
        ),
        _ => None,
    };
    let run = charge(&family, &cfg.levels, cfg.dt, solution.as_ref())
        .context(|| format!("charging {} {}", family.tag, family.mode))?;
    let last = run.trajectory.len() - 1;
    let k = (cfg.raw.tomography.sample_fraction * last as f64).round() as usize;
    let state = run.trajectory.states[k].density();
    let sample_time = run.trajectory.times[k];

    let exact = simulate_measurements(&state, None, seed).context(|| "exact outcomes".into())?;
    sink.write_csv("tomography_exact.csv", &measurement_rows(&exact))?;
    let fidelity_exact = reconstruct(&exact)
        .context(|| "reconstructing exact outcomes".into())?
        .fidelity(&state);
    let shots = cfg.raw.tomography.shots;
    let (fidelity_sampled, trace_distance_sampled) = match shots {
        Some(n) => {
            let rec = simulate_measurements(&state, Some(n), seed).context(|| "sampling outcomes".into())?;
            sink.write_csv("tomography_sampled.csv", &measurement_rows(&rec))?;
            let back = reconstruct(&rec).context(|| "reconstructing sampled outcomes".into())?;
            (Some(back.fidelity(&state)), Some(back.trace_distance(&state)))
        }
        None => (None, None),
    };
    sink.write_json(
        "tomography_report.json",
        &TomographyReport {
            family: family.tag.as_str().into(),
            mode: family.mode.as_str().into(),
            tau_s: family.tau,
            sample_time_s: sample_time,
            seed,
            shots,
            true_populations: state.populations(),
            fidelity_exact,
            fidelity_sampled,
            trace_distance_sampled,
        },
    )?;
    sink.finish("tomography", &cfg.raw)
}

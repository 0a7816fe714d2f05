//! Three-level quantum battery toolkit: charging protocols, optimal
//! (brachistochrone) schedules, open-system dynamics, ergotropy, state
//! tomography and self-discharge analysis.
//!
//! Units: ħ = 1 internally, so energies and drive amplitudes are angular
//! frequencies in rad/s and times are in seconds. Ergotropy traces and
//! reports use μeV.

pub mod brachistochrone;
pub mod charging;
pub mod decay;
pub mod dynamics;
pub mod ergotropy;
pub mod error;
pub mod io;
pub mod linalg;
pub mod pulse;
pub mod qutrit;
pub mod tomography;

pub use brachistochrone::{
    functional_time, second_derivative_test, solve_unconstrained, AdiabaticFunctional, BoundaryValues, Constraint,
    Criticality, CriticalityVerdict,
};
pub use charging::{charge, sweep, sweep_metrics, ChargeRun, Sweep, SweepPoint};
pub use decay::{classify, fit_double_exp, fit_single_exp, DischargeModel, DischargeVerdict, ExpFit};
pub use dynamics::{
    analytic_populations, evolve_lindblad, evolve_schrodinger, instantaneous_energy, DecayRates, QuantumState,
    Trajectory,
};
pub use ergotropy::{
    charging_metrics, crossing_times, ergotropy, passive_state, self_discharge_ergotropy, ChargingMetrics,
    ErgotropyTrace,
};
pub use error::{Error, Result};
pub use pulse::{discretize, ChargeMode, ProtocolFamily, ProtocolTag, PulseSchedule};
pub use qutrit::{
    build_bare_hamiltonian, build_drive_hamiltonian, dark_bright_states, eig_hermitian, units, BatteryLevels,
    DensityMatrix, EigenSystem, HermitianOperator, PureState,
};
pub use tomography::{reconstruct, simulate_measurements, tomography_set, MeasurementRecord, TomographyRotation};

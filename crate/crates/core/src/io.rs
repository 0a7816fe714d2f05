//! CSV persistence for schedules, trajectories, ergotropy traces,
//! tomography records and solver logs.
//!
//! Floats are written in shortest round-trip form, so every file reads back
//! to the exact values that were written.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dynamics::{instantaneous_energy, QuantumState, Trajectory};
use crate::ergotropy::ErgotropyTrace;
use crate::error::{invalid, Result};
use crate::pulse::{ProtocolFamily, PulseSchedule};
use crate::qutrit::{units, HermitianOperator};
use crate::tomography::{MeasurementRecord, N_ROTATIONS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub t_s: f64,
    pub omega1_rad_s: f64,
    pub omega2_rad_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t_s: f64,
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub re_r01: f64,
    pub im_r01: f64,
    pub re_r02: f64,
    pub im_r02: f64,
    pub re_r12: f64,
    pub im_r12: f64,
    #[serde(rename = "energy_ueV")]
    pub energy_uev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgotropyRow {
    pub t_s: f64,
    #[serde(rename = "ergotropy_ueV")]
    pub ergotropy_uev: f64,
    pub fraction_of_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub rotation_index: usize,
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

pub fn schedule_rows(schedule: &PulseSchedule) -> Vec<ScheduleRow> {
    (0..schedule.len())
        .map(|i| ScheduleRow {
            t_s: schedule.times()[i],
            omega1_rad_s: schedule.omega1()[i],
            omega2_rad_s: schedule.omega2()[i],
        })
        .collect()
}

pub fn trajectory_rows<S: QuantumState>(traj: &Trajectory<S>, h0: &HermitianOperator) -> Vec<TrajectoryRow> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| {
            let rho = s.density();
            let m = rho.matrix();
            TrajectoryRow {
                t_s: *t,
                p0: m[(0, 0)].re,
                p1: m[(1, 1)].re,
                p2: m[(2, 2)].re,
                re_r01: m[(0, 1)].re,
                im_r01: m[(0, 1)].im,
                re_r02: m[(0, 2)].re,
                im_r02: m[(0, 2)].im,
                re_r12: m[(1, 2)].re,
                im_r12: m[(1, 2)].im,
                energy_uev: units::rad_s_to_uev(instantaneous_energy(&rho, h0)),
            }
        })
        .collect()
}

pub fn ergotropy_rows(trace: &ErgotropyTrace) -> Vec<ErgotropyRow> {
    trace
        .times
        .iter()
        .zip(&trace.ergotropy)
        .map(|(t, e)| ErgotropyRow {
            t_s: *t,
            ergotropy_uev: *e,
            fraction_of_max: e / trace.normalization,
        })
        .collect()
}

pub fn measurement_rows(record: &MeasurementRecord) -> Vec<MeasurementRow> {
    record
        .probabilities
        .iter()
        .enumerate()
        .map(|(i, p)| MeasurementRow {
            rotation_index: i + 1,
            p0: p[0],
            p1: p[1],
            p2: p[2],
        })
        .collect()
}

/// Serializes rows with a header line.
pub fn write_csv_to<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv_from<R: Read, T: DeserializeOwned>(reader: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Into::into))
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_csv_to(File::create(path)?, rows)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_csv_from(File::open(path)?)
}

/// Reads a schedule file back and revalidates it against `family`.
pub fn read_schedule(path: &Path, family: ProtocolFamily) -> Result<PulseSchedule> {
    let rows: Vec<ScheduleRow> = read_csv(path)?;
    PulseSchedule::new(
        rows.iter().map(|r| r.t_s).collect(),
        rows.iter().map(|r| r.omega1_rad_s).collect(),
        rows.iter().map(|r| r.omega2_rad_s).collect(),
        family,
    )
}

pub fn read_ergotropy_trace(path: &Path, normalization: f64) -> Result<ErgotropyTrace> {
    let rows: Vec<ErgotropyRow> = read_csv(path)?;
    ErgotropyTrace::new(
        rows.iter().map(|r| r.t_s).collect(),
        rows.iter().map(|r| r.ergotropy_uev).collect(),
        normalization,
    )
}

pub fn read_measurements(path: &Path, shots: Option<u64>) -> Result<MeasurementRecord> {
    let rows: Vec<MeasurementRow> = read_csv(path)?;
    if rows.len() != N_ROTATIONS {
        return Err(invalid(format!(
            "expected {N_ROTATIONS} rotations, found {}",
            rows.len()
        )));
    }
    let mut probabilities = [[0.0; 3]; N_ROTATIONS];
    for r in &rows {
        if !(1..=N_ROTATIONS).contains(&r.rotation_index) {
            return Err(invalid(format!("rotation index {} out of range", r.rotation_index)));
        }
        probabilities[r.rotation_index - 1] = [r.p0, r.p1, r.p2];
    }
    MeasurementRecord::new(probabilities, shots)
}

//! Experiment configuration.
//!
//! A TOML file with dotted keys, for example
//!
//! ```toml
//! dt_s = 1e-10
//! drive.omega_max_hz = 10e6
//! protocol.family = "qab_quadratic"
//! charge.tau_sweep_s = [100e-9, 200e-9, 400e-9, 600e-9]
//! ```
//!
//! Every key has a default, so an empty file is valid. Command-line
//! overrides use the same dotted names (`--set protocol.tau_s=2e-7`).
//! Frequencies given in Hz are converted with 2π to angular units.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use qutrit_battery::{units, BatteryLevels, ChargeMode, DecayRates, ProtocolFamily, ProtocolTag};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevelsSection {
    pub f01_hz: f64,
    pub f12_hz: f64,
}

impl Default for LevelsSection {
    fn default() -> Self {
        Self {
            f01_hz: 6.266e9,
            f12_hz: 6.011e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    /// Peak Rabi frequency Ωmax/2π.
    pub omega_max_hz: f64,
}

impl Default for DriveSection {
    fn default() -> Self {
        Self { omega_max_hz: 10e6 }
    }
}

/// Rates in 1/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesSection {
    pub gamma_10: f64,
    pub gamma_21: f64,
    pub deph_1: f64,
    pub deph_2: f64,
}

impl Default for RatesSection {
    fn default() -> Self {
        let r = DecayRates::transmon();
        Self {
            gamma_10: r.gamma_10,
            gamma_21: r.gamma_21,
            deph_1: r.deph_1,
            deph_2: r.deph_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub family: String,
    pub mode: String,
    pub tau_s: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            family: ProtocolTag::QabQuadratic.as_str().into(),
            mode: ChargeMode::Stable.as_str().into(),
            tau_s: 190e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChargeSection {
    pub tau_sweep_s: Vec<f64>,
    /// Every n-th sample of each ergotropy trace is written (plus the last).
    pub trace_stride: usize,
}

impl Default for ChargeSection {
    fn default() -> Self {
        Self {
            tau_sweep_s: (1..=300).map(|k| (2 * k) as f64 / 1e9).collect(),
            trace_stride: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DischargeSection {
    pub t_end_s: f64,
    /// Integration steps per reported sample.
    pub stride: usize,
}

impl Default for DischargeSection {
    fn default() -> Self {
        Self {
            t_end_s: 60e-6,
            stride: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BrachistochroneSection {
    pub n_grid: usize,
    pub n_modes: usize,
}

impl Default for BrachistochroneSection {
    fn default() -> Self {
        Self {
            n_grid: 8001,
            n_modes: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographySection {
    /// Omit for exact probabilities only.
    pub shots: Option<u64>,
    /// Position of the sampled state within the charging run, in [0, 1].
    pub sample_fraction: f64,
}

impl Default for TomographySection {
    fn default() -> Self {
        Self {
            shots: Some(100_000),
            sample_fraction: 0.5,
        }
    }
}

/// The configuration exactly as read, after overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawConfig {
    pub dt_s: f64,
    pub threshold: f64,
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub levels: LevelsSection,
    pub drive: DriveSection,
    pub rates: RatesSection,
    pub protocol: ProtocolSection,
    pub charge: ChargeSection,
    pub discharge: DischargeSection,
    pub brachistochrone: BrachistochroneSection,
    pub tomography: TomographySection,
}

impl Default for RawConfig {
    fn default() -> Self {
        Self {
            dt_s: 1e-10,
            threshold: 0.99,
            seed: None,
            output_dir: PathBuf::from("out"),
            levels: LevelsSection::default(),
            drive: DriveSection::default(),
            rates: RatesSection::default(),
            protocol: ProtocolSection::default(),
            charge: ChargeSection::default(),
            discharge: DischargeSection::default(),
            brachistochrone: BrachistochroneSection::default(),
            tomography: TomographySection::default(),
        }
    }
}

/// Validated configuration in solver units.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub levels: BatteryLevels,
    pub omega_max: f64,
    pub rates: DecayRates,
    pub protocol: ProtocolFamily,
    pub tau_sweep: Vec<f64>,
    pub dt: f64,
    pub threshold: f64,
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub raw: RawConfig,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `key=value`; the value is read as a TOML literal and falls back
/// to a bare string.
pub fn parse_override(arg: &str) -> Result<(String, Value), CliError> {
    let (key, value) = arg
        .split_once('=')
        .ok_or_else(|| usage(format!("override '{arg}' is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(usage(format!("override '{arg}' has an empty key")));
    }
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    Ok((key.to_string(), parsed))
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let mut parts = key.split('.').peekable();
    let mut cur = table;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| usage(format!("key '{key}': '{part}' is not a section")))?;
    }
    Err(usage(format!("empty key '{key}'")))
}

impl RawConfig {
    /// Builds from TOML text plus ordered overrides.
    pub fn from_toml(text: &str, overrides: &[(String, Value)]) -> Result<Self, CliError> {
        let mut table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| usage(format!("config: {e}")))?;
        for (k, v) in overrides {
            set_path(&mut table, k, v.clone())?;
        }
        Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| usage(format!("config: {e}")))
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Io {
                context: format!("reading {}", p.display()),
                source: e,
            })?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn validate(self) -> Result<ExperimentConfig, CliError> {
        let core = |e: qutrit_battery::Error| usage(format!("config: {e}"));
        let positive = |what: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(usage(format!("config: {what} must be positive, got {v}")))
            }
        };
        positive("dt_s", self.dt_s)?;
        positive("drive.omega_max_hz", self.drive.omega_max_hz)?;
        positive("discharge.t_end_s", self.discharge.t_end_s)?;
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(usage(format!(
                "config: threshold must be in (0, 1], got {}",
                self.threshold
            )));
        }
        let sweep = &self.charge.tau_sweep_s;
        if sweep.is_empty() {
            return Err(usage("config: charge.tau_sweep_s must not be empty"));
        }
        if sweep.iter().any(|t| !(t.is_finite() && *t > 0.0)) || sweep.windows(2).any(|w| w[1] <= w[0]) {
            return Err(usage(
                "config: charge.tau_sweep_s must be positive and strictly ascending",
            ));
        }
        if self.charge.trace_stride == 0 {
            return Err(usage("config: charge.trace_stride must be ≥ 1"));
        }
        if self.discharge.stride == 0 {
            return Err(usage("config: discharge.stride must be ≥ 1"));
        }
        if self.brachistochrone.n_modes == 0 {
            return Err(usage("config: brachistochrone.n_modes must be ≥ 1"));
        }
        if !(0.0..=1.0).contains(&self.tomography.sample_fraction) {
            return Err(usage("config: tomography.sample_fraction must be in [0, 1]"));
        }
        if self.tomography.shots == Some(0) {
            return Err(usage("config: tomography.shots must be positive"));
        }
        let levels =
            BatteryLevels::new(units::angular(self.levels.f01_hz), units::angular(self.levels.f12_hz)).map_err(core)?;
        let rates = DecayRates::new(
            self.rates.gamma_10,
            self.rates.gamma_21,
            self.rates.deph_1,
            self.rates.deph_2,
        )
        .map_err(core)?;
        let omega_max = units::angular(self.drive.omega_max_hz);
        let tag = ProtocolTag::from_str(&self.protocol.family).map_err(core)?;
        let mode = ChargeMode::from_str(&self.protocol.mode).map_err(core)?;
        let protocol = ProtocolFamily::new(tag, omega_max, self.protocol.tau_s, mode).map_err(core)?;
        Ok(ExperimentConfig {
            levels,
            omega_max,
            rates,
            protocol,
            tau_sweep: sweep.clone(),
            dt: self.dt_s,
            threshold: self.threshold,
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            raw: self,
        })
    }
}

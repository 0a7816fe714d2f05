//! Charging-pulse envelopes.
//!
//! Each family comes in two flavours. A stable pulse starts with Ω1 = 0 and
//! ends with Ω2 = 0, so |0⟩ is the dark state at t = 0 and the population
//! follows it to |2⟩. An unstable pulse has the opposite ordering and starts
//! |0⟩ in an equal superposition of the two bright states.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_finite, Error, Result};

pub const DEFAULT_SAMPLES: usize = 2001;

/// Relative tolerance for boundary conditions and time-grid checks.
const GRID_TOLERANCE: f64 = 1e-12;
/// Relative spacing deviation tolerated before a grid counts as non-uniform.
const UNIFORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChargeMode {
    Stable,
    Unstable,
}

impl ChargeMode {
    pub const ALL: [ChargeMode; 2] = [ChargeMode::Stable, ChargeMode::Unstable];

    pub fn as_str(&self) -> &'static str {
        match self {
            ChargeMode::Stable => "stable",
            ChargeMode::Unstable => "unstable",
        }
    }
}

impl fmt::Display for ChargeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChargeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stable" => Ok(ChargeMode::Stable),
            "unstable" => Ok(ChargeMode::Unstable),
            other => Err(invalid(format!("unknown charge mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProtocolTag {
    LinearRamp,
    CycloidLinear,
    QabQuadratic,
    NumericalUnconstrained,
}

impl ProtocolTag {
    pub const ALL: [ProtocolTag; 4] = [
        ProtocolTag::LinearRamp,
        ProtocolTag::CycloidLinear,
        ProtocolTag::QabQuadratic,
        ProtocolTag::NumericalUnconstrained,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProtocolTag::LinearRamp => "linear_ramp",
            ProtocolTag::CycloidLinear => "cycloid_linear",
            ProtocolTag::QabQuadratic => "qab_quadratic",
            ProtocolTag::NumericalUnconstrained => "numerical_unconstrained",
        }
    }
}

impl fmt::Display for ProtocolTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProtocolTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| invalid(format!("unknown protocol family '{s}'")))
    }
}

/// A pulse family with its amplitude bound, duration and mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolFamily {
    pub tag: ProtocolTag,
    pub omega_max: f64,
    pub tau: f64,
    pub mode: ChargeMode,
}

impl ProtocolFamily {
    pub fn new(tag: ProtocolTag, omega_max: f64, tau: f64, mode: ChargeMode) -> Result<Self> {
        require_finite("omega_max", omega_max)?;
        require_finite("tau", tau)?;
        if omega_max <= 0.0 || tau <= 0.0 {
            return Err(invalid(format!(
                "omega_max and tau must be positive, got {omega_max} and {tau}"
            )));
        }
        Ok(Self {
            tag,
            omega_max,
            tau,
            mode,
        })
    }

    /// Closed-form envelope at time `t`; `None` for the numerical family.
    pub fn eval(&self, t: f64) -> Result<Option<(f64, f64)>> {
        let f = match self.tag {
            ProtocolTag::LinearRamp => eval_linear_ramp,
            ProtocolTag::CycloidLinear => eval_cycloid,
            ProtocolTag::QabQuadratic => eval_qab_quadratic,
            ProtocolTag::NumericalUnconstrained => return Ok(None),
        };
        f(t, self.tau, self.omega_max, self.mode).map(Some)
    }
}

fn unit_time(t: f64, tau: f64) -> Result<f64> {
    require_finite("t", t)?;
    if tau.is_nan() || tau <= 0.0 {
        return Err(invalid(format!("tau must be positive, got {tau}")));
    }
    let slack = GRID_TOLERANCE * tau;
    if t < -slack || t > tau + slack {
        return Err(Error::Range {
            what: "t",
            value: t,
            lo: 0.0,
            hi: tau,
        });
    }
    Ok((t / tau).clamp(0.0, 1.0))
}

/// Linear ramp with Ω1 + Ω2 = Ωmax.
pub fn eval_linear_ramp(t: f64, tau: f64, omega_max: f64, mode: ChargeMode) -> Result<(f64, f64)> {
    let s = unit_time(t, tau)?;
    let rising = omega_max * s;
    let falling = omega_max * (1.0 - s);
    Ok(match mode {
        ChargeMode::Stable => (rising, falling),
        ChargeMode::Unstable => (falling, rising),
    })
}

/// Brachistochrone on the line Ω1 + Ω2 = Ωmax (the cycloid arc).
pub fn eval_cycloid(t: f64, tau: f64, omega_max: f64, mode: ChargeMode) -> Result<(f64, f64)> {
    let s = unit_time(t, tau)?;
    let tan = (PI * (1.0 - 2.0 * s) / 4.0).tan();
    let omega1 = match mode {
        ChargeMode::Stable => 0.5 * omega_max * (1.0 - tan),
        ChargeMode::Unstable => 0.5 * omega_max * (1.0 + tan),
    };
    Ok((omega1, omega_max - omega1))
}

/// Brachistochrone on the circle Ω1² + Ω2² = Ωmax².
pub fn eval_qab_quadratic(t: f64, tau: f64, omega_max: f64, mode: ChargeMode) -> Result<(f64, f64)> {
    let s = unit_time(t, tau)?;
    let (sin, cos) = (PI * s / 2.0).sin_cos();
    Ok(match mode {
        ChargeMode::Stable => (omega_max * sin, omega_max * cos),
        ChargeMode::Unstable => (omega_max * cos, omega_max * sin),
    })
}

/// Sampled envelope pair on a uniform grid over `[0, τ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule {
    times: Vec<f64>,
    omega1: Vec<f64>,
    omega2: Vec<f64>,
    family: ProtocolFamily,
}

impl PulseSchedule {
    /// Builds a schedule, checking the grid and the mode's boundary conditions.
    pub fn new(times: Vec<f64>, omega1: Vec<f64>, omega2: Vec<f64>, family: ProtocolFamily) -> Result<Self> {
        let n = times.len();
        if n < 2 || omega1.len() != n || omega2.len() != n {
            return Err(invalid(format!(
                "schedule arrays must share a length ≥ 2 (got {}, {}, {})",
                n,
                omega1.len(),
                omega2.len()
            )));
        }
        if times.iter().chain(&omega1).chain(&omega2).any(|x| !x.is_finite()) {
            return Err(invalid("schedule contains non-finite values"));
        }
        let tau = family.tau;
        if times[0].abs() > GRID_TOLERANCE * tau || (times[n - 1] - tau).abs() > GRID_TOLERANCE * tau {
            return Err(invalid(format!(
                "schedule must span [0, {tau}], got [{}, {}]",
                times[0],
                times[n - 1]
            )));
        }
        let h = tau / (n - 1) as f64;
        for (i, w) in times.windows(2).enumerate() {
            let step = w[1] - w[0];
            if step <= 0.0 {
                return Err(invalid(format!("times not strictly increasing at index {}", i + 1)));
            }
            if (step - h).abs() > UNIFORM_TOLERANCE * h {
                return Err(invalid(format!("non-uniform time grid at index {}", i + 1)));
            }
        }
        let schedule = Self {
            times,
            omega1,
            omega2,
            family,
        };
        schedule.check_boundaries()?;
        Ok(schedule)
    }

    fn check_boundaries(&self) -> Result<()> {
        let tol = GRID_TOLERANCE * self.family.omega_max;
        let last = self.len() - 1;
        let (a, b) = match self.family.mode {
            ChargeMode::Stable => (self.omega1[0], self.omega2[last]),
            ChargeMode::Unstable => (self.omega1[last], self.omega2[0]),
        };
        if a.abs() > tol || b.abs() > tol {
            return Err(invalid(format!(
                "{} boundary conditions violated ({a:e}, {b:e})",
                self.family.mode
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn omega1(&self) -> &[f64] {
        &self.omega1
    }

    pub fn omega2(&self) -> &[f64] {
        &self.omega2
    }

    pub fn family(&self) -> &ProtocolFamily {
        &self.family
    }

    pub fn tau(&self) -> f64 {
        self.family.tau
    }

    /// Uniform sample spacing.
    pub fn spacing(&self) -> f64 {
        self.family.tau / (self.len() - 1) as f64
    }

    /// Largest instantaneous gap √(Ω1² + Ω2²) over the samples.
    pub fn peak_field(&self) -> f64 {
        self.omega1
            .iter()
            .zip(&self.omega2)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    /// Envelope at arbitrary `t`, linearly interpolated between samples.
    /// Outside `[0, τ]` the drive is off.
    pub fn envelope_at(&self, t: f64) -> (f64, f64) {
        let tau = self.tau();
        if t < 0.0 || t > tau * (1.0 + GRID_TOLERANCE) {
            return (0.0, 0.0);
        }
        let x = (t / self.spacing()).clamp(0.0, (self.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.len() - 2);
        let w = x - i as f64;
        (
            self.omega1[i] + w * (self.omega1[i + 1] - self.omega1[i]),
            self.omega2[i] + w * (self.omega2[i + 1] - self.omega2[i]),
        )
    }
}

/// Samples a family on a uniform grid of `n_samples` points.
///
/// The numerical family has no closed form: pass the brachistochrone solver
/// output as `solution`. It is resampled in normalized time `t/τ` and
/// rescaled so its peak field equals the family's `omega_max`.
pub fn discretize(
    family: &ProtocolFamily,
    n_samples: usize,
    solution: Option<&PulseSchedule>,
) -> Result<PulseSchedule> {
    if n_samples < 2 {
        return Err(invalid(format!("n_samples must be ≥ 2, got {n_samples}")));
    }
    let tau = family.tau;
    let times: Vec<f64> = (0..n_samples)
        .map(|i| {
            if i == n_samples - 1 {
                tau
            } else {
                tau * i as f64 / (n_samples - 1) as f64
            }
        })
        .collect();
    let (omega1, omega2) = match family.tag {
        ProtocolTag::NumericalUnconstrained => {
            let sol = solution.ok_or(Error::MissingSolution)?;
            if sol.family.mode != family.mode {
                return Err(invalid(format!(
                    "solver output is {} but family is {}",
                    sol.family.mode, family.mode
                )));
            }
            let peak = sol.peak_field();
            if peak <= 0.0 {
                return Err(invalid("solver output has zero field"));
            }
            let scale = family.omega_max / peak;
            times
                .iter()
                .map(|t| {
                    let (a, b) = sol.envelope_at(t / tau * sol.tau());
                    (a * scale, b * scale)
                })
                .unzip()
        }
        _ => {
            let mut o1 = Vec::with_capacity(n_samples);
            let mut o2 = Vec::with_capacity(n_samples);
            for &t in &times {
                let (a, b) = family.eval(t)?.expect("closed-form family");
                o1.push(a);
                o2.push(b);
            }
            (o1, o2)
        }
    };
    PulseSchedule::new(times, omega1, omega2, *family)
}

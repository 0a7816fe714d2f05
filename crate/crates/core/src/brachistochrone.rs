//! Adiabatic-time functional and its critical curves.
//!
//! The cost of an interpolation `Ω(t) = (Ω1, Ω2)` is
//! `A = ∫ |Ω̇|² / |Ω|⁴ dt`, i.e. the squared speed of the Hamiltonian measured
//! against the fourth power of the gap Δ = |Ω|. Critical curves satisfy the
//! Euler–Lagrange system implemented in [`el_residual`]; the constrained
//! families only need the component of that residual tangent to their
//! constraint curve.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pulse::{ChargeMode, ProtocolFamily, ProtocolTag, PulseSchedule};

/// Largest tolerated `max |residual| / (Ωmax³/τ²)` for a critical curve.
pub const CRITICAL_RESIDUAL_TOLERANCE: f64 = 1e-6;
/// Relative step for the numerical second partials of the Lagrangian.
pub const HESSIAN_STEP: f64 = 1e-4;
pub const NEWTON_MAX_ITERATIONS: usize = 100;
pub const MIN_SOLVER_GRID: usize = 51;
/// Dimensionless collocation residual at which Newton stops.
const NEWTON_TOLERANCE: f64 = 1e-12;

/// `(Ω̇1² + Ω̇2²) / (Ω1² + Ω2²)²`
pub fn lagrangian(omega1: f64, omega2: f64, domega1: f64, domega2: f64) -> Result<f64> {
    let gap2 = omega1 * omega1 + omega2 * omega2;
    if gap2 == 0.0 {
        return Err(Error::SingularGap { index: 0 });
    }
    Ok((domega1 * domega1 + domega2 * domega2) / (gap2 * gap2))
}

/// Which family of curves a schedule is critical within.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    /// Free endpoints of Ω1, Ω2 apart from the boundary values.
    Unconstrained,
    /// Ω1 + Ω2 = Ωmax.
    Linear,
    /// Ω1² + Ω2² = Ωmax².
    Quadratic,
}

impl Constraint {
    pub fn for_family(tag: ProtocolTag) -> Self {
        match tag {
            ProtocolTag::LinearRamp | ProtocolTag::CycloidLinear => Constraint::Linear,
            ProtocolTag::QabQuadratic => Constraint::Quadratic,
            ProtocolTag::NumericalUnconstrained => Constraint::Unconstrained,
        }
    }
}

/// First and second time derivatives on the uniform grid: central
/// differences inside, second-order one-sided stencils at the ends.
fn derivatives(values: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 1..n - 1 {
        d1[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
        d2[i] = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
    }
    if n >= 3 {
        d1[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
        d1[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    } else {
        d1[0] = (values[1] - values[0]) / h;
        d1[1] = d1[0];
    }
    if n >= 4 {
        d2[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / (h * h);
        d2[n - 1] = (2.0 * values[n - 1] - 5.0 * values[n - 2] + 4.0 * values[n - 3] - values[n - 4]) / (h * h);
    }
    (d1, d2)
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    let inner: f64 = values[1..n - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[n - 1]))
}

/// Value of the adiabatic-time functional on a schedule (seconds).
#[derive(Debug, Clone)]
pub struct AdiabaticFunctional {
    pub value: f64,
    pub schedule: PulseSchedule,
}

/// Trapezoidal quadrature of the Lagrangian over the schedule grid.
pub fn functional_time(schedule: &PulseSchedule) -> Result<AdiabaticFunctional> {
    let value = functional_value(schedule.omega1(), schedule.omega2(), schedule.spacing())?;
    Ok(AdiabaticFunctional {
        value,
        schedule: schedule.clone(),
    })
}

fn functional_value(omega1: &[f64], omega2: &[f64], h: f64) -> Result<f64> {
    if omega1.len() < 3 {
        return Err(invalid("functional needs at least 3 samples"));
    }
    let (d1, _) = derivatives(omega1, h);
    let (d2, _) = derivatives(omega2, h);
    let integrand = (0..omega1.len())
        .map(|i| lagrangian(omega1[i], omega2[i], d1[i], d2[i]).map_err(|_| Error::SingularGap { index: i }))
        .collect::<Result<Vec<_>>>()?;
    Ok(trapezoid(&integrand, h))
}

fn residual_at(u: f64, v: f64, du: f64, dv: f64, ddu: f64, ddv: f64) -> (f64, f64) {
    let gap2 = u * u + v * v;
    let shear = du * du - dv * dv;
    let r1 = gap2 * ddu - 2.0 * (2.0 * v * du * dv + u * shear);
    let r2 = gap2 * ddv - 2.0 * (2.0 * u * du * dv - v * shear);
    (r1, r2)
}

/// Pointwise Euler–Lagrange residuals at the interior grid points.
///
/// Entry `k` of each vector belongs to `times[k + 1]`.
pub fn el_residual(schedule: &PulseSchedule) -> Result<(Vec<f64>, Vec<f64>)> {
    if schedule.len() < 5 {
        return Err(invalid(format!(
            "residual needs at least 5 samples, got {}",
            schedule.len()
        )));
    }
    let h = schedule.spacing();
    let (o1, o2) = (schedule.omega1(), schedule.omega2());
    let (d1, dd1) = derivatives(o1, h);
    let (d2, dd2) = derivatives(o2, h);
    Ok((1..schedule.len() - 1)
        .map(|i| residual_at(o1[i], o2[i], d1[i], d2[i], dd1[i], dd2[i]))
        .unzip())
}

/// Residual component that must vanish for a curve critical under `constraint`.
///
/// For the constrained cases this is the projection of `(r1, r2)` on the
/// unit tangent of the constraint curve; for the unconstrained case it is
/// the larger of `|r1|`, `|r2|`.
pub fn constrained_residual(schedule: &PulseSchedule, constraint: Constraint) -> Result<Vec<f64>> {
    let (r1, r2) = el_residual(schedule)?;
    let (o1, o2) = (schedule.omega1(), schedule.omega2());
    Ok(r1
        .iter()
        .zip(&r2)
        .enumerate()
        .map(|(k, (a, b))| match constraint {
            Constraint::Unconstrained => a.abs().max(b.abs()),
            Constraint::Linear => (a - b) / std::f64::consts::SQRT_2,
            Constraint::Quadratic => {
                let (u, v) = (o1[k + 1], o2[k + 1]);
                (v * a - u * b) / u.hypot(v)
            }
        })
        .collect())
}

/// Natural residual scale `Ωpeak³ / τ²`.
pub fn residual_scale(schedule: &PulseSchedule) -> f64 {
    let peak = schedule.peak_field();
    peak.powi(3) / (schedule.tau() * schedule.tau())
}

/// `max |constrained residual| / residual_scale`.
pub fn max_relative_residual(schedule: &PulseSchedule, constraint: Constraint) -> Result<f64> {
    let r = constrained_residual(schedule, constraint)?;
    let max = r.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Ok(max / residual_scale(schedule))
}

/// Endpoint values for the two-point boundary-value problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryValues {
    pub mode: ChargeMode,
    /// `(Ω1(0), Ω2(0))`
    pub initial: (f64, f64),
    /// `(Ω1(τ), Ω2(τ))`
    pub terminal: (f64, f64),
}

impl BoundaryValues {
    /// Checks that the zeros required by `mode` are present and the other
    /// two endpoint fields are non-zero.
    pub fn new(mode: ChargeMode, initial: (f64, f64), terminal: (f64, f64)) -> Result<Self> {
        let (zeros, free) = match mode {
            ChargeMode::Stable => ([initial.0, terminal.1], [initial.1, terminal.0]),
            ChargeMode::Unstable => ([terminal.0, initial.1], [initial.0, terminal.1]),
        };
        if zeros.iter().any(|z| *z != 0.0) || free.iter().any(|f| *f == 0.0 || !f.is_finite()) {
            return Err(invalid(format!(
                "boundary values {initial:?} → {terminal:?} inconsistent with {mode} mode"
            )));
        }
        Ok(Self {
            mode,
            initial,
            terminal,
        })
    }

    /// Equal non-zero endpoint amplitudes (1 in solver units).
    pub fn symmetric(mode: ChargeMode) -> Self {
        match mode {
            ChargeMode::Stable => Self {
                mode,
                initial: (0.0, 1.0),
                terminal: (1.0, 0.0),
            },
            ChargeMode::Unstable => Self {
                mode,
                initial: (1.0, 0.0),
                terminal: (0.0, 1.0),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverIteration {
    pub iter: usize,
    pub residual_norm: f64,
}

#[derive(Debug, Clone)]
pub struct UnconstrainedSolution {
    pub schedule: PulseSchedule,
    pub iterations: Vec<SolverIteration>,
}

type Block = Matrix2<f64>;

/// Solves `J x = rhs` for block-tridiagonal `J` with 2×2 blocks.
fn solve_block_tridiagonal(
    lower: &[Block],
    diag: &[Block],
    upper: &[Block],
    rhs: &[Vector2<f64>],
) -> Option<Vec<Vector2<f64>>> {
    let m = diag.len();
    let mut c_prime = vec![Block::zeros(); m];
    let mut d_prime = vec![Vector2::zeros(); m];
    for i in 0..m {
        let (pivot, d) = if i == 0 {
            (diag[0], rhs[0])
        } else {
            (diag[i] - lower[i] * c_prime[i - 1], rhs[i] - lower[i] * d_prime[i - 1])
        };
        let inv = pivot.try_inverse()?;
        c_prime[i] = inv * upper[i];
        d_prime[i] = inv * d;
    }
    let mut x = vec![Vector2::zeros(); m];
    x[m - 1] = d_prime[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d_prime[i] - c_prime[i] * x[i + 1];
    }
    Some(x)
}

struct Collocation {
    h: f64,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl Collocation {
    /// Residuals divided by `|Ω|²`. The undivided form vanishes identically
    /// wherever the field does, which lets Newton settle on curves through
    /// zero; dividing removes those spurious roots.
    fn residuals(&self) -> Vec<Vector2<f64>> {
        let (h, u, v) = (self.h, &self.u, &self.v);
        (1..u.len() - 1)
            .map(|i| {
                let du = (u[i + 1] - u[i - 1]) / (2.0 * h);
                let dv = (v[i + 1] - v[i - 1]) / (2.0 * h);
                let ddu = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
                let ddv = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
                let (r1, r2) = residual_at(u[i], v[i], du, dv, ddu, ddv);
                Vector2::new(r1, r2) / (u[i] * u[i] + v[i] * v[i])
            })
            .collect()
    }

    fn norm(res: &[Vector2<f64>]) -> f64 {
        res.iter().fold(0.0_f64, |m, r| m.max(r.amax()))
    }

    /// Jacobian blocks of the divided residual `Ω̈ − 2N/D`.
    fn jacobian(&self) -> (Vec<Block>, Vec<Block>, Vec<Block>) {
        let (h, u, v) = (self.h, &self.u, &self.v);
        let m = u.len() - 2;
        let mut lower = vec![Block::zeros(); m];
        let mut diag = vec![Block::zeros(); m];
        let mut upper = vec![Block::zeros(); m];
        for k in 0..m {
            let i = k + 1;
            let (ui, vi) = (u[i], v[i]);
            let du = (u[i + 1] - u[i - 1]) / (2.0 * h);
            let dv = (v[i + 1] - v[i - 1]) / (2.0 * h);
            let d = ui * ui + vi * vi;
            let shear = du * du - dv * dv;
            let n1 = 2.0 * vi * du * dv + ui * shear;
            let n2 = 2.0 * ui * du * dv - vi * shear;
            // rows: (r1, r2); columns: (u, v)
            let d_val = Block::new(
                -2.0 * shear / d + 4.0 * n1 * ui / (d * d),
                -4.0 * du * dv / d + 4.0 * n1 * vi / (d * d),
                -4.0 * du * dv / d + 4.0 * n2 * ui / (d * d),
                2.0 * shear / d + 4.0 * n2 * vi / (d * d),
            );
            let d_vel = Block::new(
                -4.0 * (vi * dv + ui * du) / d,
                -4.0 * (vi * du - ui * dv) / d,
                -4.0 * (ui * dv - vi * du) / d,
                -4.0 * (ui * du + vi * dv) / d,
            );
            let d_acc = Block::identity();
            lower[k] = d_vel * (-0.5 / h) + d_acc / (h * h);
            diag[k] = d_val - d_acc * (2.0 / (h * h));
            upper[k] = d_vel * (0.5 / h) + d_acc / (h * h);
        }
        (lower, diag, upper)
    }

    fn apply(&mut self, step: &[Vector2<f64>], lambda: f64) {
        for (k, s) in step.iter().enumerate() {
            self.u[k + 1] += lambda * s[0];
            self.v[k + 1] += lambda * s[1];
        }
    }
}

/// Polar interpolation between two endpoints: the angle moves linearly and
/// the radius geometrically. Keeps the seed away from zero field.
fn arc(a: (f64, f64), b: (f64, f64), n: usize) -> (Vec<f64>, Vec<f64>) {
    let (ra, rb) = (a.0.hypot(a.1), b.0.hypot(b.1));
    let (ta, mut tb) = (a.1.atan2(a.0), b.1.atan2(b.0));
    if tb - ta > PI {
        tb -= 2.0 * PI;
    } else if ta - tb > PI {
        tb += 2.0 * PI;
    }
    (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            let r = ra.powf(1.0 - s) * rb.powf(s);
            let t = ta + (tb - ta) * s;
            (r * t.cos(), r * t.sin())
        })
        .unzip()
}

/// Linear interpolation of a uniform-grid profile onto `n` points.
fn resample(values: &[f64], n: usize) -> Vec<f64> {
    let m = values.len() - 1;
    (0..n)
        .map(|i| {
            let x = i as f64 * m as f64 / (n - 1) as f64;
            let k = (x.floor() as usize).min(m - 1);
            let w = x - k as f64;
            values[k] + w * (values[k + 1] - values[k])
        })
        .collect()
}

fn sum_squares(res: &[Vector2<f64>]) -> f64 {
    res.iter().map(|r| r.norm_squared()).sum()
}

/// Damped Newton on one grid. Returns the per-iteration log.
fn newton(col: &mut Collocation, amplitude: f64) -> Result<Vec<SolverIteration>> {
    let roundoff = f64::EPSILON / (col.h * col.h) * amplitude;
    let tolerance = NEWTON_TOLERANCE * amplitude + 64.0 * roundoff;
    let mut res = col.residuals();
    let mut norm = Collocation::norm(&res);
    let mut log = vec![SolverIteration {
        iter: 0,
        residual_norm: norm,
    }];
    let mut iter = 0;
    while norm > tolerance {
        if iter == NEWTON_MAX_ITERATIONS {
            return Err(Error::NoConvergence {
                iterations: iter,
                residual: norm,
            });
        }
        iter += 1;
        let (lower, diag, upper) = col.jacobian();
        let rhs: Vec<_> = res.iter().map(|r| -r).collect();
        let step = solve_block_tridiagonal(&lower, &diag, &upper, &rhs).ok_or(Error::NoConvergence {
            iterations: iter,
            residual: norm,
        })?;
        let merit = sum_squares(&res);
        let mut lambda = 1.0;
        loop {
            col.apply(&step, lambda);
            let trial = col.residuals();
            let trial_merit = sum_squares(&trial);
            if trial_merit.is_finite() && trial_merit < merit {
                norm = Collocation::norm(&trial);
                res = trial;
                break;
            }
            col.apply(&step, -lambda);
            lambda *= 0.5;
            if lambda < 1e-6 {
                // no descent left: either at the roundoff floor or stuck
                if norm <= 1e3 * roundoff {
                    return Ok(log);
                }
                return Err(Error::NoConvergence {
                    iterations: iter,
                    residual: norm,
                });
            }
        }
        log.push(SolverIteration {
            iter,
            residual_norm: norm,
        });
    }
    Ok(log)
}

/// Relaxation solve of the unconstrained Euler–Lagrange problem.
///
/// The problem is solved on `s = t/τ ∈ [0, 1]` by second-order collocation
/// and damped Newton iteration. The first grid has 51 points and starts
/// from a polar arc between the endpoints; each converged profile
/// seeds a grid twice as fine until `n_grid` is reached. The returned log
/// covers the Newton iterations on the final grid. Because the equations
/// are homogeneous in Ω, the converged curve is afterwards rescaled so that
/// its peak field equals `omega_max`.
pub fn solve_unconstrained(
    bc: &BoundaryValues,
    tau: f64,
    omega_max: f64,
    n_grid: usize,
) -> Result<UnconstrainedSolution> {
    let bc = BoundaryValues::new(bc.mode, bc.initial, bc.terminal)?;
    if n_grid < MIN_SOLVER_GRID {
        return Err(invalid(format!("n_grid must be ≥ {MIN_SOLVER_GRID}, got {n_grid}")));
    }
    let family = ProtocolFamily::new(ProtocolTag::NumericalUnconstrained, omega_max, tau, bc.mode)?;
    let amplitude = bc
        .initial
        .0
        .abs()
        .max(bc.initial.1.abs())
        .max(bc.terminal.0.abs())
        .max(bc.terminal.1.abs());

    let mut n = MIN_SOLVER_GRID;
    let (mut u, mut v) = arc(bc.initial, bc.terminal, n);
    // pin the boundary values exactly
    u[0] = bc.initial.0;
    v[0] = bc.initial.1;
    u[n - 1] = bc.terminal.0;
    v[n - 1] = bc.terminal.1;
    let mut col = Collocation {
        h: 1.0 / (n - 1) as f64,
        u,
        v,
    };
    let iterations = loop {
        let log = newton(&mut col, amplitude)?;
        if n == n_grid {
            break log;
        }
        n = (2 * n - 1).min(n_grid);
        col = Collocation {
            h: 1.0 / (n - 1) as f64,
            u: resample(&col.u, n),
            v: resample(&col.v, n),
        };
    };

    let peak = col.u.iter().zip(&col.v).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max);
    let scale = omega_max / peak;
    let times = (0..n_grid)
        .map(|i| {
            if i == n_grid - 1 {
                tau
            } else {
                tau * i as f64 / (n_grid - 1) as f64
            }
        })
        .collect();
    let omega1 = col.u.iter().map(|x| x * scale).collect();
    let omega2 = col.v.iter().map(|x| x * scale).collect();
    Ok(UnconstrainedSolution {
        schedule: PulseSchedule::new(times, omega1, omega2, family)?,
        iterations,
    })
}

/// Second partial derivatives of the Lagrangian along a curve, for one
/// coordinate: `∂²L/∂Ωj²`, `∂²L/∂Ωj∂Ω̇j`, `∂²L/∂Ω̇j²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondPartials {
    pub coordinate: f64,
    pub mixed: f64,
    pub velocity: f64,
}

/// Numerical second partials at every grid point, for both coordinates.
pub fn second_partials(schedule: &PulseSchedule) -> Result<Vec<[SecondPartials; 2]>> {
    let h = schedule.spacing();
    let (o1, o2) = (schedule.omega1(), schedule.omega2());
    let (d1, _) = derivatives(o1, h);
    let (d2, _) = derivatives(o2, h);
    let q_step = HESSIAN_STEP * schedule.peak_field();
    let p_scale = d1.iter().chain(&d2).fold(0.0_f64, |m, x| m.max(x.abs()));
    let p_step = HESSIAN_STEP * p_scale.max(schedule.peak_field() / schedule.tau());

    (0..schedule.len())
        .map(|i| {
            let base = [o1[i], o2[i], d1[i], d2[i]];
            let l = |dq: f64, dp: f64, j: usize| -> Result<f64> {
                let mut x = base;
                x[j] += dq;
                x[j + 2] += dp;
                lagrangian(x[0], x[1], x[2], x[3]).map_err(|_| Error::SingularGap { index: i })
            };
            let mut out = [SecondPartials {
                coordinate: 0.0,
                mixed: 0.0,
                velocity: 0.0,
            }; 2];
            for (j, slot) in out.iter_mut().enumerate() {
                let l0 = l(0.0, 0.0, j)?;
                slot.coordinate = (l(q_step, 0.0, j)? - 2.0 * l0 + l(-q_step, 0.0, j)?) / (q_step * q_step);
                slot.velocity = (l(0.0, p_step, j)? - 2.0 * l0 + l(0.0, -p_step, j)?) / (p_step * p_step);
                slot.mixed = (l(q_step, p_step, j)? - l(q_step, -p_step, j)? - l(-q_step, p_step, j)?
                    + l(-q_step, -p_step, j)?)
                    / (4.0 * q_step * p_step);
            }
            Ok(out)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criticality {
    Minimum,
    Maximum,
    Saddle,
    Inconclusive,
}

/// Second-variation terms per Fourier mode and the resulting verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalityVerdict {
    /// `lambda_terms[n - 1][j]`: second variation along `η = sin(nπt/τ) e_j`.
    pub lambda_terms: Vec<[f64; 2]>,
    pub verdict: Criticality,
}

/// Classifies a set of second-variation terms.
pub fn classify_terms(terms: &[[f64; 2]]) -> Criticality {
    let max = terms.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    let tol = 1e-9 * max;
    let pos = terms.iter().flatten().filter(|x| **x > tol).count();
    let neg = terms.iter().flatten().filter(|x| **x < -tol).count();
    let total = terms.len() * 2;
    if total > 0 && pos == total {
        Criticality::Minimum
    } else if total > 0 && neg == total {
        Criticality::Maximum
    } else if pos > 0 && neg > 0 {
        Criticality::Saddle
    } else {
        Criticality::Inconclusive
    }
}

/// Second-derivative test of the functional at a critical schedule.
///
/// The admissible perturbations are expanded in `sin(nπt/τ)` per
/// coordinate; each mode contributes
/// `∫ [L_qq sin² + 2 L_qq̇ (nπ/τ) sin cos + L_q̇q̇ (nπ/τ)² cos²] dt`.
pub fn second_derivative_test(schedule: &PulseSchedule, n_modes: usize) -> Result<CriticalityVerdict> {
    if n_modes == 0 {
        return Err(invalid("n_modes must be ≥ 1"));
    }
    let constraint = Constraint::for_family(schedule.family().tag);
    let residual = max_relative_residual(schedule, constraint)?;
    if residual > CRITICAL_RESIDUAL_TOLERANCE {
        return Err(Error::NotCriticalPoint {
            residual,
            threshold: CRITICAL_RESIDUAL_TOLERANCE,
        });
    }
    let partials = second_partials(schedule)?;
    let tau = schedule.tau();
    let h = schedule.spacing();
    let times = schedule.times();
    let lambda_terms = (1..=n_modes)
        .map(|n| {
            let k = n as f64 * PI / tau;
            let mut out = [0.0; 2];
            for (j, slot) in out.iter_mut().enumerate() {
                let integrand: Vec<f64> = times
                    .iter()
                    .zip(&partials)
                    .map(|(t, p)| {
                        let (s, c) = (k * t).sin_cos();
                        let p = p[j];
                        p.coordinate * s * s + 2.0 * p.mixed * k * s * c + p.velocity * k * k * c * c
                    })
                    .collect();
                *slot = trapezoid(&integrand, h);
            }
            out
        })
        .collect::<Vec<_>>();
    let verdict = classify_terms(&lambda_terms);
    Ok(CriticalityVerdict { lambda_terms, verdict })
}

/// Applies a perturbation of size `eps` that preserves the constraint.
///
/// `eta(s)` for `s = t/τ` must vanish at both ends. For the constrained
/// families only its first component is used: as a shift along the line
/// (`Ω1 += εη`, `Ω2 -= εη`) or as a shift of the polar angle on the circle.
/// Field perturbations are in units of the schedule's peak field.
pub fn perturb(
    schedule: &PulseSchedule,
    constraint: Constraint,
    eta: &dyn Fn(f64) -> (f64, f64),
    eps: f64,
) -> Result<PulseSchedule> {
    let scale = schedule.peak_field();
    let tau = schedule.tau();
    let mut o1 = schedule.omega1().to_vec();
    let mut o2 = schedule.omega2().to_vec();
    for (i, t) in schedule.times().iter().enumerate() {
        let (e1, e2) = eta(t / tau);
        match constraint {
            Constraint::Unconstrained => {
                o1[i] += eps * e1 * scale;
                o2[i] += eps * e2 * scale;
            }
            Constraint::Linear => {
                o1[i] += eps * e1 * scale;
                o2[i] -= eps * e1 * scale;
            }
            Constraint::Quadratic => {
                let r = o1[i].hypot(o2[i]);
                let angle = o1[i].atan2(o2[i]) + eps * e1;
                o1[i] = r * angle.sin();
                o2[i] = r * angle.cos();
            }
        }
    }
    PulseSchedule::new(schedule.times().to_vec(), o1, o2, *schedule.family())
}

/// Central finite-ε directional derivative of the functional, relative to
/// the functional value: `(A[q + εη] − A[q − εη]) / (2ε A[q])`.
pub fn gateaux_derivative(
    schedule: &PulseSchedule,
    constraint: Constraint,
    eta: &dyn Fn(f64) -> (f64, f64),
    eps: f64,
) -> Result<f64> {
    let a0 = functional_time(schedule)?.value;
    let plus = functional_time(&perturb(schedule, constraint, eta, eps)?)?.value;
    let minus = functional_time(&perturb(schedule, constraint, eta, -eps)?)?.value;
    Ok((plus - minus) / (2.0 * eps * a0))
}

//! Exponential models of ergotropy decay and Ohmic vs supercapacitor
//! classification.
//!
//! Both models are sums of `a·exp(−t/τ)` terms fitted by Levenberg–Marquardt
//! in `(a, ln τ)`, which keeps time constants positive without bounds. The
//! two-term fit also tries the merged-pair limit, where its infimum often
//! lies.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ergotropy::ErgotropyTrace;
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
/// Relative parameter step at which the fit is converged.
pub const STEP_TOLERANCE: f64 = 1e-10;
/// AIC margin required to prefer two time constants.
pub const AIC_THRESHOLD: f64 = 10.0;
/// Time constants are capped at this multiple of the sampled span.
const TAU_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    /// μeV, one per term.
    pub amplitudes: Vec<f64>,
    /// Seconds, ascending.
    pub time_constants: Vec<f64>,
    /// Residual sum of squares (μeV²).
    pub rss: f64,
    pub n_params: usize,
    pub iterations: usize,
    /// The data do not determine all parameters: a constant trace, or two
    /// terms that merged.
    pub degenerate: bool,
}

impl ExpFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitudes
            .iter()
            .zip(&self.time_constants)
            .map(|(a, tau)| a * (-t / tau).exp())
            .sum()
    }

    /// Akaike information criterion for the data this fit came from.
    pub fn aic(&self, trace: &ErgotropyTrace) -> f64 {
        let n = trace.len() as f64;
        let ymax = trace.ergotropy.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
        let floor = n * (1e-9 * ymax).powi(2);
        n * (self.rss.max(floor).max(f64::MIN_POSITIVE) / n).ln() + 2.0 * self.n_params as f64
    }
}

/// Model families handled by the least-squares solver.
#[derive(Clone, Copy)]
enum Model {
    /// `Σ a·exp(−t/τ)`, parameters `(a, ln τ)` per term.
    Exponentials,
    /// `(A + C·t/τ)·exp(−t/τ)`, parameters `(A, C, ln τ)`: the limit of two
    /// merging exponentials with cancelling amplitudes.
    Confluent,
}

impl Model {
    fn value(self, t: f64, p: &[f64]) -> f64 {
        match self {
            Model::Exponentials => p.chunks(2).map(|q| q[0] * (-t / q[1].exp()).exp()).sum(),
            Model::Confluent => {
                let x = t / p[2].exp();
                (p[0] + p[1] * x) * (-x).exp()
            }
        }
    }

    /// Jacobian of the model with respect to the parameters.
    fn jacobian(self, t: &[f64], p: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(t.len(), p.len());
        for (i, ti) in t.iter().enumerate() {
            match self {
                Model::Exponentials => {
                    for (k, q) in p.chunks(2).enumerate() {
                        let tau = q[1].exp();
                        let e = (-ti / tau).exp();
                        j[(i, 2 * k)] = e;
                        j[(i, 2 * k + 1)] = q[0] * e * ti / tau;
                    }
                }
                Model::Confluent => {
                    let x = ti / p[2].exp();
                    let e = (-x).exp();
                    j[(i, 0)] = e;
                    j[(i, 1)] = x * e;
                    j[(i, 2)] = x * (p[0] + p[1] * x - p[1]) * e;
                }
            }
        }
        j
    }

    fn ln_tau_indices(self, n: usize) -> Vec<usize> {
        match self {
            Model::Exponentials => (1..n).step_by(2).collect(),
            Model::Confluent => vec![2],
        }
    }

    /// Relative step below the convergence tolerance in every parameter.
    fn step_is_small(self, p: &[f64], step: &[f64]) -> bool {
        let rel = |s: f64, x: f64| s.abs() <= STEP_TOLERANCE * x.abs().max(1e-300);
        match self {
            Model::Exponentials => p
                .chunks(2)
                .zip(step.chunks(2))
                .all(|(q, s)| rel(s[0], q[0]) && s[1].abs() <= STEP_TOLERANCE),
            Model::Confluent => {
                let size = p[0].abs().max(p[1].abs());
                rel(step[0], size) && rel(step[1], size) && step[2].abs() <= STEP_TOLERANCE
            }
        }
    }
}

fn residuals(model: Model, t: &[f64], y: &[f64], p: &[f64]) -> DVector<f64> {
    DVector::from_iterator(t.len(), t.iter().zip(y).map(|(ti, yi)| yi - model.value(*ti, p)))
}

struct Minimum {
    params: Vec<f64>,
    rss: f64,
    iterations: usize,
}

fn levenberg_marquardt(model: Model, t: &[f64], y: &[f64], start: Vec<f64>, ln_tau_cap: f64) -> Result<Minimum> {
    let mut p = start;
    let caps = model.ln_tau_indices(p.len());
    let mut r = residuals(model, t, y, &p);
    let mut rss = r.norm_squared();
    let mut lambda = 1e-3;
    for iter in 1..=MAX_ITERATIONS {
        let j = model.jacobian(t, &p);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if g.amax() == 0.0 || rss == 0.0 {
            return Ok(Minimum {
                params: p,
                rss,
                iterations: iter,
            });
        }
        loop {
            let mut a = jtj.clone();
            for k in 0..p.len() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let step = a.lu().solve(&g);
            let Some(step) = step.filter(|s| s.iter().all(|x| x.is_finite())) else {
                lambda *= 10.0;
                if lambda > 1e20 {
                    return Err(Error::Fit(format!("singular normal equations at {p:?}")));
                }
                continue;
            };
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            for &k in &caps {
                trial[k] = trial[k].min(ln_tau_cap);
            }
            let tr = residuals(model, t, y, &trial);
            let trss = tr.norm_squared();
            let small = model.step_is_small(&p, step.as_slice());
            if trss <= rss {
                p = trial;
                r = tr;
                rss = trss;
                lambda = (lambda / 3.0).max(1e-12);
                if small {
                    return Ok(Minimum {
                        params: p,
                        rss,
                        iterations: iter,
                    });
                }
                break;
            }
            if small || lambda > 1e16 {
                // no downhill step left at machine resolution
                return Ok(Minimum {
                    params: p,
                    rss,
                    iterations: iter,
                });
            }
            lambda *= 4.0;
        }
    }
    Err(Error::Fit(format!(
        "no convergence in {MAX_ITERATIONS} iterations (rss {rss:e}, parameters {p:?})"
    )))
}

fn finish(params: &[f64], rss: f64, iterations: usize, ln_tau_cap: f64) -> ExpFit {
    let mut terms: Vec<(f64, f64)> = params.chunks(2).map(|q| (q[0], q[1].exp())).collect();
    terms.sort_by(|a, b| a.1.total_cmp(&b.1));
    let capped = params.chunks(2).any(|q| q[1] >= ln_tau_cap * (1.0 - 1e-12));
    let merged = terms.len() == 2 && (terms[1].1 - terms[0].1).abs() <= 1e-3 * terms[1].1;
    ExpFit {
        amplitudes: terms.iter().map(|x| x.0).collect(),
        time_constants: terms.iter().map(|x| x.1).collect(),
        rss,
        n_params: params.len(),
        iterations,
        degenerate: capped || merged,
    }
}

fn span(trace: &ErgotropyTrace) -> f64 {
    let s = trace.times[trace.len() - 1] - trace.times[0];
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Least-squares fit of `a·exp(−t/τ)`.
///
/// Started from a log-linear regression weighted by `y²`, which ignores
/// non-positive samples and de-emphasizes the noisy tail.
pub fn fit_single_exp(trace: &ErgotropyTrace) -> Result<ExpFit> {
    let (t, y) = (&trace.times, &trace.ergotropy);
    if t.len() < 8 {
        return Err(Error::Fit(format!(
            "single-exponential fit needs ≥ 8 samples, got {}",
            t.len()
        )));
    }
    let ln_tau_cap = (TAU_CAP * span(trace)).ln();
    let ymax = y.iter().fold(f64::MIN, |m, v| m.max(*v));
    let ymin = y.iter().fold(f64::MAX, |m, v| m.min(*v));
    if ymax.is_nan() || ymax <= 0.0 {
        return Err(Error::Fit("trace has no positive values".into()));
    }
    if ymax - ymin <= 1e-12 * ymax {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let rss = y.iter().map(|v| (v - mean).powi(2)).sum();
        return Ok(finish(&[mean, ln_tau_cap], rss, 0, ln_tau_cap));
    }

    let (mut sw, mut st, mut sl, mut stt, mut stl) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (ti, yi) in t.iter().zip(y).filter(|(_, v)| **v > 0.0) {
        let w = yi * yi;
        let l = yi.ln();
        sw += w;
        st += w * ti;
        sl += w * l;
        stt += w * ti * ti;
        stl += w * ti * l;
    }
    let det = sw * stt - st * st;
    let (ln_a, slope) = if det > 0.0 {
        let slope = (sw * stl - st * sl) / det;
        ((sl - slope * st) / sw, slope)
    } else {
        (ymax.ln(), 0.0)
    };
    let ln_tau = if slope < 0.0 {
        (-1.0 / slope).ln().min(ln_tau_cap)
    } else {
        span(trace).ln()
    };
    let m = levenberg_marquardt(Model::Exponentials, t, y, vec![ln_a.exp(), ln_tau], ln_tau_cap)?;
    Ok(finish(&m.params, m.rss, m.iterations, ln_tau_cap))
}

/// Least amplitudes for fixed time constants.
fn amplitudes_for(t: &[f64], y: &[f64], taus: [f64; 2]) -> Option<[f64; 2]> {
    let mut a = DMatrix::zeros(t.len(), 2);
    for (i, ti) in t.iter().enumerate() {
        a[(i, 0)] = (-ti / taus[0]).exp();
        a[(i, 1)] = (-ti / taus[1]).exp();
    }
    let b = DVector::from_column_slice(y);
    let x = (a.transpose() * &a).lu().solve(&(a.transpose() * b))?;
    Some([x[0], x[1]])
}

/// Best `(τ1, τ2)` pairs on a log grid, amplitudes solved linearly.
fn projected_starts(t: &[f64], y: &[f64], lo: f64, hi: f64, keep: usize) -> Vec<Vec<f64>> {
    let n = VP_GRID;
    let tau = |k: usize| lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
    let mut scored = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let taus = [tau(i), tau(j)];
            let Some(a) = amplitudes_for(t, y, taus) else { continue };
            let p = vec![a[0], taus[0].ln(), a[1], taus[1].ln()];
            let rss = residuals(Model::Exponentials, t, y, &p).norm_squared();
            if rss.is_finite() {
                scored.push((rss, p));
            }
        }
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    scored.into_iter().take(keep).map(|x| x.1).collect()
}

const VP_GRID: usize = 40;
const SHORT_FACTORS: [f64; 3] = [0.1, 1.0 / 3.0, 2.0 / 3.0];
const LONG_FACTORS: [f64; 3] = [1.5, 3.0, 10.0];

/// Least-squares fit of `a1·exp(−t/τ1) + a2·exp(−t/τ2)` with `τ1 < τ2`.
///
/// Multi-start over a fixed grid of time-constant pairs around the
/// single-exponential constant, the three best pairs of a coarse
/// variable-projection scan, the single fit itself with an empty second
/// term, and the merged-pair limit; the lowest residual wins. Amplitudes may
/// take either sign.
pub fn fit_double_exp(trace: &ErgotropyTrace) -> Result<ExpFit> {
    let (t, y) = (&trace.times, &trace.ergotropy);
    if t.len() < 12 {
        return Err(Error::Fit(format!(
            "double-exponential fit needs ≥ 12 samples, got {}",
            t.len()
        )));
    }
    let single = fit_single_exp(trace)?;
    let ln_tau_cap = (TAU_CAP * span(trace)).ln();
    let tau_s = single.time_constants[0];

    let mut starts = vec![vec![
        single.amplitudes[0],
        tau_s.ln(),
        0.0,
        (10.0 * tau_s).min(TAU_CAP * span(trace)).ln(),
    ]];
    for f1 in SHORT_FACTORS {
        for f2 in LONG_FACTORS {
            let taus = [f1 * tau_s, (f2 * tau_s).min(TAU_CAP * span(trace))];
            if let Some(a) = amplitudes_for(t, y, taus) {
                starts.push(vec![a[0], taus[0].ln(), a[1], taus[1].ln()]);
            }
        }
    }
    let cap = TAU_CAP * span(trace);
    starts.extend(projected_starts(
        t,
        y,
        span(trace) * 1e-3,
        (10.0 * span(trace)).min(cap),
        3,
    ));
    let mut best: Option<Minimum> = None;
    let mut last_err = None;
    for start in starts {
        match levenberg_marquardt(Model::Exponentials, t, y, start, ln_tau_cap) {
            Ok(m) => {
                if !matches!(&best, Some(b) if b.rss <= m.rss) {
                    best = Some(m);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    if let Some(m) = confluent_fit(t, y, &single, span(trace), ln_tau_cap) {
        if !matches!(&best, Some(b) if b.rss <= m.rss) {
            best = Some(m);
        }
    }
    let m = best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Fit("no start points".into())))?;
    Ok(finish(&m.params, m.rss, m.iterations, ln_tau_cap))
}

/// Relative splitting of the time constants when a confluent fit is written
/// as two exponentials.
const MERGE_SPLIT: f64 = 1e-6;

/// Fits the merged-pair limit `(A + C·t/τ)·e^{−t/τ}` and returns it as the
/// exponential pair `τ/(1 ± h)` that reproduces it to `O(h²)`.
///
/// When the best two-term fit pushes both constants together with
/// diverging, opposite amplitudes, the infimum lies on this limit and plain
/// iteration on the pair never converges.
fn confluent_fit(t: &[f64], y: &[f64], single: &ExpFit, span: f64, ln_tau_cap: f64) -> Option<Minimum> {
    let mut starts = vec![vec![single.amplitudes[0], 0.0, single.time_constants[0].ln()]];
    let (lo, hi) = (span * 1e-3, 10.0 * span);
    let mut scored = Vec::new();
    for k in 0..VP_GRID {
        let tau = lo * (hi / lo).powf(k as f64 / (VP_GRID - 1) as f64);
        let mut a = DMatrix::zeros(t.len(), 2);
        for (i, ti) in t.iter().enumerate() {
            let x = ti / tau;
            a[(i, 0)] = (-x).exp();
            a[(i, 1)] = x * (-x).exp();
        }
        let Some(c) = (a.transpose() * &a)
            .lu()
            .solve(&(a.transpose() * DVector::from_column_slice(y)))
        else {
            continue;
        };
        let p = vec![c[0], c[1], tau.ln()];
        let rss = residuals(Model::Confluent, t, y, &p).norm_squared();
        if rss.is_finite() {
            scored.push((rss, p));
        }
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    starts.extend(scored.into_iter().take(3).map(|x| x.1));

    let best = starts
        .into_iter()
        .filter_map(|s| levenberg_marquardt(Model::Confluent, t, y, s, ln_tau_cap).ok())
        .min_by(|a, b| a.rss.total_cmp(&b.rss))?;
    let (big_a, c, ln_tau) = (best.params[0], best.params[1], best.params[2]);
    let h = MERGE_SPLIT;
    let params = vec![
        0.5 * (big_a - c / h),
        ln_tau - h.ln_1p(),
        0.5 * (big_a + c / h),
        ln_tau - (-h).ln_1p(),
    ];
    let rss = residuals(Model::Exponentials, t, y, &params).norm_squared();
    Some(Minimum {
        params,
        rss,
        iterations: best.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DischargeModel {
    Ohmic,
    Supercapacitor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DischargeVerdict {
    pub model: DischargeModel,
    /// `AIC(single) − AIC(double)`.
    pub evidence: f64,
    pub single: ExpFit,
    pub double: ExpFit,
}

/// Prefers two time constants when they lower the AIC by at least 10.
pub fn classify(trace: &ErgotropyTrace) -> Result<DischargeVerdict> {
    let single = fit_single_exp(trace)?;
    let double = fit_double_exp(trace)?;
    let evidence = single.aic(trace) - double.aic(trace);
    let model = if evidence >= AIC_THRESHOLD {
        DischargeModel::Supercapacitor
    } else {
        DischargeModel::Ohmic
    };
    Ok(DischargeVerdict {
        model,
        evidence,
        single,
        double,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64, n: usize, t_end: f64) -> ErgotropyTrace {
        let times: Vec<f64> = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| f(*t)).collect();
        let max = values.iter().fold(0.0_f64, |m, v| m.max(*v));
        ErgotropyTrace::new(times, values, max).unwrap()
    }

    #[test]
    fn recovers_single_exponential() {
        let tr = synthetic(|t| 5.0 * (-t / 2e-6).exp(), 50, 10e-6);
        let fit = fit_single_exp(&tr).unwrap();
        assert!((fit.amplitudes[0] / 5.0 - 1.0).abs() < 1e-8);
        assert!((fit.time_constants[0] / 2e-6 - 1.0).abs() < 1e-8);
        assert!(!fit.degenerate);
    }

    #[test]
    fn constant_trace_is_degenerate() {
        let tr = synthetic(|_| 3.0, 20, 1e-6);
        let fit = fit_single_exp(&tr).unwrap();
        assert!(fit.degenerate);
        assert!(fit.time_constants[0] >= 1e6 * 1e-6 * (1.0 - 1e-9));
    }

    #[test]
    fn recovers_double_exponential() {
        let tr = synthetic(|t| 3.0 * (-t / 1e-6).exp() + 2.0 * (-t / 10e-6).exp(), 60, 40e-6);
        let fit = fit_double_exp(&tr).unwrap();
        assert!((fit.amplitudes[0] / 3.0 - 1.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.amplitudes[1] / 2.0 - 1.0).abs() < 1e-6);
        assert!((fit.time_constants[0] / 1e-6 - 1.0).abs() < 1e-6);
        assert!((fit.time_constants[1] / 10e-6 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sample_count_preconditions() {
        let tr = synthetic(|t| (-t).exp(), 7, 1.0);
        assert!(fit_single_exp(&tr).is_err());
        let tr = synthetic(|t| (-t).exp(), 11, 1.0);
        assert!(fit_double_exp(&tr).is_err());
    }

    #[test]
    fn single_exponential_data_is_ohmic() {
        let tr = synthetic(|t| 4.0 * (-t / 5e-6).exp(), 100, 30e-6);
        let v = classify(&tr).unwrap();
        assert_eq!(v.model, DischargeModel::Ohmic);
    }
}

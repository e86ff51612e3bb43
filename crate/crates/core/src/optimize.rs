// Copyright 2026 The robust-pulse Authors
// SPDX-License-Identifier: Apache-2.0

//! Gradient-based minimizers over real parameter vectors.
//!
//! Two methods are provided: limited-memory BFGS with a strong-Wolfe line
//! search, and Adam. Both record one trace row per completed iteration.
//! With box bounds the quasi-Newton method switches to a projected search
//! with an Armijo backtracking rule.

use std::io::Write;
use std::ops::ControlFlow;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    QuasiNewton,
    AdaptiveMoment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub method: Method,
    pub max_iterations: usize,
    /// Cap on objective evaluations; `None` means only iterations count.
    pub max_evaluations: Option<usize>,
    pub gradient_tolerance: f64,
    /// Minimum improvement of the best objective over `stall_window`
    /// iterations before the run is declared stalled.
    pub objective_tolerance: f64,
    pub stall_window: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub memory: usize,
    pub c1: f64,
    pub c2: f64,
    /// Per-parameter `[low, high]`; a single pair is broadcast.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::QuasiNewton,
            max_iterations: 1000,
            max_evaluations: None,
            gradient_tolerance: 1e-8,
            objective_tolerance: 1e-12,
            stall_window: 20,
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            memory: 10,
            c1: 1e-4,
            c2: 0.9,
            bounds: None,
            seed: 0,
            init_scale: 1.0,
        }
    }
}

impl OptimizerConfig {
    pub fn quasi_newton() -> Self {
        Self::default()
    }

    pub fn adaptive_moment() -> Self {
        Self {
            method: Method::AdaptiveMoment,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gradient_tolerance", self.gradient_tolerance),
            ("objective_tolerance", self.objective_tolerance),
            ("learning_rate", self.learning_rate),
            ("epsilon", self.epsilon),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if self.max_evaluations == Some(0) {
            return Err(invalid("max_evaluations must be at least 1"));
        }
        if self.memory == 0 || self.stall_window == 0 {
            return Err(invalid("memory and stall_window must be at least 1"));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(invalid("line search constants need 0 < c1 < c2 < 1"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("Adam decay factors must lie in [0, 1)"));
        }
        if let Some(b) = &self.bounds {
            if b.iter().any(|&(lo, hi)| !(lo <= hi)) {
                return Err(invalid("bounds need low <= high"));
            }
        }
        Ok(())
    }

    fn bounds_for(&self, n: usize) -> Result<Option<Vec<(f64, f64)>>> {
        match &self.bounds {
            None => Ok(None),
            Some(b) if b.len() == 1 => Ok(Some(vec![b[0]; n])),
            Some(b) if b.len() == n => Ok(Some(b.clone())),
            Some(b) => Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            }),
        }
    }
}

/// Seeded starting point with entries uniform in `[-scale, scale]`.
pub fn random_start(n: usize, seed: u64, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradientTolerance,
    ObjectiveStalled,
    MaxIterations,
    MaxEvaluations,
    LineSearchFailed,
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerTrace {
    pub method: Method,
    pub initial_objective: f64,
    pub rows: Vec<TraceRow>,
    /// Last accepted iterate.
    pub theta: Vec<f64>,
    pub objective: f64,
    /// Lowest objective seen at an accepted iterate, and where.
    pub best_theta: Vec<f64>,
    pub best_objective: f64,
    pub evaluations: usize,
    pub termination: Option<Termination>,
}

impl OptimizerTrace {
    fn new(method: Method, theta: &[f64], f0: f64) -> Self {
        Self {
            method,
            initial_objective: f0,
            rows: Vec::new(),
            theta: theta.to_vec(),
            objective: f0,
            best_theta: theta.to_vec(),
            best_objective: f0,
            evaluations: 0,
            termination: None,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,objective,grad_norm,elapsed_s")?;
        for r in &self.rows {
            writeln!(w, "{},{:.16e},{:.16e},{:.6}", r.iter, r.objective, r.grad_norm, r.elapsed_s)?;
        }
        Ok(())
    }
}

/// What an observer sees after each accepted iteration.
#[derive(Debug)]
pub struct Progress<'a> {
    pub iter: usize,
    pub theta: &'a [f64],
    pub objective: f64,
    pub previous_objective: f64,
    pub grad_norm: f64,
    /// Line-search step length; `NaN` for Adam.
    pub step: f64,
    /// Directional derivative `g^T d` at the previous iterate; `NaN` for Adam.
    pub slope: f64,
}

/// A run ended on an error; the trace holds everything up to that point.
#[derive(Debug, thiserror::Error)]
#[error("optimizer aborted after {} iterations: {cause}", trace.rows.len())]
pub struct Aborted {
    pub cause: Error,
    pub trace: Box<OptimizerTrace>,
}

pub type Outcome = std::result::Result<OptimizerTrace, Aborted>;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project(theta: &mut [f64], bounds: &Option<Vec<(f64, f64)>>) {
    if let Some(b) = bounds {
        for (x, &(lo, hi)) in theta.iter_mut().zip(b) {
            *x = x.clamp(lo, hi);
        }
    }
}

/// Gradient with components that point out of an active bound removed.
fn projected_gradient(theta: &[f64], g: &[f64], bounds: &Option<Vec<(f64, f64)>>) -> Vec<f64> {
    match bounds {
        None => g.to_vec(),
        Some(b) => theta
            .iter()
            .zip(g)
            .zip(b)
            .map(|((&x, &gi), &(lo, hi))| {
                if (x <= lo && gi > 0.0) || (x >= hi && gi < 0.0) {
                    0.0
                } else {
                    gi
                }
            })
            .collect(),
    }
}

/// Counts evaluations and turns callback failures into aborts.
struct Evaluator<'f, F> {
    f: &'f mut F,
    count: usize,
    limit: Option<usize>,
}

enum EvalError {
    Budget,
    Failed(Error),
}

impl<F> Evaluator<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn call(&mut self, theta: &[f64]) -> std::result::Result<(f64, Vec<f64>), EvalError> {
        if self.limit.is_some_and(|l| self.count >= l) {
            return Err(EvalError::Budget);
        }
        self.count += 1;
        let (v, g) = (self.f)(theta).map_err(EvalError::Failed)?;
        if g.len() != theta.len() {
            return Err(EvalError::Failed(Error::DimensionMismatch {
                expected: theta.len(),
                found: g.len(),
            }));
        }
        if !v.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Err(EvalError::Failed(Error::NonFinite(format!(
                "objective {v} or gradient at evaluation {}",
                self.count
            ))));
        }
        Ok((v, g))
    }
}

struct Stall {
    window: usize,
    tol: f64,
    best: Vec<f64>,
}

impl Stall {
    fn stalled(&mut self, f: f64) -> bool {
        let best = self.best.last().map_or(f, |&b| b.min(f));
        self.best.push(best);
        let n = self.best.len();
        n > self.window && self.best[n - 1 - self.window] - best < self.tol
    }
}

/// Minimize `f`, which returns the objective and its gradient.
pub fn minimize<F>(mut f: F, theta0: &[f64], config: &OptimizerConfig) -> Outcome
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    minimize_observed(&mut f, theta0, config, |_| ControlFlow::Continue(()))
}

/// As [`minimize`], calling `observer` after each iteration. Returning
/// `Break` stops the run with [`Termination::Stopped`].
pub fn minimize_observed<F, O>(f: &mut F, theta0: &[f64], config: &OptimizerConfig, observer: O) -> Outcome
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    O: FnMut(&Progress<'_>) -> ControlFlow<()>,
{
    let empty = || Box::new(OptimizerTrace::new(config.method, theta0, f64::NAN));
    if let Err(cause) = config.validate() {
        return Err(Aborted { cause, trace: empty() });
    }
    let bounds = match config.bounds_for(theta0.len()) {
        Ok(b) => b,
        Err(cause) => return Err(Aborted { cause, trace: empty() }),
    };
    let mut run = Run {
        eval: Evaluator {
            f,
            count: 0,
            limit: config.max_evaluations,
        },
        config,
        bounds,
        start: Instant::now(),
        stall: Stall {
            window: config.stall_window,
            tol: config.objective_tolerance,
            best: Vec::new(),
        },
    };
    match config.method {
        Method::QuasiNewton => run.lbfgs(theta0, observer),
        Method::AdaptiveMoment => run.adam(theta0, observer),
    }
}

struct Run<'a, 'f, F> {
    eval: Evaluator<'f, F>,
    config: &'a OptimizerConfig,
    bounds: Option<Vec<(f64, f64)>>,
    start: Instant,
    stall: Stall,
}

/// Result of a line search: step, new point, value and gradient.
struct Accepted {
    alpha: f64,
    theta: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

impl<F> Run<'_, '_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn abort(&self, cause: Error, trace: OptimizerTrace) -> Aborted {
        Aborted {
            cause,
            trace: Box::new(OptimizerTrace {
                evaluations: self.eval.count,
                ..trace
            }),
        }
    }

    fn finish(&self, mut trace: OptimizerTrace, why: Termination) -> OptimizerTrace {
        trace.termination = Some(why);
        trace.evaluations = self.eval.count;
        trace
    }

    /// Append a row and update the accepted state. Returns the termination
    /// reason, if any, implied by this iteration.
    fn record<O>(
        &mut self,
        trace: &mut OptimizerTrace,
        observer: &mut O,
        theta: &[f64],
        f: f64,
        pg_norm: f64,
        step: f64,
        slope: f64,
    ) -> Option<Termination>
    where
        O: FnMut(&Progress<'_>) -> ControlFlow<()>,
    {
        let iter = trace.rows.len() + 1;
        let previous = trace.objective;
        trace.rows.push(TraceRow {
            iter,
            objective: f,
            grad_norm: pg_norm,
            elapsed_s: self.start.elapsed().as_secs_f64(),
        });
        trace.theta = theta.to_vec();
        trace.objective = f;
        if f < trace.best_objective {
            trace.best_objective = f;
            trace.best_theta = theta.to_vec();
        }
        let flow = observer(&Progress {
            iter,
            theta,
            objective: f,
            previous_objective: previous,
            grad_norm: pg_norm,
            step,
            slope,
        });
        if flow.is_break() {
            Some(Termination::Stopped)
        } else if pg_norm < self.config.gradient_tolerance {
            Some(Termination::GradientTolerance)
        } else if self.stall.stalled(f) {
            Some(Termination::ObjectiveStalled)
        } else if iter >= self.config.max_iterations {
            Some(Termination::MaxIterations)
        } else {
            None
        }
    }

    fn initial(&mut self, theta0: &[f64]) -> std::result::Result<(Vec<f64>, f64, Vec<f64>), Aborted> {
        let mut theta = theta0.to_vec();
        project(&mut theta, &self.bounds);
        match self.eval.call(&theta) {
            Ok((f, g)) => Ok((theta, f, g)),
            Err(EvalError::Failed(cause)) => {
                Err(self.abort(cause, OptimizerTrace::new(self.config.method, &theta, f64::NAN)))
            }
            Err(EvalError::Budget) => unreachable!("evaluation budget is at least one"),
        }
    }

    fn lbfgs<O>(&mut self, theta0: &[f64], mut observer: O) -> Outcome
    where
        O: FnMut(&Progress<'_>) -> ControlFlow<()>,
    {
        let (mut theta, mut f, mut g) = self.initial(theta0)?;
        let mut trace = OptimizerTrace::new(Method::QuasiNewton, &theta, f);
        self.stall.best.push(f);
        if norm(&projected_gradient(&theta, &g, &self.bounds)) < self.config.gradient_tolerance {
            return Ok(self.finish(trace, Termination::GradientTolerance));
        }
        let mut memory: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
        let mut first = true;
        loop {
            let mut d = two_loop(&g, &memory);
            if let Some(b) = &self.bounds {
                // Drop components that would push an active bound outward.
                for ((di, &x), &(lo, hi)) in d.iter_mut().zip(&theta).zip(b) {
                    if (x <= lo && *di < 0.0) || (x >= hi && *di > 0.0) {
                        *di = 0.0;
                    }
                }
            }
            let mut slope = dot(&g, &d);
            if !(slope < 0.0) {
                memory.clear();
                d = projected_gradient(&theta, &g, &self.bounds).iter().map(|x| -x).collect();
                slope = dot(&g, &d);
            }
            let alpha0 = if first { (1.0 / norm(&d)).min(1.0) } else { 1.0 };
            let searched = if self.bounds.is_some() {
                self.projected_armijo(&theta, f, &g, &d, alpha0)
            } else {
                self.strong_wolfe(&theta, f, slope, &d, alpha0)
            };
            let acc = match searched {
                Ok(Some(acc)) => acc,
                Ok(None) if !memory.is_empty() => {
                    memory.clear();
                    first = true;
                    continue;
                }
                Ok(None) => return Ok(self.finish(trace, Termination::LineSearchFailed)),
                Err(EvalError::Budget) => return Ok(self.finish(trace, Termination::MaxEvaluations)),
                Err(EvalError::Failed(cause)) => return Err(self.abort(cause, trace)),
            };
            first = false;
            let s: Vec<f64> = acc.theta.iter().zip(&theta).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = acc.g.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
                if memory.len() == self.config.memory {
                    memory.remove(0);
                }
                memory.push((s, y, 1.0 / sy));
            }
            theta = acc.theta;
            f = acc.f;
            g = acc.g;
            let pg = norm(&projected_gradient(&theta, &g, &self.bounds));
            if let Some(why) = self.record(&mut trace, &mut observer, &theta, f, pg, acc.alpha, slope) {
                return Ok(self.finish(trace, why));
            }
        }
    }

    /// Strong-Wolfe bracketing and zoom.
    fn strong_wolfe(
        &mut self,
        theta: &[f64],
        f0: f64,
        dphi0: f64,
        d: &[f64],
        alpha0: f64,
    ) -> std::result::Result<Option<Accepted>, EvalError> {
        const MAX_TRIALS: usize = 40;
        let (c1, c2) = (self.config.c1, self.config.c2);
        let eval_at = |this: &mut Self, a: f64| -> std::result::Result<Accepted, EvalError> {
            let x: Vec<f64> = theta.iter().zip(d).map(|(t, di)| t + a * di).collect();
            let (f, g) = this.eval.call(&x)?;
            Ok(Accepted {
                alpha: a,
                theta: x,
                f,
                g,
            })
        };
        let slope = |acc: &Accepted| dot(&acc.g, d);

        let mut prev_alpha = 0.0;
        let mut prev_f = f0;
        let mut prev_dphi = dphi0;
        let mut alpha = alpha0;
        let mut best_armijo: Option<Accepted> = None;
        let mut trials = 0;
        // Bracketing phase.
        let (mut lo, mut hi) = loop {
            trials += 1;
            let cur = eval_at(self, alpha)?;
            let dphi = slope(&cur);
            if cur.f > f0 + c1 * alpha * dphi0 || (trials > 1 && cur.f >= prev_f) {
                break ((prev_alpha, prev_f, prev_dphi), (alpha, cur.f, dphi));
            }
            if dphi.abs() <= -c2 * dphi0 {
                return Ok(Some(cur));
            }
            if dphi >= 0.0 {
                best_armijo = Some(cur);
                let b = best_armijo.as_ref().unwrap();
                break ((alpha, b.f, dphi), (prev_alpha, prev_f, prev_dphi));
            }
            prev_alpha = alpha;
            prev_f = cur.f;
            prev_dphi = dphi;
            best_armijo = Some(cur);
            alpha *= 2.0;
            if trials >= MAX_TRIALS {
                return Ok(best_armijo);
            }
        };
        // Zoom phase: `lo` always satisfies sufficient decrease and has the
        // lowest value seen inside the bracket.
        while trials < MAX_TRIALS {
            trials += 1;
            let (a_lo, f_lo, d_lo) = lo;
            let (a_hi, f_hi, d_hi) = hi;
            let width = a_hi - a_lo;
            if width.abs() < 1e-16 * a_lo.abs().max(1.0) {
                break;
            }
            let mut a = cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi);
            let (left, right) = if a_lo < a_hi { (a_lo, a_hi) } else { (a_hi, a_lo) };
            let margin = 0.1 * (right - left);
            if !a.is_finite() || a < left + margin || a > right - margin {
                a = 0.5 * (a_lo + a_hi);
            }
            let cur = eval_at(self, a)?;
            let dphi = slope(&cur);
            if cur.f > f0 + c1 * a * dphi0 || cur.f >= f_lo {
                hi = (a, cur.f, dphi);
            } else {
                if dphi.abs() <= -c2 * dphi0 {
                    return Ok(Some(cur));
                }
                if dphi * (a_hi - a_lo) >= 0.0 {
                    hi = lo;
                }
                lo = (a, cur.f, dphi);
                best_armijo = Some(cur);
            }
        }
        // Fall back to the best point with sufficient decrease, if any.
        Ok(best_armijo.filter(|b| b.f <= f0 + c1 * b.alpha * dphi0))
    }

    /// Backtracking along the projection arc `P(theta + alpha d)`.
    fn projected_armijo(
        &mut self,
        theta: &[f64],
        f0: f64,
        g: &[f64],
        d: &[f64],
        alpha0: f64,
    ) -> std::result::Result<Option<Accepted>, EvalError> {
        let mut alpha = alpha0;
        for _ in 0..40 {
            let mut x: Vec<f64> = theta.iter().zip(d).map(|(t, di)| t + alpha * di).collect();
            project(&mut x, &self.bounds);
            let moved: Vec<f64> = x.iter().zip(theta).map(|(a, b)| a - b).collect();
            let decrease = dot(g, &moved);
            if decrease >= 0.0 {
                alpha *= 0.5;
                continue;
            }
            let (f, gn) = self.eval.call(&x)?;
            if f <= f0 + self.config.c1 * decrease {
                return Ok(Some(Accepted {
                    alpha,
                    theta: x,
                    f,
                    g: gn,
                }));
            }
            alpha *= 0.5;
        }
        Ok(None)
    }

    fn adam<O>(&mut self, theta0: &[f64], mut observer: O) -> Outcome
    where
        O: FnMut(&Progress<'_>) -> ControlFlow<()>,
    {
        let (mut theta, f0, mut g) = self.initial(theta0)?;
        let mut trace = OptimizerTrace::new(Method::AdaptiveMoment, &theta, f0);
        self.stall.best.push(f0);
        if norm(&projected_gradient(&theta, &g, &self.bounds)) < self.config.gradient_tolerance {
            return Ok(self.finish(trace, Termination::GradientTolerance));
        }
        let c = self.config;
        let n = theta.len();
        let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
        for t in 1.. {
            let b1t = 1.0 - c.beta1.powi(t);
            let b2t = 1.0 - c.beta2.powi(t);
            for i in 0..n {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                theta[i] -= c.learning_rate * (m[i] / b1t) / ((v[i] / b2t).sqrt() + c.epsilon);
            }
            project(&mut theta, &self.bounds);
            let f = match self.eval.call(&theta) {
                Ok((f, gn)) => {
                    g = gn;
                    f
                }
                Err(EvalError::Budget) => return Ok(self.finish(trace, Termination::MaxEvaluations)),
                Err(EvalError::Failed(cause)) => return Err(self.abort(cause, trace)),
            };
            let pg = norm(&projected_gradient(&theta, &g, &self.bounds));
            if let Some(why) = self.record(&mut trace, &mut observer, &theta, f, pg, f64::NAN, f64::NAN) {
                return Ok(self.finish(trace, why));
            }
        }
        unreachable!()
    }
}

/// L-BFGS two-loop recursion: returns `-H g`.
fn two_loop(g: &[f64], memory: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = vec![0.0; memory.len()];
    for (i, (s, y, rho)) in memory.iter().enumerate().rev() {
        let a = rho * dot(s, &q);
        alphas[i] = a;
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
    }
    if let Some((s, y, _)) = memory.last() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for (i, (s, y, rho)) in memory.iter().enumerate() {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (alphas[i] - b) * si);
    }
    q.iter_mut().for_each(|x| *x = -*x);
    q
}

/// Minimizer of the cubic matching values and slopes at two points.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < 0.0 {
        return f64::NAN;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((dot(theta, theta), theta.iter().map(|x| 2.0 * x).collect()))
    }

    fn rosenbrock(t: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (x, y) = (t[0], t[1]);
        let f = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
        let g = vec![-2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)];
        Ok((f, g))
    }

    #[test]
    fn quasi_newton_solves_quadratic() {
        let theta0 = random_start(6, 11, 1.0);
        let cfg = OptimizerConfig {
            max_iterations: 100,
            ..OptimizerConfig::quasi_newton()
        };
        let tr = minimize(quadratic, &theta0, &cfg).unwrap();
        assert!(norm(&tr.theta) < 1e-6, "{:?}", tr.theta);
        assert!(tr.rows.len() <= 100);
    }

    #[test]
    fn quasi_newton_solves_rosenbrock() {
        let cfg = OptimizerConfig {
            max_iterations: 500,
            ..OptimizerConfig::quasi_newton()
        };
        let tr = minimize(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
        assert!(tr.objective < 1e-8, "f = {:e} after {} iters", tr.objective, tr.rows.len());
        assert!(tr.rows.len() <= 500);
    }

    #[test]
    fn adam_reaches_quadratic_target() {
        let theta0 = random_start(6, 12, 1.0);
        let cfg = OptimizerConfig {
            max_iterations: 2000,
            ..OptimizerConfig::adaptive_moment()
        };
        let tr = minimize(quadratic, &theta0, &cfg).unwrap();
        let reached = tr.rows.iter().position(|r| r.objective < 1e-4);
        assert!(reached.is_some(), "final {:e}", tr.objective);
    }

    #[test]
    fn accepted_steps_have_sufficient_decrease() {
        let cfg = OptimizerConfig::quasi_newton();
        let mut checks = 0;
        let mut f = rosenbrock;
        minimize_observed(&mut f, &[-1.2, 1.0], &cfg, |p| {
            assert!(p.objective <= p.previous_objective + cfg.c1 * p.step * p.slope + 1e-15);
            checks += 1;
            ControlFlow::Continue(())
        })
        .unwrap();
        assert!(checks > 10);
    }

    #[test]
    fn objective_is_monotone_for_quasi_newton() {
        let tr = minimize(rosenbrock, &[-1.2, 1.0], &OptimizerConfig::quasi_newton()).unwrap();
        let mut prev = tr.initial_objective;
        for r in &tr.rows {
            assert!(r.objective <= prev);
            prev = r.objective;
        }
        assert_eq!(tr.objective, tr.rows.last().unwrap().objective);
    }

    #[test]
    fn runs_are_deterministic() {
        for cfg in [OptimizerConfig::quasi_newton(), OptimizerConfig::adaptive_moment()] {
            let cfg = OptimizerConfig {
                max_iterations: 50,
                ..cfg
            };
            let a = minimize(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
            let b = minimize(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
            let strip = |t: &OptimizerTrace| t.rows.iter().map(|r| (r.iter, r.objective, r.grad_norm)).collect::<Vec<_>>();
            assert_eq!(strip(&a), strip(&b));
            assert_eq!(a.theta, b.theta);
        }
        assert_eq!(random_start(5, 3, 1.0), random_start(5, 3, 1.0));
        assert_ne!(random_start(5, 3, 1.0), random_start(5, 4, 1.0));
        assert!(random_start(100, 3, 0.5).iter().all(|x| x.abs() <= 0.5));
    }

    #[test]
    fn bounds_are_respected() {
        let shifted = |t: &[f64]| -> Result<(f64, Vec<f64>)> {
            let f = t.iter().map(|x| (x - 3.0).powi(2)).sum();
            Ok((f, t.iter().map(|x| 2.0 * (x - 3.0)).collect()))
        };
        for method in [Method::QuasiNewton, Method::AdaptiveMoment] {
            let cfg = OptimizerConfig {
                method,
                bounds: Some(vec![(-1.0, 1.0)]),
                max_iterations: 300,
                learning_rate: 0.05,
                ..OptimizerConfig::default()
            };
            let mut seen = Vec::new();
            let mut f = shifted;
            let tr = minimize_observed(&mut f, &[0.2, -0.5, 0.9], &cfg, |p| {
                seen.push(p.theta.to_vec());
                ControlFlow::Continue(())
            })
            .unwrap();
            assert!(seen.iter().flatten().all(|x| (-1.0..=1.0).contains(x)));
            for x in &tr.theta {
                assert!((x - 1.0).abs() < 1e-6, "{method:?}: {:?}", tr.theta);
            }
        }
    }

    #[test]
    fn single_iteration_budget_gives_one_row() {
        for cfg in [OptimizerConfig::quasi_newton(), OptimizerConfig::adaptive_moment()] {
            let cfg = OptimizerConfig {
                max_iterations: 1,
                ..cfg
            };
            let tr = minimize(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
            assert_eq!(tr.rows.len(), 1);
            assert_eq!(tr.termination, Some(Termination::MaxIterations));
        }
    }

    #[test]
    fn non_finite_objective_aborts_with_trace() {
        let mut calls = 0;
        let f = |t: &[f64]| -> Result<(f64, Vec<f64>)> {
            calls += 1;
            if calls > 3 {
                Ok((f64::NAN, vec![0.0; t.len()]))
            } else {
                quadratic(t)
            }
        };
        let err = minimize(f, &[1.0, 2.0], &OptimizerConfig::adaptive_moment()).unwrap_err();
        assert!(matches!(err.cause, Error::NonFinite(_)));
        assert_eq!(err.trace.rows.len(), 2);
    }

    #[test]
    fn evaluation_budget_and_stall() {
        let cfg = OptimizerConfig {
            max_evaluations: Some(7),
            ..OptimizerConfig::quasi_newton()
        };
        let tr = minimize(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
        assert!(tr.evaluations <= 7);
        assert_eq!(tr.termination, Some(Termination::MaxEvaluations));

        let flat = |t: &[f64]| -> Result<(f64, Vec<f64>)> { Ok((1.0, vec![1.0; t.len()])) };
        let cfg = OptimizerConfig {
            learning_rate: 1e-3,
            ..OptimizerConfig::adaptive_moment()
        };
        let tr = minimize(flat, &[0.0], &cfg).unwrap();
        assert_eq!(tr.termination, Some(Termination::ObjectiveStalled));
        assert_eq!(tr.rows.len(), 20);
    }

    #[test]
    fn config_validation() {
        let bad = [
            OptimizerConfig {
                gradient_tolerance: 0.0,
                ..Default::default()
            },
            OptimizerConfig {
                max_iterations: 0,
                ..Default::default()
            },
            OptimizerConfig {
                c1: 0.95,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(minimize(quadratic, &[1.0], &cfg).is_err());
        }
        let json = r#"{"method":"adaptive-moment","max_iterations":5}"#;
        let cfg: OptimizerConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.method, Method::AdaptiveMoment);
        assert_eq!(cfg.learning_rate, 0.01);
        assert!(serde_json::from_str::<OptimizerConfig>(r#"{"rate":1}"#).is_err());
    }

    #[test]
    fn trace_csv_format() {
        let cfg = OptimizerConfig {
            max_iterations: 3,
            ..Default::default()
        };
        let tr = minimize(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iter,objective,grad_norm,elapsed_s");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,"));
    }
}

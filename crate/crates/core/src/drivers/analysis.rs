// Copyright 2026 The robust-pulse Authors
// SPDX-License-Identifier: Apache-2.0

//! Evaluation of fixed pulses: dense-grid replay, random test batteries,
//! robustness landscapes, integrator self-convergence and the estimator
//! benchmark along an optimization trajectory.

use std::io::Write;
use std::ops::ControlFlow;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_with_pulse, Algorithm, BatterySpec, SamplerSpec, ScenarioConfig};
use crate::error::{invalid, Error, Result};
use crate::objective::{Distribution, RobustObjective};
use crate::optimize::{minimize_observed, random_start, OptimizerConfig};
use crate::pulses::{Pulse, PulseFamily};
use crate::qdyn::frobenius_norm;
use crate::sparsegrid::{monte_carlo_set, variance_of, MonteCarloStream, SamplingSet};

/// Infidelity thresholds reported as enclosed-area fractions.
pub const CONTOUR_LEVELS: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

/// `max ||U_M - U_2M||_F` over the nominal point and every sampling node.
pub fn self_convergence(obj: &RobustObjective, theta: &[f64]) -> Result<f64> {
    let pulse = obj.pulse_at(theta)?;
    let fine = obj.with_grid(obj.grid.refined(2));
    let nominal = obj.map.physical(&vec![0.0; obj.map.dim()]);
    let mut points = vec![nominal];
    points.extend(obj.sampling.points().iter().map(|n| obj.map.physical(&n.coords)));
    let residuals = points
        .par_iter()
        .map(|delta| {
            let a = obj.propagate_at(&pulse, delta)?;
            let b = fine.propagate_at(&pulse, delta)?;
            Ok(frobenius_norm(&(a.matrix() - b.matrix())))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(residuals.into_iter().fold(0.0, f64::max))
}

/// Pointwise infidelities at `draws` physical uncertainty vectors drawn
/// from the scenario distributions.
pub fn battery(obj: &RobustObjective, theta: &[f64], draws: usize, seed: u64) -> Result<Vec<f64>> {
    let pulse = obj.pulse_at(theta)?;
    let mut stream = MonteCarloStream::new(obj.map.dim(), &obj.map.measures(), seed)?;
    let points: Vec<Vec<f64>> = (0..draws).map(|_| obj.map.physical(&stream.next_point())).collect();
    points.par_iter().map(|delta| obj.pointwise(&pulse, delta)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatterySummary {
    pub draws: usize,
    pub seed: u64,
    pub mean: f64,
    pub median: f64,
    pub worst: f64,
    pub best: f64,
}

impl BatterySummary {
    fn new(spec: BatterySpec, values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            draws: spec.draws,
            seed: spec.seed,
            mean: values.iter().sum::<f64>() / values.len() as f64,
            median: median_sorted(&sorted),
            worst: *sorted.last().unwrap(),
            best: sorted[0],
        }
    }
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    median_sorted(&v)
}

/// Pointwise infidelity on a regular grid over two uncertainty axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub axes: [usize; 2],
    pub labels: [String; 2],
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[iy * xs.len() + ix]`.
    pub values: Vec<f64>,
}

impl Landscape {
    /// Fraction of cells with infidelity at or below each level.
    pub fn contour_fractions(&self, levels: &[f64]) -> Vec<f64> {
        let n = self.values.len() as f64;
        levels
            .iter()
            .map(|&l| self.values.iter().filter(|&&v| v <= l).count() as f64 / n)
            .collect()
    }

    pub fn minimum(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},{},infidelity", self.labels[0], self.labels[1])?;
        for (iy, y) in self.ys.iter().enumerate() {
            for (ix, x) in self.xs.iter().enumerate() {
                writeln!(w, "{x:.16e},{y:.16e},{:.16e}", self.values[iy * self.xs.len() + ix])?;
            }
        }
        Ok(())
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Scans two physical uncertainty axes with every other uncertainty at zero.
pub fn landscape_scan(
    obj: &RobustObjective,
    theta: &[f64],
    axes: [usize; 2],
    ranges: [(f64, f64); 2],
    resolution: usize,
    labels: [&str; 2],
) -> Result<Landscape> {
    let d = obj.map.dim();
    if axes[0] >= d || axes[1] >= d || axes[0] == axes[1] {
        return Err(invalid(format!("landscape axes {axes:?} invalid for {d} uncertainties")));
    }
    if resolution == 0 {
        return Err(invalid("landscape resolution must be >= 1"));
    }
    if ranges.iter().any(|&(lo, hi)| !(lo <= hi)) {
        return Err(invalid("landscape ranges need low <= high"));
    }
    let pulse = obj.pulse_at(theta)?;
    let xs = linspace(ranges[0].0, ranges[0].1, resolution);
    let ys = linspace(ranges[1].0, ranges[1].1, resolution);
    let cells: Vec<(f64, f64)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    let values = cells
        .par_iter()
        .map(|&(x, y)| {
            let mut delta = vec![0.0; d];
            delta[axes[0]] = x;
            delta[axes[1]] = y;
            obj.pointwise(&pulse, &delta)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Landscape {
        axes,
        labels: labels.map(str::to_string),
        xs,
        ys,
        values,
    })
}

/// Physical scan range of one uncertainty: its support, or three standard
/// deviations for a normal.
fn scan_range(d: &Distribution) -> (f64, f64) {
    match *d {
        Distribution::Uniform { low, high } => (low, high),
        Distribution::Normal { mean, std } => (mean - 3.0 * std, mean + 3.0 * std),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOptions {
    /// Points per landscape axis; zero skips the landscapes.
    pub landscape_resolution: usize,
    /// Test battery; `None` or zero draws skips it.
    pub battery: Option<BatterySpec>,
}

impl ReplayOptions {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            landscape_resolution: cfg.landscape_resolution,
            battery: Some(cfg.battery),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSummary {
    pub labels: [String; 2],
    pub resolution: usize,
    pub minimum: f64,
    pub contour_levels: Vec<f64>,
    pub contour_fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub scenario: String,
    pub metric: crate::objective::Metric,
    /// Expectation on the dense reference grid.
    pub expected_infidelity: f64,
    pub reference_nodes: usize,
    pub reference_variance: f64,
    /// Estimate from the scenario's own sampler.
    pub sampler_estimate: f64,
    pub sampler: String,
    pub n_nodes: usize,
    pub nominal_infidelity: f64,
    pub battery: Option<BatterySummary>,
    /// Step-doubling residual of the propagator at the default step count.
    pub self_convergence: f64,
    pub steps: usize,
    pub landscapes: Vec<LandscapeSummary>,
    pub wall_time_s: f64,
}

/// Evaluates a stored pulse against its scenario.
pub fn replay_table1(cfg: &ScenarioConfig, pulse: &Pulse, opts: &ReplayOptions) -> Result<(ReplayReport, Vec<Landscape>)> {
    let start = Instant::now();
    let seed = cfg.seeds.first().copied().unwrap_or(0);
    let obj = build_with_pulse(cfg, pulse.clone(), cfg.sampling(seed)?)?;
    let theta = pulse.params();
    let reference = obj.with_sampling(cfg.reference_sampling()?)?;
    let values = reference.node_infidelities(&theta)?;
    let nominal = obj.pointwise(pulse, &obj.map.physical(&vec![0.0; obj.map.dim()]))?;

    let battery = match opts.battery {
        Some(spec) if spec.draws > 0 => {
            let vals = battery(&obj, &theta, spec.draws, spec.seed)?;
            Some(BatterySummary::new(spec, &vals))
        }
        _ => None,
    };

    let mut landscapes = Vec::new();
    if opts.landscape_resolution > 0 {
        let labels = cfg.template.uncertainty_labels();
        let d = labels.len();
        for i in 0..d {
            for j in i + 1..d {
                landscapes.push(landscape_scan(
                    &obj,
                    &theta,
                    [i, j],
                    [scan_range(&cfg.uncertainties[i]), scan_range(&cfg.uncertainties[j])],
                    opts.landscape_resolution,
                    [labels[i], labels[j]],
                )?);
            }
        }
    }

    let report = ReplayReport {
        scenario: cfg.name.clone(),
        metric: cfg.metric,
        expected_infidelity: reference.sampling.weighted_sum(&values),
        reference_nodes: reference.sampling.len(),
        reference_variance: variance_of(&reference.sampling, &values),
        sampler_estimate: obj.expected_infidelity(&theta)?,
        sampler: obj.sampling.kind().to_string(),
        n_nodes: obj.sampling.len(),
        nominal_infidelity: nominal,
        battery,
        self_convergence: self_convergence(&obj, &theta)?,
        steps: obj.grid.steps(),
        landscapes: landscapes
            .iter()
            .map(|l| LandscapeSummary {
                labels: l.labels.clone(),
                resolution: l.xs.len(),
                minimum: l.minimum(),
                contour_levels: CONTOUR_LEVELS.to_vec(),
                contour_fractions: l.contour_fractions(&CONTOUR_LEVELS),
            })
            .collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((report, landscapes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkOptions {
    /// Optimizer iterations along each trajectory.
    pub iterations: usize,
    /// Checkpoint spacing in iterations; iteration 0 is always included.
    pub every: usize,
    /// Independent Monte Carlo sets evaluated at each checkpoint.
    pub mc_seeds: usize,
    pub mc_samples: usize,
    /// Also follow a bGRAPE trajectory from the same start.
    pub include_bgrape: bool,
    pub seed: u64,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            iterations: 200,
            every: 20,
            mc_seeds: 50,
            mc_samples: 61,
            include_bgrape: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub iter: usize,
    pub estimator: String,
    pub estimate: f64,
    pub reference: f64,
    pub abs_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub rows: Vec<BenchRow>,
    pub checkpoints: Vec<usize>,
    /// Per checkpoint: Smolyak error and median Monte Carlo error.
    pub smolyak_abs_err: Vec<f64>,
    pub mc_median_abs_err: Vec<f64>,
    pub bgrape_abs_err: Vec<f64>,
}

impl BenchmarkResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,estimator,estimate,reference,abs_err")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{:.16e},{:.16e},{:.16e}",
                r.iter, r.estimator, r.estimate, r.reference, r.abs_err
            )?;
        }
        Ok(())
    }

    pub fn median_smolyak_err(&self) -> f64 {
        median(&self.smolyak_abs_err)
    }

    pub fn median_mc_err(&self) -> f64 {
        median(&self.mc_median_abs_err)
    }

    pub fn median_bgrape_err(&self) -> Option<f64> {
        (!self.bgrape_abs_err.is_empty()).then(|| median(&self.bgrape_abs_err))
    }
}

/// Follows an smGRAPE trajectory and, at each checkpoint, compares the
/// Smolyak estimate and many Monte Carlo estimates of the same pulse with
/// the dense reference; optionally also tracks a bGRAPE trajectory.
pub fn benchmark(cfg: &ScenarioConfig, opts: &BenchmarkOptions) -> Result<BenchmarkResult> {
    let SamplerSpec::Smolyak { level } = cfg.sampler else {
        return Err(Error::Config("benchmark needs a smolyak sampler".into()));
    };
    if opts.every == 0 || opts.iterations == 0 || opts.mc_samples == 0 {
        return Err(Error::Config("benchmark iterations, every and mc_samples must be >= 1".into()));
    }
    let sm_cfg = ScenarioConfig {
        algorithm: Algorithm::Smgrape,
        ..cfg.clone()
    };
    let obj = build_with_pulse(&sm_cfg, sm_cfg.zero_pulse()?, sm_cfg.sampling(opts.seed)?)?;
    let reference = obj.with_sampling(cfg.reference_sampling()?)?;
    let optimizer = OptimizerConfig {
        method: Algorithm::Smgrape.method(),
        max_iterations: opts.iterations,
        max_evaluations: None,
        seed: opts.seed,
        ..cfg.optimizer.clone()
    };
    let theta0 = random_start(obj.n_params(), opts.seed, optimizer.init_scale);
    let at_checkpoint = |i: usize| i % opts.every == 0 || i == opts.iterations;

    let mut sm_points: Vec<(usize, Vec<f64>)> = vec![(0, theta0.clone())];
    let mut f = |theta: &[f64]| obj.value_and_gradient(theta);
    minimize_observed(&mut f, &theta0, &optimizer, |p| {
        if at_checkpoint(p.iter) {
            sm_points.push((p.iter, p.theta.to_vec()));
        }
        ControlFlow::Continue(())
    })
    .map_err(|a| Error::Aborted(Box::new(a)))?;

    let d = obj.map.dim();
    let measures = obj.map.measures();
    let mc_sets: Vec<SamplingSet> = (0..opts.mc_seeds as u64)
        .map(|s| monte_carlo_set(d, opts.mc_samples, &measures, s))
        .collect::<Result<_>>()?;
    let mc_objs: Vec<RobustObjective> = mc_sets
        .into_iter()
        .map(|s| obj.with_sampling(s))
        .collect::<Result<_>>()?;

    let mut result = BenchmarkResult {
        rows: Vec::new(),
        checkpoints: Vec::new(),
        smolyak_abs_err: Vec::new(),
        mc_median_abs_err: Vec::new(),
        bgrape_abs_err: Vec::new(),
    };
    let row = |iter: usize, estimator: String, estimate: f64, reference: f64| BenchRow {
        iter,
        estimator,
        estimate,
        reference,
        abs_err: (estimate - reference).abs(),
    };
    for (iter, theta) in &sm_points {
        let truth = reference.expected_infidelity(theta)?;
        let sm = obj.expected_infidelity(theta)?;
        result.rows.push(row(*iter, format!("smolyak-k{level}"), sm, truth));
        result.checkpoints.push(*iter);
        result.smolyak_abs_err.push((sm - truth).abs());
        let mut errs = Vec::with_capacity(mc_objs.len());
        for (s, mc) in mc_objs.iter().enumerate() {
            let est = mc.expected_infidelity(theta)?;
            errs.push((est - truth).abs());
            result.rows.push(row(*iter, format!("mc-{}:seed{s}", opts.mc_samples), est, truth));
        }
        if !errs.is_empty() {
            result.mc_median_abs_err.push(median(&errs));
        }
    }

    if opts.include_bgrape {
        let mut stream = MonteCarloStream::new(d, &measures, opts.seed)?;
        let mut b_points: Vec<(usize, f64, Vec<f64>)> = Vec::new();
        let mut f = |theta: &[f64]| {
            let batch = stream.next_set(opts.mc_samples)?;
            obj.with_sampling(batch)?.value_and_gradient(theta)
        };
        let trace = minimize_observed(&mut f, &theta0, &optimizer, |p| {
            if at_checkpoint(p.iter) {
                b_points.push((p.iter, p.objective, p.theta.to_vec()));
            }
            ControlFlow::Continue(())
        })
        .map_err(|a| Error::Aborted(Box::new(a)))?;
        b_points.insert(0, (0, trace.initial_objective, theta0.clone()));
        for (iter, est, theta) in &b_points {
            let truth = reference.expected_infidelity(theta)?;
            result
                .rows
                .push(row(*iter, format!("bgrape-mc-{}", opts.mc_samples), *est, truth));
            result.bgrape_abs_err.push((est - truth).abs());
        }
    }
    Ok(result)
}

// Copyright 2026 The robust-pulse Authors
// SPDX-License-Identifier: Apache-2.0

//! Optimization runs and their on-disk result bundles.

use std::io::Write;
use std::ops::ControlFlow;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{build_with_pulse, Algorithm, PulseSpec, SamplerSpec, ScenarioConfig};
use crate::error::{Error, Result};
use crate::objective::RobustObjective;
use crate::optimize::{minimize_observed, random_start, OptimizerTrace, Progress, Termination};
use crate::pulses::Pulse;
use crate::sparsegrid::{MonteCarloStream, SamplingSet, MC_RNG_ID};

/// Summary written as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Objective re-evaluated on the run's own sampling set.
    pub expected_infidelity: f64,
    /// Expectation on the dense reference grid.
    pub reference_infidelity: f64,
    /// Largest pointwise infidelity over the reference nodes.
    pub worst_case: f64,
    pub n_nodes: usize,
    pub reference_nodes: usize,
    pub sampler: String,
    pub rng: String,
    pub integrator: String,
    pub steps: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Option<Termination>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Fully resolved configuration of this single-seed run.
    pub config: ScenarioConfig,
    pub pulse: Pulse,
    pub trace: OptimizerTrace,
    pub sampling: SamplingSet,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub seed: u64,
    pub expected_infidelity: f64,
    pub reference_infidelity: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Option<Termination>,
}

/// Multi-seed sweep; `best` has the lowest reference infidelity.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub entries: Vec<SweepEntry>,
    pub best: RunOutcome,
}

impl Sweep {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "seed,expected_infidelity,reference_infidelity,iterations,evaluations,termination")?;
        for e in &self.entries {
            let term = e
                .termination
                .map(|t| serde_json::to_value(t).unwrap().as_str().unwrap_or_default().to_string())
                .unwrap_or_default();
            writeln!(
                w,
                "{},{:.16e},{:.16e},{},{},{}",
                e.seed, e.expected_infidelity, e.reference_infidelity, e.iterations, e.evaluations, term
            )?;
        }
        Ok(())
    }
}

/// Configuration of a single run with every seed-dependent choice pinned.
fn resolve(cfg: &ScenarioConfig, seed: u64) -> ScenarioConfig {
    let mut r = cfg.clone();
    r.seeds = vec![seed];
    r.optimizer.seed = seed;
    r.optimizer.method = cfg.algorithm.method();
    if let SamplerSpec::MonteCarlo { seed: s @ None, .. } = &mut r.sampler {
        *s = Some(seed);
    }
    // Keep iterates inside the amplitude clamp so gradients stay exact.
    if let (PulseSpec::Piecewise { bound: Some(b), .. }, None) = (&r.pulse, &r.optimizer.bounds) {
        r.optimizer.bounds = Some(vec![(-*b, *b)]);
    }
    r
}

/// One optimization from the seeded random start.
pub fn run_seed(
    cfg: &ScenarioConfig,
    seed: u64,
    observer: &mut dyn FnMut(&Progress<'_>) -> ControlFlow<()>,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let config = resolve(cfg, seed);
    config.validate()?;
    let sampling = config.sampling(seed)?;
    let obj = build_with_pulse(&config, config.zero_pulse()?, sampling.clone())?;
    let theta0 = random_start(obj.n_params(), seed, config.optimizer.init_scale);

    let outcome = match config.algorithm {
        Algorithm::Smgoat | Algorithm::Smgrape => {
            let mut f = |theta: &[f64]| obj.value_and_gradient(theta);
            minimize_observed(&mut f, &theta0, &config.optimizer, &mut *observer)
        }
        Algorithm::Bgrape => {
            let SamplerSpec::MonteCarlo { samples, seed: stream_seed } = config.sampler else {
                unreachable!("validated")
            };
            let measures = config.map()?.measures();
            let mut stream = MonteCarloStream::new(obj.sampling.dim(), &measures, stream_seed.unwrap_or(seed))?;
            let mut f = |theta: &[f64]| {
                let batch = stream.next_set(samples)?;
                obj.with_sampling(batch)?.value_and_gradient(theta)
            };
            minimize_observed(&mut f, &theta0, &config.optimizer, &mut *observer)
        }
    };
    let trace = outcome.map_err(|a| Error::Aborted(Box::new(a)))?;
    finish(config, obj, sampling, trace, seed, start)
}

fn finish(
    config: ScenarioConfig,
    obj: RobustObjective,
    sampling: SamplingSet,
    trace: OptimizerTrace,
    seed: u64,
    start: Instant,
) -> Result<RunOutcome> {
    let theta = &trace.theta;
    let pulse = obj.pulse_at(theta)?;
    let expected = obj.expected_infidelity(theta)?;
    let reference = obj.with_sampling(config.reference_sampling()?)?;
    let values = reference.node_infidelities(theta)?;
    let report = RunReport {
        scenario: config.name.clone(),
        algorithm: config.algorithm,
        seed,
        expected_infidelity: expected,
        reference_infidelity: reference.sampling.weighted_sum(&values),
        worst_case: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        n_nodes: sampling.len(),
        reference_nodes: reference.sampling.len(),
        sampler: sampling.kind().to_string(),
        rng: MC_RNG_ID.to_string(),
        integrator: format!("{:?}", obj.integrator).to_lowercase(),
        steps: obj.grid.steps(),
        iterations: trace.rows.len(),
        evaluations: trace.evaluations,
        termination: trace.termination,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutcome {
        config,
        pulse,
        trace,
        sampling,
        report,
    })
}

/// Runs every configured seed and keeps the best by reference infidelity.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Sweep> {
    run_scenario_observed(cfg, &mut |_, _| ControlFlow::Continue(()))
}

pub fn run_scenario_observed(
    cfg: &ScenarioConfig,
    observer: &mut dyn FnMut(u64, &Progress<'_>) -> ControlFlow<()>,
) -> Result<Sweep> {
    cfg.validate()?;
    let mut entries = Vec::new();
    let mut best: Option<RunOutcome> = None;
    for &seed in &cfg.seeds {
        let run = run_seed(cfg, seed, &mut |p| observer(seed, p))?;
        entries.push(SweepEntry {
            seed,
            expected_infidelity: run.report.expected_infidelity,
            reference_infidelity: run.report.reference_infidelity,
            iterations: run.report.iterations,
            evaluations: run.report.evaluations,
            termination: run.report.termination,
        });
        if best
            .as_ref()
            .is_none_or(|b| run.report.reference_infidelity < b.report.reference_infidelity)
        {
            best = Some(run);
        }
    }
    Ok(Sweep {
        entries,
        best: best.expect("at least one seed"),
    })
}

fn with_algorithm(cfg: &ScenarioConfig, algorithm: Algorithm) -> ScenarioConfig {
    ScenarioConfig {
        algorithm,
        ..cfg.clone()
    }
}

pub fn run_smgoat(cfg: &ScenarioConfig) -> Result<Sweep> {
    run_scenario(&with_algorithm(cfg, Algorithm::Smgoat))
}

pub fn run_smgrape(cfg: &ScenarioConfig) -> Result<Sweep> {
    run_scenario(&with_algorithm(cfg, Algorithm::Smgrape))
}

pub fn run_bgrape(cfg: &ScenarioConfig) -> Result<Sweep> {
    run_scenario(&with_algorithm(cfg, Algorithm::Bgrape))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub(crate) fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Pretty JSON, written atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &json_bytes(value)?)
}

/// Writes `config.json`, `pulse.json`, `trace.csv`, `grid.csv` and
/// `report.json` into `dir`.
pub fn write_bundle(dir: &Path, run: &RunOutcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join("config.json"), &json_bytes(&run.config)?)?;
    write_atomic(&dir.join("pulse.json"), &json_bytes(&run.pulse.to_file())?)?;
    let mut trace = Vec::new();
    run.trace.write_csv(&mut trace)?;
    write_atomic(&dir.join("trace.csv"), &trace)?;
    let mut grid = Vec::new();
    run.sampling.write_csv(&mut grid)?;
    write_atomic(&dir.join("grid.csv"), &grid)?;
    write_atomic(&dir.join("report.json"), &json_bytes(&run.report)?)?;
    Ok(())
}

/// Bundle of the best run plus `sweep.csv` listing every seed.
pub fn write_sweep(dir: &Path, sweep: &Sweep) -> Result<()> {
    write_bundle(dir, &sweep.best)?;
    let mut buf = Vec::new();
    sweep.write_csv(&mut buf)?;
    write_atomic(&dir.join("sweep.csv"), &buf)
}

/// Trace of an aborted run, so partial progress survives.
pub fn write_partial_trace(dir: &Path, trace: &OptimizerTrace) -> Result<()> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    write_atomic(&dir.join("trace.csv"), &buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::PulseFamily;
    use crate::drivers::build_with_pulse;

    fn quick(name: &str, iters: usize) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::preset(name).unwrap();
        cfg.optimizer.max_iterations = iters;
        cfg.optimizer.max_evaluations = None;
        cfg.seeds = vec![3];
        cfg.steps = Some(cfg.propagation_grid().unwrap().steps() / 10);
        cfg.reference_order = Some(3);
        cfg
    }

    #[test]
    fn single_iteration_run_has_one_trace_row() {
        let cfg = quick("hadamard", 1);
        let run = run_seed(&cfg, 3, &mut |_| ControlFlow::Continue(())).unwrap();
        assert_eq!(run.trace.rows.len(), 1);
        assert_eq!(run.report.iterations, 1);
        assert_eq!(run.report.n_nodes, 13);
        assert_eq!(run.report.reference_nodes, 9);
    }

    #[test]
    fn bundle_reloads_to_recorded_objective() {
        let cfg = quick("hadamard", 5);
        let run = run_seed(&cfg, 3, &mut |_| ControlFlow::Continue(())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), &run).unwrap();
        let config = ScenarioConfig::load(&dir.path().join("config.json")).unwrap();
        let pulse = Pulse::load(&dir.path().join("pulse.json")).unwrap();
        let obj = build_with_pulse(&config, pulse.clone(), config.sampling(3).unwrap()).unwrap();
        let again = obj.expected_infidelity(&pulse.params()).unwrap();
        assert!((again - run.report.expected_infidelity).abs() <= 1e-12);
        for f in ["config.json", "pulse.json", "trace.csv", "grid.csv", "report.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn bgrape_and_smgrape_share_the_start() {
        let mut sm = quick("rx_pi_d5_smgrape", 2);
        sm.steps = None;
        let mut b = quick("rx_pi_d5_bgrape", 2);
        b.steps = None;
        let mut first = Vec::new();
        let run_sm = run_seed(&sm, 9, &mut |_| ControlFlow::Continue(())).unwrap();
        let run_b = run_seed(&b, 9, &mut |p| {
            first.push(p.objective);
            ControlFlow::Continue(())
        })
        .unwrap();
        assert_eq!(run_sm.trace.theta.len(), run_b.trace.theta.len());
        assert_eq!(run_sm.trace.rows.len(), run_b.trace.rows.len());
        let theta0 = random_start(run_sm.trace.theta.len(), 9, 1.0);
        let sm_obj = build_with_pulse(&run_sm.config, run_sm.config.zero_pulse().unwrap(), run_sm.sampling.clone()).unwrap();
        assert!((sm_obj.expected_infidelity(&theta0).unwrap() - run_sm.trace.initial_objective).abs() < 1e-14);
        assert_eq!(run_b.config.sampler, SamplerSpec::MonteCarlo { samples: 61, seed: Some(9) });
        assert_eq!(first.len(), 2);
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = quick("phase_s", 4);
        let a = run_seed(&cfg, 3, &mut |_| ControlFlow::Continue(())).unwrap();
        let b = run_seed(&cfg, 3, &mut |_| ControlFlow::Continue(())).unwrap();
        assert_eq!(a.trace.theta, b.trace.theta);
        assert_eq!(a.report.reference_infidelity, b.report.reference_infidelity);
        assert_eq!(json_bytes(&a.pulse.to_file()).unwrap(), json_bytes(&b.pulse.to_file()).unwrap());
    }

    #[test]
    fn amplitude_bound_becomes_optimizer_box() {
        let mut cfg = quick("cnot_s010_k3", 5);
        cfg.pulse = PulseSpec::Piecewise {
            segments: 100,
            bound: Some(0.3),
        };
        let run = run_seed(&cfg, 2, &mut |_| ControlFlow::Continue(())).unwrap();
        assert_eq!(run.config.optimizer.bounds, Some(vec![(-0.3, 0.3)]));
        assert!(run.trace.theta.iter().all(|x| x.abs() <= 0.3));
        assert_eq!(run.pulse.params(), run.trace.theta);
    }
}

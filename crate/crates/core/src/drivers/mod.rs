// Copyright 2026 The robust-pulse Authors
// SPDX-License-Identifier: Apache-2.0

//! End-to-end experiment assembly: gate targets, Hamiltonian templates,
//! scenario configuration, optimization runs and post-hoc analysis.

mod analysis;
mod run;

pub use analysis::{
    battery, benchmark, landscape_scan, replay_table1, self_convergence, BatterySummary, BenchRow,
    BenchmarkOptions, BenchmarkResult, Landscape, LandscapeSummary, ReplayOptions, ReplayReport, CONTOUR_LEVELS,
};
pub use run::{
    run_bgrape, run_scenario, run_scenario_observed, run_seed, run_smgoat, run_smgrape, write_atomic,
    write_bundle, write_json, write_partial_trace, write_sweep, RunOutcome, RunReport, Sweep, SweepEntry,
};

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{Distribution, Metric, RobustObjective, UncertaintyMap};
use crate::optimize::{Method, OptimizerConfig};
use crate::pulses::{ControlSignal, FourierPulse, PiecewisePulse, Pulse};
use crate::qdyn::{pauli, two_qubit, CMatrix, ControlTerm, HamiltonianModel, Pauli, PropagationGrid, UnitaryMatrix};
use crate::sparsegrid::{dense_grid, monte_carlo_set, smolyak_grid, SamplingSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateName {
    Hadamard,
    Pi8,
    PhaseS,
    RxPi,
    Cnot,
}

impl GateName {
    pub fn dim(self) -> usize {
        match self {
            GateName::Cnot => 4,
            _ => 2,
        }
    }

    pub fn target(self) -> GateTarget {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let (o, z) = (c(1.0, 0.0), c(0.0, 0.0));
        let m = match self {
            GateName::Hadamard => {
                let h = c(FRAC_1_SQRT_2, 0.0);
                CMatrix::from_row_slice(2, 2, &[h, h, h, -h])
            }
            GateName::Pi8 => CMatrix::from_row_slice(2, 2, &[o, z, z, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]),
            GateName::PhaseS => CMatrix::from_row_slice(2, 2, &[o, z, z, c(0.0, 1.0)]),
            // exp(-i pi sigma_x / 2)
            GateName::RxPi => pauli(Pauli::X) * c(0.0, -1.0),
            // basis |00>, |01>, |10>, |11>
            GateName::Cnot => CMatrix::from_row_slice(
                4,
                4,
                &[o, z, z, z, z, o, z, z, z, z, z, o, z, z, o, z],
            ),
        };
        GateTarget {
            name: self,
            matrix: UnitaryMatrix::new(m).expect("gate matrices are unitary"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateTarget {
    pub name: GateName,
    pub matrix: UnitaryMatrix,
}

/// Hamiltonian templates with their uncertainty channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    /// `Delta/2 sz + (1 + dA)(ux/2 sx + uy/2 sy)`; uncertainties `[Delta, dA]`.
    SingleQubitDetuningAmp,
    /// `ux/2 sx + uy/2 sy + (Dx sx + Dy sy + Dz sz)/2`; uncertainties `[Dx, Dy, Dz]`.
    ThreeAxis,
    /// Three-axis plus gain errors on both controls; uncertainties
    /// `[dx, dy, Dx, Dy, Dz]`.
    FiveUncertainty,
    /// `sz1 sz2 + D1 sz1 + D2 sz2 + sum_j (uxj sxj + uyj syj)`; uncertainties `[D1, D2]`.
    CnotTwoDetuning,
}

impl Template {
    pub fn dim(self) -> usize {
        match self {
            Template::CnotTwoDetuning => 4,
            _ => 2,
        }
    }

    pub fn control_labels(self) -> &'static [&'static str] {
        match self {
            Template::CnotTwoDetuning => &["x1", "y1", "x2", "y2"],
            _ => &["x", "y"],
        }
    }

    pub fn uncertainty_labels(self) -> &'static [&'static str] {
        match self {
            Template::SingleQubitDetuningAmp => &["Delta", "delta_A"],
            Template::ThreeAxis => &["Delta_x", "Delta_y", "Delta_z"],
            Template::FiveUncertainty => &["delta_x", "delta_y", "Delta_x", "Delta_y", "Delta_z"],
            Template::CnotTwoDetuning => &["Delta_1", "Delta_2"],
        }
    }

    pub fn n_uncertainties(self) -> usize {
        self.uncertainty_labels().len()
    }

    pub fn model(self) -> HamiltonianModel {
        let half = |p: Pauli| pauli(p) * Complex64::new(0.5, 0.0);
        let zero = || CMatrix::zeros(2, 2);
        let control = |label: &str, operator: CMatrix, gains: Vec<usize>| ControlTerm {
            label: label.into(),
            operator,
            gains,
        };
        let (drift, controls, uncertainties) = match self {
            Template::SingleQubitDetuningAmp => (
                zero(),
                vec![control("x", half(Pauli::X), vec![1]), control("y", half(Pauli::Y), vec![1])],
                vec![half(Pauli::Z), zero()],
            ),
            Template::ThreeAxis => (
                zero(),
                vec![control("x", half(Pauli::X), vec![]), control("y", half(Pauli::Y), vec![])],
                vec![half(Pauli::X), half(Pauli::Y), half(Pauli::Z)],
            ),
            Template::FiveUncertainty => (
                zero(),
                vec![control("x", half(Pauli::X), vec![0]), control("y", half(Pauli::Y), vec![1])],
                vec![zero(), zero(), half(Pauli::X), half(Pauli::Y), half(Pauli::Z)],
            ),
            Template::CnotTwoDetuning => (
                two_qubit(Pauli::Z, Pauli::Z),
                vec![
                    control("x1", two_qubit(Pauli::X, Pauli::I), vec![]),
                    control("y1", two_qubit(Pauli::Y, Pauli::I), vec![]),
                    control("x2", two_qubit(Pauli::I, Pauli::X), vec![]),
                    control("y2", two_qubit(Pauli::I, Pauli::Y), vec![]),
                ],
                vec![two_qubit(Pauli::Z, Pauli::I), two_qubit(Pauli::I, Pauli::Z)],
            ),
        };
        HamiltonianModel::new(drift, controls, uncertainties).expect("templates are well formed")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Smooth Fourier pulses, Smolyak estimate, quasi-Newton.
    Smgoat,
    /// Piecewise-constant pulses, Smolyak estimate, Adam.
    Smgrape,
    /// Piecewise-constant pulses, fresh Monte Carlo batch per iteration, Adam.
    Bgrape,
}

impl Algorithm {
    pub fn method(self) -> Method {
        match self {
            Algorithm::Smgoat => Method::QuasiNewton,
            Algorithm::Smgrape | Algorithm::Bgrape => Method::AdaptiveMoment,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum PulseSpec {
    Fourier {
        #[serde(rename = "T_p")]
        period: f64,
        #[serde(rename = "N")]
        harmonics: usize,
    },
    Piecewise {
        segments: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bound: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplerSpec {
    Smolyak {
        level: usize,
    },
    MonteCarlo {
        samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// One order for every axis, or one per axis.
    Dense {
        orders: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatterySpec {
    pub draws: usize,
    pub seed: u64,
}

impl Default for BatterySpec {
    fn default() -> Self {
        Self { draws: 800, seed: 800 }
    }
}

fn default_seeds() -> Vec<u64> {
    (0..8).collect()
}

fn default_resolution() -> usize {
    41
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub gate: GateName,
    pub template: Template,
    pub uncertainties: Vec<Distribution>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub pulse: PulseSpec,
    pub sampler: SamplerSpec,
    pub metric: Metric,
    pub algorithm: Algorithm,
    /// Propagation steps; defaults to one per segment for piecewise pulses
    /// and 100 per unit time for smooth ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Points per axis of the dense reference grid; defaults to 9 for up to
    /// three uncertainties and 5 beyond.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_order: Option<usize>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub battery: BatterySpec,
    #[serde(default = "default_resolution")]
    pub landscape_resolution: usize,
}

/// Names accepted by [`ScenarioConfig::preset`].
pub const PRESETS: &[&str] = &[
    "hadamard",
    "pi8",
    "phase_s",
    "rx_pi_k3",
    "rx_pi_k4",
    "rx_pi_d5_smgrape",
    "rx_pi_d5_bgrape",
    "cnot_s010_k3",
    "cnot_s010_k4",
    "cnot_s015_k3",
    "cnot_s015_k4",
];

impl ScenarioConfig {
    /// Built-in scenario defaults.
    pub fn preset(name: &str) -> Result<Self> {
        let single = |gate: GateName| ScenarioConfig {
            name: name.to_string(),
            gate,
            template: Template::SingleQubitDetuningAmp,
            uncertainties: vec![Distribution::uniform_sym(0.1); 2],
            horizon: 10.0,
            pulse: PulseSpec::Fourier {
                period: 10.0,
                harmonics: 3,
            },
            sampler: SamplerSpec::Smolyak { level: 3 },
            metric: Metric::Phi2,
            algorithm: Algorithm::Smgoat,
            steps: None,
            reference_order: None,
            optimizer: OptimizerConfig {
                max_iterations: 2000,
                max_evaluations: Some(2000),
                ..OptimizerConfig::quasi_newton()
            },
            seeds: default_seeds(),
            battery: BatterySpec::default(),
            landscape_resolution: default_resolution(),
        };
        let rx = |level: usize| ScenarioConfig {
            gate: GateName::RxPi,
            template: Template::ThreeAxis,
            uncertainties: vec![Distribution::uniform_sym(0.05); 3],
            horizon: 50.0,
            pulse: PulseSpec::Fourier {
                period: 50.0,
                harmonics: 3,
            },
            sampler: SamplerSpec::Smolyak { level },
            metric: Metric::Phi1,
            ..single(GateName::RxPi)
        };
        let d5 = |algorithm: Algorithm, sampler: SamplerSpec| ScenarioConfig {
            gate: GateName::RxPi,
            template: Template::FiveUncertainty,
            uncertainties: vec![Distribution::uniform_sym(0.05); 5],
            horizon: 50.0,
            pulse: PulseSpec::Piecewise {
                segments: 100,
                bound: None,
            },
            sampler,
            metric: Metric::Phi3,
            algorithm,
            optimizer: OptimizerConfig {
                max_iterations: 5000,
                ..OptimizerConfig::adaptive_moment()
            },
            ..single(GateName::RxPi)
        };
        let cnot = |std: f64, level: usize| ScenarioConfig {
            gate: GateName::Cnot,
            template: Template::CnotTwoDetuning,
            uncertainties: vec![Distribution::normal(std); 2],
            horizon: 4.0,
            pulse: PulseSpec::Piecewise {
                segments: 100,
                bound: None,
            },
            sampler: SamplerSpec::Smolyak { level },
            metric: Metric::Phi3,
            algorithm: Algorithm::Smgrape,
            optimizer: OptimizerConfig {
                max_iterations: 3000,
                ..OptimizerConfig::adaptive_moment()
            },
            ..single(GateName::Cnot)
        };
        let cfg = match name {
            "hadamard" => single(GateName::Hadamard),
            "pi8" => single(GateName::Pi8),
            "phase_s" => single(GateName::PhaseS),
            "rx_pi_k3" => rx(3),
            "rx_pi_k4" => rx(4),
            "rx_pi_d5_smgrape" => d5(Algorithm::Smgrape, SamplerSpec::Smolyak { level: 3 }),
            "rx_pi_d5_bgrape" => d5(
                Algorithm::Bgrape,
                SamplerSpec::MonteCarlo {
                    samples: 61,
                    seed: None,
                },
            ),
            "cnot_s010_k3" => cnot(0.10, 3),
            "cnot_s010_k4" => cnot(0.10, 4),
            "cnot_s015_k3" => cnot(0.15, 3),
            "cnot_s015_k4" => cnot(0.15, 4),
            other => {
                return Err(Error::Config(format!(
                    "unknown preset '{other}' (known: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(cfg)
    }

    /// Parse and validate; errors name the offending field and position.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config(format!(
                "line {}, column {}, field '{}': {}",
                inner.line(),
                inner.column(),
                path,
                inner
            ))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |msg: String| Err(Error::Config(msg));
        let d = self.template.n_uncertainties();
        if self.uncertainties.len() != d {
            return cfg_err(format!(
                "template {:?} has {d} uncertainties, config lists {}",
                self.template,
                self.uncertainties.len()
            ));
        }
        for u in &self.uncertainties {
            u.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.gate.dim() != self.template.dim() {
            return cfg_err(format!(
                "gate {:?} acts on dimension {}, template on {}",
                self.gate,
                self.gate.dim(),
                self.template.dim()
            ));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return cfg_err(format!("T must be positive, got {}", self.horizon));
        }
        match (self.algorithm, self.pulse) {
            (Algorithm::Smgoat, PulseSpec::Fourier { period, harmonics }) => {
                if period < self.horizon || harmonics == 0 {
                    return cfg_err(format!("fourier pulse needs T_p >= T and N >= 1 (T_p={period}, N={harmonics})"));
                }
            }
            (Algorithm::Smgrape | Algorithm::Bgrape, PulseSpec::Piecewise { segments, bound }) => {
                if segments == 0 || bound.is_some_and(|b| !(b > 0.0)) {
                    return cfg_err("piecewise pulse needs segments >= 1 and a positive bound".into());
                }
            }
            (a, p) => return cfg_err(format!("algorithm {a:?} does not take a {p:?} pulse")),
        }
        match &self.sampler {
            SamplerSpec::Smolyak { level } if *level == 0 => return cfg_err("smolyak level must be >= 1".into()),
            SamplerSpec::MonteCarlo { samples, .. } if *samples == 0 => {
                return cfg_err("monte-carlo samples must be >= 1".into())
            }
            SamplerSpec::Dense { orders } if orders.len() != 1 && orders.len() != d => {
                return cfg_err(format!("dense orders need 1 or {d} entries"))
            }
            _ => {}
        }
        if matches!(self.algorithm, Algorithm::Bgrape) && !matches!(self.sampler, SamplerSpec::MonteCarlo { .. }) {
            return cfg_err("bgrape needs a monte-carlo sampler".into());
        }
        if self.steps == Some(0) || self.reference_order == Some(0) {
            return cfg_err("steps and reference_order must be >= 1".into());
        }
        if self.seeds.is_empty() {
            return cfg_err("seeds must not be empty".into());
        }
        self.optimizer.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn map(&self) -> Result<UncertaintyMap> {
        UncertaintyMap::new(self.uncertainties.clone())
    }

    /// Sampling set described by `sampler`; Monte Carlo without an explicit
    /// seed draws from `fallback_seed`.
    pub fn sampling(&self, fallback_seed: u64) -> Result<SamplingSet> {
        let d = self.template.n_uncertainties();
        let measures = self.map()?.measures();
        match &self.sampler {
            SamplerSpec::Smolyak { level } => Ok(smolyak_grid(d, *level, &measures)?.into_sampling_set()),
            SamplerSpec::MonteCarlo { samples, seed } => {
                monte_carlo_set(d, *samples, &measures, seed.unwrap_or(fallback_seed))
            }
            SamplerSpec::Dense { orders } => {
                let orders = if orders.len() == 1 { vec![orders[0]; d] } else { orders.clone() };
                dense_grid(&orders, &measures)
            }
        }
    }

    pub fn reference_order(&self) -> usize {
        self.reference_order
            .unwrap_or(if self.template.n_uncertainties() <= 3 { 9 } else { 5 })
    }

    /// Dense tensor grid used as the "exact" expectation.
    pub fn reference_sampling(&self) -> Result<SamplingSet> {
        let d = self.template.n_uncertainties();
        dense_grid(&vec![self.reference_order(); d], &self.map()?.measures())
    }

    pub fn propagation_grid(&self) -> Result<PropagationGrid> {
        match (self.steps, self.pulse) {
            (Some(m), _) => PropagationGrid::new(self.horizon, m),
            (None, PulseSpec::Piecewise { segments, .. }) => PropagationGrid::new(self.horizon, segments),
            (None, PulseSpec::Fourier { .. }) => PropagationGrid::default_for_horizon(self.horizon),
        }
    }

    /// Pulse of the configured family with all parameters zero.
    pub fn zero_pulse(&self) -> Result<Pulse> {
        let labels = self.template.control_labels();
        match self.pulse {
            PulseSpec::Fourier { period, harmonics } => {
                Ok(Pulse::Fourier(FourierPulse::zeros(period, harmonics, labels)?))
            }
            PulseSpec::Piecewise { segments, bound } => {
                let p = PiecewisePulse::zeros(self.horizon, segments, labels)?;
                Ok(Pulse::Piecewise(match bound {
                    Some(b) => p.with_bound(b)?,
                    None => p,
                }))
            }
        }
    }

    /// Checks that a loaded pulse fits this scenario.
    pub fn check_pulse(&self, pulse: &Pulse) -> Result<()> {
        let template = self.zero_pulse()?;
        let fixture = |msg: String| Err(Error::Fixture(msg));
        if pulse.family_name() != template.family_name() {
            return fixture(format!(
                "scenario '{}' expects a {} pulse, got {}",
                self.name,
                template.family_name(),
                pulse.family_name()
            ));
        }
        let (want, got) = (template.labels(), pulse.labels());
        if want != got {
            return fixture(format!("pulse channels {got:?} do not match template channels {want:?}"));
        }
        match (pulse, &template) {
            (Pulse::Fourier(p), Pulse::Fourier(t)) if p.period() != t.period() || p.harmonics() != t.harmonics() => {
                fixture(format!(
                    "pulse has T_p={} N={}, scenario expects T_p={} N={}",
                    p.period(),
                    p.harmonics(),
                    t.period(),
                    t.harmonics()
                ))
            }
            (Pulse::Piecewise(p), Pulse::Piecewise(t)) if p.segments() != t.segments() || p.horizon() != t.horizon() => {
                fixture(format!(
                    "pulse has {} segments over T={}, scenario expects {} over T={}",
                    p.segments(),
                    p.horizon(),
                    t.segments(),
                    t.horizon()
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Robust objective for `cfg` with a zero pulse and the configured sampler.
pub fn build_scenario(cfg: &ScenarioConfig) -> Result<RobustObjective> {
    build_with_pulse(cfg, cfg.zero_pulse()?, cfg.sampling(0)?)
}

/// Robust objective for `cfg` around a given pulse and sampling set.
pub fn build_with_pulse(cfg: &ScenarioConfig, pulse: Pulse, sampling: SamplingSet) -> Result<RobustObjective> {
    cfg.validate()?;
    cfg.check_pulse(&pulse)?;
    RobustObjective::new(
        cfg.metric,
        cfg.gate.target().matrix,
        sampling,
        cfg.template.model(),
        pulse,
        cfg.propagation_grid()?,
        cfg.map()?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::PulseFamily;
    use crate::qdyn::{expm_hermitian, frobenius_norm, propagate, Integrator};

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let cfg = ScenarioConfig::preset(name).unwrap();
            cfg.validate().unwrap();
            let back = ScenarioConfig::from_json_str(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
            let obj = build_scenario(&cfg).unwrap();
            assert_eq!(obj.sampling.dim(), cfg.template.n_uncertainties());
        }
        assert!(ScenarioConfig::preset("nope").is_err());
    }

    #[test]
    fn gate_targets_are_exact() {
        let s = GateName::PhaseS.target().matrix;
        assert_eq!(s.matrix()[(1, 1)], Complex64::new(0.0, 1.0));
        let t = GateName::Pi8.target().matrix;
        assert!((t.matrix()[(1, 1)] - Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2)).norm() < 1e-15);
        let cnot = GateName::Cnot.target().matrix;
        let m = cnot.matrix();
        assert_eq!(m[(2, 3)], Complex64::new(1.0, 0.0));
        assert_eq!(m[(3, 2)], Complex64::new(1.0, 0.0));
        assert_eq!(m[(2, 2)], Complex64::new(0.0, 0.0));
        assert_eq!(m[(1, 1)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn nominal_single_qubit_template_with_zero_pulse_is_identity() {
        let cfg = ScenarioConfig::preset("hadamard").unwrap();
        let obj = build_scenario(&cfg).unwrap();
        let u = obj.propagate_at(&obj.pulse, &[0.0, 0.0]).unwrap();
        assert!(frobenius_norm(&(u.matrix() - CMatrix::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn three_axis_static_z_detuning_is_closed_form() {
        let cfg = ScenarioConfig::preset("rx_pi_k3").unwrap();
        let obj = build_scenario(&cfg).unwrap();
        let u = obj.propagate_at(&obj.pulse, &[0.0, 0.0, 0.05]).unwrap();
        let expect = expm_hermitian(&(pauli(Pauli::Z) * Complex64::new(0.025, 0.0)), 50.0).unwrap();
        assert!(frobenius_norm(&(u.matrix() - expect.matrix())) < 1e-12);
        // z-rotation by 2.5 rad
        assert!((u.matrix()[(0, 0)] - Complex64::from_polar(1.0, -1.25)).norm() < 1e-12);
    }

    #[test]
    fn cnot_drift_spectrum() {
        let model = Template::CnotTwoDetuning.model();
        let diag: Vec<f64> = (0..4).map(|i| model.drift()[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
        assert!(frobenius_norm(&(model.drift() - model.drift().adjoint())) == 0.0);
    }

    #[test]
    fn five_uncertainty_gains_scale_controls() {
        let model = Template::FiveUncertainty.model();
        let mut p = PiecewisePulse::zeros(1.0, 1, &["x", "y"]).unwrap();
        p.set_params(&[0.7, 0.0]).unwrap();
        let grid = PropagationGrid::new(1.0, 1).unwrap();
        let u = propagate(&model, &p, &[0.1, 0.0, 0.0, 0.0, 0.0], &grid, Integrator::Midpoint).unwrap();
        let expect = expm_hermitian(&(pauli(Pauli::X) * Complex64::new(0.5 * 1.1 * 0.7, 0.0)), 1.0).unwrap();
        assert!(frobenius_norm(&(u.matrix() - expect.matrix())) < 1e-14);
        assert_eq!(p.channels(), 2);
    }

    #[test]
    fn config_errors_name_the_field() {
        let mut v: serde_json::Value = serde_json::from_str(&ScenarioConfig::preset("hadamard").unwrap().to_json()).unwrap();
        v["sampler"]["level"] = serde_json::json!("three");
        let err = ScenarioConfig::from_json_str(&serde_json::to_string_pretty(&v).unwrap()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("'sampler'") && msg.contains("expected usize") && msg.contains("line"), "{msg}");
        v["sampler"]["level"] = serde_json::json!(3);
        v["T"] = serde_json::json!("ten");
        let msg = ScenarioConfig::from_json_str(&v.to_string()).unwrap_err().to_string();
        assert!(msg.contains("field 'T'"), "{msg}");

        let mut cfg = ScenarioConfig::preset("hadamard").unwrap();
        cfg.uncertainties.pop();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));

        let mut cfg = ScenarioConfig::preset("hadamard").unwrap();
        cfg.algorithm = Algorithm::Smgrape;
        assert!(cfg.validate().is_err());

        assert!(ScenarioConfig::from_json_str(r#"{"name":"x","bogus":1}"#).is_err());
    }

    #[test]
    fn mismatched_fixture_is_a_fixture_error() {
        let cfg = ScenarioConfig::preset("hadamard").unwrap();
        let wrong = Pulse::Fourier(FourierPulse::zeros(10.0, 2, &["x", "y"]).unwrap());
        assert!(matches!(cfg.check_pulse(&wrong), Err(Error::Fixture(_))));
        let wrong = Pulse::Fourier(FourierPulse::zeros(10.0, 3, &["x"]).unwrap());
        assert!(matches!(cfg.check_pulse(&wrong), Err(Error::Fixture(_))));
        let wrong = Pulse::Piecewise(PiecewisePulse::zeros(10.0, 3, &["x", "y"]).unwrap());
        assert!(matches!(cfg.check_pulse(&wrong), Err(Error::Fixture(_))));
    }
}

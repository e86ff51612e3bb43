// Copyright 2026 The robust-pulse Authors
// SPDX-License-Identifier: Apache-2.0

//! Gate infidelity metrics and the robust (expected) infidelity objective.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pulses::{ControlSignal, Pulse, PulseFamily};
use crate::qdyn::{
    overlap_with_gradient, propagate, HamiltonianModel, Integrator, PropagationGrid, UnitaryMatrix,
};
use crate::quadrature::Measure;
use crate::sparsegrid::{variance_of, SamplingSet};

/// Below this `|Tr(U_F† U)|` the phase-optimized metric has no gradient.
pub const DEGENERATE_TRACE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// `||U_F - U||^2`
    Phi1,
    /// `min_phi ||U_F - e^{i phi} U||^2`
    Phi2,
    /// `1 - |Tr(U_F† U) / dim|^2`
    Phi3,
}

impl Metric {
    /// Metric value from `tau = Tr(U_F† U)`.
    pub fn from_trace(self, tau: Complex64, dim: usize) -> f64 {
        let n = dim as f64;
        let v = match self {
            Metric::Phi1 => 2.0 * n - 2.0 * tau.re,
            Metric::Phi2 => 2.0 * n - 2.0 * tau.norm(),
            Metric::Phi3 => 1.0 - tau.norm_sqr() / (n * n),
        };
        v.max(0.0)
    }

    /// `d metric` given `tau` and its derivative `dtau`.
    pub fn derivative(self, tau: Complex64, dtau: Complex64, dim: usize) -> Result<f64> {
        let n = dim as f64;
        match self {
            Metric::Phi1 => Ok(-2.0 * dtau.re),
            Metric::Phi2 => {
                let r = tau.norm();
                if r < DEGENERATE_TRACE {
                    return Err(Error::DegenerateGradient(format!(
                        "|Tr(U_F† U)| = {r:.3e} leaves the phase undefined"
                    )));
                }
                Ok(-2.0 * (tau.conj() * dtau).re / r)
            }
            Metric::Phi3 => Ok(-2.0 * (tau.conj() * dtau).re / (n * n)),
        }
    }

    pub fn eval(self, target: &UnitaryMatrix, u: &UnitaryMatrix) -> Result<f64> {
        if target.dim() != u.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                found: u.dim(),
            });
        }
        Ok(self.from_trace(target.overlap(u), u.dim()))
    }
}

pub fn phi1(target: &UnitaryMatrix, u: &UnitaryMatrix) -> Result<f64> {
    Metric::Phi1.eval(target, u)
}

pub fn phi2(target: &UnitaryMatrix, u: &UnitaryMatrix) -> Result<f64> {
    Metric::Phi2.eval(target, u)
}

pub fn phi3(target: &UnitaryMatrix, u: &UnitaryMatrix) -> Result<f64> {
    Metric::Phi3.eval(target, u)
}

/// Distribution of one physical uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Distribution {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, std: f64 },
}

impl Distribution {
    /// Symmetric uniform distribution on `[-h, h]`.
    pub fn uniform_sym(h: f64) -> Self {
        Distribution::Uniform { low: -h, high: h }
    }

    pub fn normal(std: f64) -> Self {
        Distribution::Normal { mean: 0.0, std }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Uniform { low, high } if !(low <= high) || !low.is_finite() || !high.is_finite() => {
                Err(invalid(format!("uniform distribution needs low <= high, got [{low}, {high}]")))
            }
            Distribution::Normal { mean, std } if !(std >= 0.0) || !mean.is_finite() || !std.is_finite() => {
                Err(invalid(format!("normal distribution needs std >= 0, got {std}")))
            }
            _ => Ok(()),
        }
    }

    /// Measure of the standardized variable the grid is built on.
    pub fn standard_measure(&self) -> Measure {
        match self {
            Distribution::Uniform { .. } => Measure::UNIT_UNIFORM,
            Distribution::Normal { .. } => Measure::StandardNormal,
        }
    }

    /// Affine map from the standardized variable to the physical value.
    pub fn physical(&self, eps: f64) -> f64 {
        match *self {
            Distribution::Uniform { low, high } => 0.5 * (low + high) + (high - low) * eps,
            Distribution::Normal { mean, std } => mean + std * eps,
        }
    }

    /// Inverse of [`Distribution::physical`]; `None` for zero width.
    pub fn standardized(&self, value: f64) -> Option<f64> {
        match *self {
            Distribution::Uniform { low, high } => {
                (high > low).then(|| (value - 0.5 * (low + high)) / (high - low))
            }
            Distribution::Normal { mean, std } => (std > 0.0).then(|| (value - mean) / std),
        }
    }
}

/// Per-dimension affine maps from standardized nodes to physical values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyMap {
    pub distributions: Vec<Distribution>,
}

impl UncertaintyMap {
    pub fn new(distributions: Vec<Distribution>) -> Result<Self> {
        for d in &distributions {
            d.validate()?;
        }
        Ok(Self { distributions })
    }

    pub fn dim(&self) -> usize {
        self.distributions.len()
    }

    pub fn measures(&self) -> Vec<Measure> {
        self.distributions.iter().map(|d| d.standard_measure()).collect()
    }

    pub fn physical(&self, eps: &[f64]) -> Vec<f64> {
        self.distributions
            .iter()
            .zip(eps)
            .map(|(d, &e)| d.physical(e))
            .collect()
    }
}

/// Expected infidelity of a parameterized pulse over a sampling set.
#[derive(Debug, Clone)]
pub struct RobustObjective {
    pub metric: Metric,
    pub target: UnitaryMatrix,
    pub sampling: SamplingSet,
    pub model: HamiltonianModel,
    pub pulse: Pulse,
    pub grid: PropagationGrid,
    pub integrator: Integrator,
    pub map: UncertaintyMap,
}

impl RobustObjective {
    pub fn new(
        metric: Metric,
        target: UnitaryMatrix,
        sampling: SamplingSet,
        model: HamiltonianModel,
        pulse: Pulse,
        grid: PropagationGrid,
        map: UncertaintyMap,
    ) -> Result<Self> {
        let d = model.n_uncertainties();
        if sampling.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: sampling.dim(),
            });
        }
        if map.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: map.dim(),
            });
        }
        if target.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                found: target.dim(),
            });
        }
        if pulse.channels() != model.n_controls() {
            return Err(Error::DimensionMismatch {
                expected: model.n_controls(),
                found: pulse.channels(),
            });
        }
        let integrator = Integrator::for_signal(&pulse, &grid);
        Ok(Self {
            metric,
            target,
            sampling,
            model,
            pulse,
            grid,
            integrator,
            map,
        })
    }

    /// Same objective on a different sampling set.
    pub fn with_sampling(&self, sampling: SamplingSet) -> Result<Self> {
        if sampling.dim() != self.sampling.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.sampling.dim(),
                found: sampling.dim(),
            });
        }
        Ok(Self {
            sampling,
            ..self.clone()
        })
    }

    pub fn with_grid(&self, grid: PropagationGrid) -> Self {
        let integrator = Integrator::for_signal(&self.pulse, &grid);
        Self {
            grid,
            integrator,
            ..self.clone()
        }
    }

    pub fn n_params(&self) -> usize {
        self.pulse.n_params()
    }

    pub fn pulse_at(&self, theta: &[f64]) -> Result<Pulse> {
        let mut p = self.pulse.clone();
        p.set_params(theta)?;
        Ok(p)
    }

    pub fn propagate_at(&self, pulse: &Pulse, delta: &[f64]) -> Result<UnitaryMatrix> {
        propagate(&self.model, pulse, delta, &self.grid, self.integrator)
    }

    /// Infidelity at one physical uncertainty vector.
    pub fn pointwise(&self, pulse: &Pulse, delta: &[f64]) -> Result<f64> {
        let u = self.propagate_at(pulse, delta)?;
        self.metric.eval(&self.target, &u)
    }

    /// Infidelity at every node of the sampling set, in node order.
    pub fn node_infidelities(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let pulse = self.pulse_at(theta)?;
        self.sampling
            .map_nodes(|eps| self.pointwise(&pulse, &self.map.physical(eps)))
            .into_iter()
            .collect()
    }

    pub fn expected_infidelity(&self, theta: &[f64]) -> Result<f64> {
        let vals = self.node_infidelities(theta)?;
        Ok(self.sampling.weighted_sum(&vals))
    }

    /// `E[Phi^2] - E[Phi]^2` on the sampling set.
    pub fn infidelity_variance(&self, theta: &[f64]) -> Result<f64> {
        let vals = self.node_infidelities(theta)?;
        Ok(variance_of(&self.sampling, &vals))
    }

    /// Expected infidelity and its gradient in one sweep over the nodes.
    pub fn value_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let pulse = self.pulse_at(theta)?;
        let dim = self.model.dim();
        let per_node: Vec<Result<(f64, Vec<f64>)>> = self.sampling.map_nodes(|eps| {
            let delta = self.map.physical(eps);
            let (_, tau, dtau) =
                overlap_with_gradient(&self.model, &pulse, &delta, &self.grid, self.integrator, &self.target)?;
            let value = self.metric.from_trace(tau, dim);
            let grad = dtau
                .iter()
                .map(|&d| self.metric.derivative(tau, d, dim))
                .collect::<Result<Vec<_>>>()?;
            Ok((value, grad))
        });
        let mut value = 0.0;
        let mut grad = vec![0.0; theta.len()];
        for (node, res) in self.sampling.points().iter().zip(per_node) {
            let (v, g) = res?;
            value += node.weight * v;
            for (acc, gi) in grad.iter_mut().zip(&g) {
                *acc += node.weight * gi;
            }
        }
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("objective or gradient".into()));
        }
        Ok((value, grad))
    }

    pub fn expected_infidelity_gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.value_and_gradient(theta).map(|(_, g)| g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qdyn::{pauli, CMatrix, Pauli};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn u(m: CMatrix) -> UnitaryMatrix {
        UnitaryMatrix::new(m).unwrap()
    }

    fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> UnitaryMatrix {
        let mut h = CMatrix::zeros(dim, dim);
        for r in 0..dim {
            for c in r..dim {
                let z = Complex64::new(rng.random_range(-2.0..2.0), if r == c { 0.0 } else { rng.random_range(-2.0..2.0) });
                h[(r, c)] = z;
                h[(c, r)] = z.conj();
            }
        }
        crate::qdyn::expm_hermitian(&h, 1.0).unwrap()
    }

    #[test]
    fn metric_examples() {
        let id = UnitaryMatrix::identity(2);
        let minus = u(-CMatrix::identity(2, 2));
        let x = u(pauli(Pauli::X));
        let z = u(pauli(Pauli::Z));
        assert_eq!(phi1(&x, &x).unwrap(), 0.0);
        assert!((phi1(&id, &minus).unwrap() - 8.0).abs() < 1e-15);
        assert!((phi1(&x, &z).unwrap() - 4.0).abs() < 1e-15);
        assert!(phi2(&id, &minus).unwrap().abs() < 1e-15);
        assert!((phi2(&x, &z).unwrap() - 4.0).abs() < 1e-15);
        assert!(phi2(&x, &x.scaled_phase(0.83)).unwrap().abs() < 1e-14);
        assert!(phi3(&x, &x.scaled_phase(-2.1)).unwrap().abs() < 1e-14);
        assert!((phi3(&x, &z).unwrap() - 1.0).abs() < 1e-15);
        assert!(phi1(&x, &UnitaryMatrix::identity(4)).is_err());
    }

    #[test]
    fn metric_identities_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for k in 0..1000 {
            let dim = if k % 2 == 0 { 2 } else { 4 };
            let a = random_unitary(&mut rng, dim);
            let b = random_unitary(&mut rng, dim);
            let (p1, p2, p3) = (phi1(&a, &b).unwrap(), phi2(&a, &b).unwrap(), phi3(&a, &b).unwrap());
            let n = dim as f64;
            assert!(p1 >= p2 - 1e-10);
            assert!((p2 - 2.0 * n * (1.0 - (1.0 - p3).sqrt())).abs() < 1e-10);
            assert!((0.0..=1.0).contains(&p3));
            assert!(p2 <= 2.0 * n + 1e-10 && p1 <= 4.0 * n + 1e-10);
            let phi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let b2 = b.scaled_phase(phi);
            assert!((phi2(&a, &b2).unwrap() - p2).abs() < 1e-10);
            assert!((phi3(&a, &b2).unwrap() - p3).abs() < 1e-10);
        }
    }

    #[test]
    fn phi2_gradient_degenerate() {
        let e = Metric::Phi2
            .derivative(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), 2)
            .unwrap_err();
        assert!(matches!(e, Error::DegenerateGradient(_)));
    }

    #[test]
    fn distribution_maps() {
        let d = Distribution::uniform_sym(0.1);
        assert_eq!(d.physical(0.5), 0.1);
        assert_eq!(d.physical(-0.5), -0.1);
        assert_eq!(d.standardized(0.05), Some(0.25));
        let n = Distribution::normal(0.15);
        assert!((n.physical(2.0) - 0.3).abs() < 1e-15);
        assert!(Distribution::Uniform { low: 1.0, high: 0.0 }.validate().is_err());
        assert!(Distribution::normal(-1.0).validate().is_err());
        assert_eq!(Distribution::uniform_sym(0.0).physical(0.3), 0.0);
    }
}

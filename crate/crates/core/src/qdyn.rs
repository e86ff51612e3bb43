// Copyright 2026 The robust-pulse Authors
// SPDX-License-Identifier: Apache-2.0

//! Unitary propagation of small closed quantum systems.
//!
//! The propagator over `[t0, t1]` is a product of step exponentials
//! `exp(-i H_m h)`, each computed from a Hermitian eigendecomposition. For
//! piecewise-constant controls aligned with the step grid the midpoint rule
//! is exact; for smooth controls a two-point fourth-order Magnus step is
//! used. Parameter derivatives come from the exact derivative of each step
//! exponential in its eigenbasis, chained through the pulse Jacobian.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::pulses::{ControlSignal, PulseFamily};

pub type CMatrix = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);
const HERMITIAN_TOL_MODEL: f64 = 1e-12;
const HERMITIAN_TOL_INPUT: f64 = 1e-9;
const UNITARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

pub fn pauli(p: Pauli) -> CMatrix {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let z = c(0.0, 0.0);
    match p {
        Pauli::I => CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), z, z, c(1.0, 0.0)]),
        Pauli::X => CMatrix::from_row_slice(2, 2, &[z, c(1.0, 0.0), c(1.0, 0.0), z]),
        Pauli::Y => CMatrix::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
        Pauli::Z => CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), z, z, c(-1.0, 0.0)]),
    }
}

/// `a ⊗ b`, with `a` acting on qubit 1 (most significant).
pub fn two_qubit(a: Pauli, b: Pauli) -> CMatrix {
    pauli(a).kronecker(&pauli(b))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Largest entry of `|m - m†|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// A square complex matrix that is unitary to within `1e-9`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(CMatrix);

impl UnitaryMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(invalid("unitary matrix must be square"));
        }
        let u = Self(m);
        let defect = u.unitarity_defect();
        if defect >= UNITARY_TOL {
            return Err(invalid(format!("matrix is not unitary (defect {defect:.3e})")));
        }
        Ok(u)
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// `||U†U - I||_F`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        frobenius_norm(&(self.0.adjoint() * &self.0 - CMatrix::identity(n, n)))
    }

    /// `Tr(self† other)`.
    pub fn overlap(&self, other: &UnitaryMatrix) -> Complex64 {
        self.0.dotc(&other.0)
    }

    pub fn scaled_phase(&self, phi: f64) -> Self {
        Self(&self.0 * Complex64::from_polar(1.0, phi))
    }

    pub fn compose(&self, later: &UnitaryMatrix) -> Self {
        Self(&later.0 * &self.0)
    }

    /// Entries as `[[re, im], ...]` rows, for JSON reports.
    pub fn to_rows(&self) -> Vec<Vec<[f64; 2]>> {
        (0..self.dim())
            .map(|r| (0..self.dim()).map(|c| [self.0[(r, c)].re, self.0[(r, c)].im]).collect())
            .collect()
    }
}

/// `exp(-i H h)` for Hermitian `H` held in its eigenbasis.
#[derive(Debug, Clone)]
pub struct StepExponential {
    vectors: CMatrix,
    values: Vec<f64>,
    h: f64,
}

impl StepExponential {
    pub fn new(hermitian: &CMatrix, h: f64) -> Self {
        if hermitian.nrows() == 2 {
            let (vectors, values) = eigh_2x2(hermitian);
            return Self { vectors, values, h };
        }
        let eig = SymmetricEigen::new(hermitian.clone());
        Self {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues.iter().copied().collect(),
            h,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn matrix(&self) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (c, &l) in self.values.iter().enumerate() {
            let ph = Complex64::from_polar(1.0, -l * self.h);
            for r in 0..n {
                scaled[(r, c)] *= ph;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// Divided difference of `x -> exp(-i x h)` at eigenvalues `a`, `b`.
    fn gamma(&self, a: usize, b: usize) -> Complex64 {
        let (la, lb) = (self.values[a], self.values[b]);
        let x = 0.5 * self.h * (la - lb);
        let sinc = if x.abs() < 1e-4 {
            1.0 - x * x / 6.0 + x.powi(4) / 120.0
        } else {
            x.sin() / x
        };
        -I * self.h * Complex64::from_polar(1.0, -0.5 * self.h * (la + lb)) * sinc
    }

    pub fn to_eigenbasis(&self, m: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * m * &self.vectors
    }

    /// Directional derivative `d/ds exp(-i (H + s E) h)` at `s = 0`.
    pub fn derivative(&self, direction: &CMatrix) -> CMatrix {
        let mut e = self.to_eigenbasis(direction);
        self.apply_gamma(&mut e);
        &self.vectors * e * self.vectors.adjoint()
    }

    fn apply_gamma(&self, e: &mut CMatrix) {
        let n = self.values.len();
        for a in 0..n {
            for b in 0..n {
                e[(a, b)] *= self.gamma(a, b);
            }
        }
    }
}

/// Closed-form eigensystem of a 2x2 Hermitian matrix written as
/// `m I + rho (cos t sigma_z + sin t (cos p sigma_x - sin p sigma_y))`.
fn eigh_2x2(h: &CMatrix) -> (CMatrix, Vec<f64>) {
    let (p, r) = (h[(0, 0)].re, h[(1, 1)].re);
    let q = 0.5 * (h[(0, 1)] + h[(1, 0)].conj());
    let (m, d) = (0.5 * (p + r), 0.5 * (p - r));
    let rho = d.hypot(q.norm());
    let theta = q.norm().atan2(d);
    let (s, c) = (0.5 * theta).sin_cos();
    let phase = if q.norm() > 0.0 { q / q.norm() } else { Complex64::new(1.0, 0.0) };
    let vectors = CMatrix::from_row_slice(
        2,
        2,
        &[Complex64::new(c, 0.0), -phase * s, phase.conj() * s, Complex64::new(c, 0.0)],
    );
    (vectors, vec![m + rho, m - rho])
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> Result<UnitaryMatrix> {
    if !h.is_square() {
        return Err(invalid("Hamiltonian must be square"));
    }
    let defect = hermiticity_defect(h);
    if defect > HERMITIAN_TOL_INPUT {
        return Err(invalid(format!("matrix is not Hermitian (defect {defect:.3e})")));
    }
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(UnitaryMatrix(StepExponential::new(&sym, t).matrix()))
}

/// Control term `(1 + sum_{l in gains} delta_l) u_j(t) H_cj`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTerm {
    pub label: String,
    pub operator: CMatrix,
    /// Uncertainty indices acting as multiplicative gain errors on this control.
    pub gains: Vec<usize>,
}

/// `H = H0 + sum_j (1 + gain_j(delta)) u_j(t) H_cj + sum_l delta_l V_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianModel {
    dim: usize,
    drift: CMatrix,
    controls: Vec<ControlTerm>,
    /// Additive uncertainty operators `V_l`; zero for pure gain uncertainties.
    uncertainties: Vec<CMatrix>,
}

impl HamiltonianModel {
    pub fn new(drift: CMatrix, controls: Vec<ControlTerm>, uncertainties: Vec<CMatrix>) -> Result<Self> {
        let dim = drift.nrows();
        let all = std::iter::once(&drift)
            .chain(controls.iter().map(|c| &c.operator))
            .chain(uncertainties.iter());
        for m in all {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.nrows(),
                });
            }
            let defect = hermiticity_defect(m);
            if defect > HERMITIAN_TOL_MODEL {
                return Err(invalid(format!("model operator not Hermitian (defect {defect:.3e})")));
            }
        }
        if let Some(c) = controls
            .iter()
            .find(|c| c.gains.iter().any(|&l| l >= uncertainties.len()))
        {
            return Err(invalid(format!(
                "control '{}' references an unknown uncertainty index",
                c.label
            )));
        }
        Ok(Self {
            dim,
            drift,
            controls,
            uncertainties,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn drift(&self) -> &CMatrix {
        &self.drift
    }

    pub fn controls(&self) -> &[ControlTerm] {
        &self.controls
    }

    pub fn uncertainty_operators(&self) -> &[CMatrix] {
        &self.uncertainties
    }

    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn n_uncertainties(&self) -> usize {
        self.uncertainties.len()
    }

    fn check_delta(&self, delta: &[f64]) -> Result<()> {
        if delta.len() != self.uncertainties.len() {
            return Err(Error::DimensionMismatch {
                expected: self.uncertainties.len(),
                found: delta.len(),
            });
        }
        Ok(())
    }

    fn static_part(&self, delta: &[f64]) -> CMatrix {
        let mut h = self.drift.clone();
        for (v, &d) in self.uncertainties.iter().zip(delta) {
            if d != 0.0 {
                h += v * Complex64::new(d, 0.0);
            }
        }
        h
    }

    fn effective_controls(&self, delta: &[f64]) -> Vec<CMatrix> {
        self.controls
            .iter()
            .map(|c| {
                let gain = 1.0 + c.gains.iter().map(|&l| delta[l]).sum::<f64>();
                &c.operator * Complex64::new(gain, 0.0)
            })
            .collect()
    }

    /// Total Hamiltonian for control values `u` and uncertainty values `delta`.
    pub fn total(&self, u: &[f64], delta: &[f64]) -> Result<CMatrix> {
        self.check_delta(delta)?;
        if u.len() != self.controls.len() {
            return Err(Error::DimensionMismatch {
                expected: self.controls.len(),
                found: u.len(),
            });
        }
        let mut h = self.static_part(delta);
        for (c, &x) in self.effective_controls(delta).iter().zip(u) {
            h += c * Complex64::new(x, 0.0);
        }
        Ok(h)
    }
}

/// Uniform time steps over `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationGrid {
    start: f64,
    end: f64,
    steps: usize,
}

impl PropagationGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        Self::span(0.0, horizon, steps)
    }

    pub fn span(start: f64, end: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(invalid("propagation grid needs at least one step"));
        }
        if !(end > start) || !start.is_finite() || !end.is_finite() {
            return Err(invalid(format!("invalid time span [{start}, {end}]")));
        }
        Ok(Self { start, end, steps })
    }

    /// Default resolution for smooth pulses: 100 steps per unit time.
    pub fn default_for_horizon(horizon: f64) -> Result<Self> {
        Self::new(horizon, ((100.0 * horizon).round() as usize).max(1))
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        (self.end - self.start) / self.steps as f64
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self {
            steps: self.steps * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// One exponential per step, Hamiltonian sampled at the step midpoint.
    Midpoint,
    /// Fourth-order Magnus step from two Gauss-Legendre samples.
    Magnus4,
}

impl Integrator {
    /// Midpoint when the signal is constant on every step, else Magnus4.
    pub fn for_signal(signal: &dyn ControlSignal, grid: &PropagationGrid) -> Self {
        match signal.constant_segments() {
            Some(segs) => {
                let seg_len = signal.horizon() / segs as f64;
                let aligned = |t: f64| {
                    let r = t / seg_len;
                    (r - r.round()).abs() < 1e-9
                };
                if grid.steps % segs == 0
                    && aligned(grid.start)
                    && aligned(grid.end)
                    && ((grid.end - grid.start) / seg_len).round() as usize * (grid.steps / segs)
                        == grid.steps
                {
                    Integrator::Midpoint
                } else {
                    Integrator::Magnus4
                }
            }
            None => Integrator::Magnus4,
        }
    }

    fn sample_offsets(&self) -> &'static [f64] {
        const SQ3_6: f64 = 0.288_675_134_594_812_9;
        match self {
            Integrator::Midpoint => &[0.5],
            Integrator::Magnus4 => &[0.5 - SQ3_6, 0.5 + SQ3_6],
        }
    }
}

/// One propagation step with what the gradient passes need.
struct Step {
    exp: StepExponential,
    /// Per sample: time and `d H_eff / d u_j` for each channel j.
    samples: Vec<(f64, Vec<CMatrix>)>,
}

struct Stepper<'a> {
    signal: &'a dyn ControlSignal,
    static_h: CMatrix,
    controls: Vec<CMatrix>,
    grid: PropagationGrid,
    integrator: Integrator,
}

impl<'a> Stepper<'a> {
    fn new(
        model: &HamiltonianModel,
        signal: &'a dyn ControlSignal,
        delta: &[f64],
        grid: &PropagationGrid,
        integrator: Integrator,
    ) -> Result<Self> {
        model.check_delta(delta)?;
        if signal.channels() != model.n_controls() {
            return Err(Error::DimensionMismatch {
                expected: model.n_controls(),
                found: signal.channels(),
            });
        }
        if grid.start < -1e-12 || grid.end > signal.horizon() * (1.0 + 1e-12) + 1e-12 {
            return Err(invalid(format!(
                "propagation span [{}, {}] exceeds pulse horizon {}",
                grid.start,
                grid.end,
                signal.horizon()
            )));
        }
        Ok(Self {
            signal,
            static_h: model.static_part(delta),
            controls: model.effective_controls(delta),
            grid: *grid,
            integrator,
        })
    }

    fn hamiltonian(&self, t: f64) -> CMatrix {
        let mut h = self.static_h.clone();
        for (j, c) in self.controls.iter().enumerate() {
            let u = self.signal.amplitude(j, t);
            if u != 0.0 {
                h += c * Complex64::new(u, 0.0);
            }
        }
        h
    }

    fn times(&self, m: usize) -> Vec<f64> {
        let h = self.grid.dt();
        let t0 = self.grid.start + m as f64 * h;
        self.integrator
            .sample_offsets()
            .iter()
            .map(|o| (t0 + o * h).min(self.grid.end))
            .collect()
    }

    /// Hermitian effective Hamiltonian of step `m` and its samples.
    fn effective(&self, m: usize) -> (CMatrix, Vec<f64>, Vec<CMatrix>) {
        let times = self.times(m);
        let hs: Vec<CMatrix> = times.iter().map(|&t| self.hamiltonian(t)).collect();
        let heff = match self.integrator {
            Integrator::Midpoint => hs[0].clone(),
            Integrator::Magnus4 => {
                let kappa = magnus_kappa(self.grid.dt());
                (&hs[0] + &hs[1]) * Complex64::new(0.5, 0.0) - commutator(&hs[1], &hs[0]) * (I * kappa)
            }
        };
        (heff, times, hs)
    }

    fn step(&self, m: usize) -> StepExponential {
        let (heff, _, _) = self.effective(m);
        StepExponential::new(&heff, self.grid.dt())
    }

    fn step_with_directions(&self, m: usize) -> Step {
        let (heff, times, hs) = self.effective(m);
        let exp = StepExponential::new(&heff, self.grid.dt());
        let half = Complex64::new(0.5, 0.0);
        let samples = match self.integrator {
            Integrator::Midpoint => vec![(times[0], self.controls.clone())],
            Integrator::Magnus4 => {
                let ik = I * magnus_kappa(self.grid.dt());
                let d1 = self
                    .controls
                    .iter()
                    .map(|c| c * half - commutator(&hs[1], c) * ik)
                    .collect();
                let d2 = self
                    .controls
                    .iter()
                    .map(|c| c * half - commutator(c, &hs[0]) * ik)
                    .collect();
                vec![(times[0], d1), (times[1], d2)]
            }
        };
        Step { exp, samples }
    }
}

fn magnus_kappa(h: f64) -> f64 {
    3f64.sqrt() / 12.0 * h
}

/// `U(end)` with `U(start) = I`.
pub fn propagate(
    model: &HamiltonianModel,
    pulses: &dyn ControlSignal,
    delta: &[f64],
    grid: &PropagationGrid,
    integrator: Integrator,
) -> Result<UnitaryMatrix> {
    let stepper = Stepper::new(model, pulses, delta, grid, integrator)?;
    let mut u = CMatrix::identity(model.dim, model.dim);
    for m in 0..grid.steps {
        u = stepper.step(m).matrix() * u;
    }
    Ok(UnitaryMatrix(u))
}

/// Forward sweep storing every step and the prefix products `P_m`.
fn forward(stepper: &Stepper<'_>, dim: usize) -> (Vec<Step>, Vec<CMatrix>, Vec<CMatrix>) {
    let n = stepper.grid.steps;
    let mut steps = Vec::with_capacity(n);
    let mut mats = Vec::with_capacity(n);
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(CMatrix::identity(dim, dim));
    for m in 0..n {
        let step = stepper.step_with_directions(m);
        let s = step.exp.matrix();
        let next = &s * &prefix[m];
        prefix.push(next);
        mats.push(s);
        steps.push(step);
    }
    (steps, mats, prefix)
}

/// `U(end)` and `dU(end)/d theta_k` for every pulse parameter.
pub fn propagate_with_gradient(
    model: &HamiltonianModel,
    pulses: &dyn PulseFamily,
    delta: &[f64],
    grid: &PropagationGrid,
    integrator: Integrator,
) -> Result<(UnitaryMatrix, Vec<CMatrix>)> {
    let signal: &dyn ControlSignal = pulses_as_signal(pulses);
    let stepper = Stepper::new(model, signal, delta, grid, integrator)?;
    let dim = model.dim;
    let (steps, mats, mut prefix) = forward(&stepper, dim);
    let mut grads = vec![CMatrix::zeros(dim, dim); pulses.n_params()];
    let mut suffix = CMatrix::identity(dim, dim);
    let mut jac = Vec::new();
    for m in (0..steps.len()).rev() {
        for (t, dirs) in &steps[m].samples {
            for (j, dir) in dirs.iter().enumerate() {
                jac.clear();
                pulses.jacobian_into(j, *t, &mut jac);
                if jac.iter().all(|&(_, v)| v == 0.0) {
                    continue;
                }
                let g = &suffix * steps[m].exp.derivative(dir) * &prefix[m];
                for &(k, v) in &jac {
                    if v != 0.0 {
                        grads[k] += &g * Complex64::new(v, 0.0);
                    }
                }
            }
        }
        suffix *= &mats[m];
    }
    Ok((UnitaryMatrix(prefix.pop().unwrap()), grads))
}

/// `U(end)`, `tau = Tr(target† U)` and `d tau / d theta_k`.
///
/// Cheaper than [`propagate_with_gradient`] when only the trace overlap is
/// needed.
pub fn overlap_with_gradient(
    model: &HamiltonianModel,
    pulses: &dyn PulseFamily,
    delta: &[f64],
    grid: &PropagationGrid,
    integrator: Integrator,
    target: &UnitaryMatrix,
) -> Result<(UnitaryMatrix, Complex64, Vec<Complex64>)> {
    if target.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            found: target.dim(),
        });
    }
    let signal: &dyn ControlSignal = pulses_as_signal(pulses);
    let stepper = Stepper::new(model, signal, delta, grid, integrator)?;
    let dim = model.dim;
    let n = grid.steps;
    // Forward sweep: step exponentials, their samples and prefix products.
    let mut steps = Vec::with_capacity(n);
    let mut mats = Vec::with_capacity(n);
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(CMatrix::identity(dim, dim));
    for m in 0..n {
        let (heff, times, hs) = stepper.effective(m);
        let exp = StepExponential::new(&heff, grid.dt());
        let s = exp.matrix();
        prefix.push(&s * &prefix[m]);
        mats.push(s);
        steps.push((exp, times, hs));
    }
    // Backward sweep. With W = P_m F† Q_m, each step contributes
    // Tr(W dS) = Tr(Y dH_eff), Y = V X^T V†, X_ab = (V† W V)_ba Gamma_ab;
    // Magnus directions are folded into Y so each channel costs one
    // elementwise product with its control operator.
    let kappa = I * magnus_kappa(grid.dt());
    let half = Complex64::new(0.5, 0.0);
    let mut dtau = vec![Complex64::new(0.0, 0.0); pulses.n_params()];
    let mut fq = target.matrix().adjoint();
    let mut jac = Vec::new();
    for m in (0..n).rev() {
        let (exp, times, hs) = &steps[m];
        let w_eig = exp.to_eigenbasis(&(&prefix[m] * &fq));
        let mut xt = CMatrix::zeros(dim, dim);
        for a in 0..dim {
            for b in 0..dim {
                xt[(b, a)] = w_eig[(b, a)] * exp.gamma(a, b);
            }
        }
        let y = &exp.vectors * xt * exp.vectors.adjoint();
        let zs: Vec<CMatrix> = match integrator {
            Integrator::Midpoint => vec![y.transpose()],
            Integrator::Magnus4 => vec![
                (&y * half - commutator(&y, &hs[1]) * kappa).transpose(),
                (&y * half - commutator(&hs[0], &y) * kappa).transpose(),
            ],
        };
        for (t, z) in times.iter().zip(&zs) {
            for (j, c) in stepper.controls.iter().enumerate() {
                jac.clear();
                pulses.jacobian_into(j, *t, &mut jac);
                if jac.iter().all(|&(_, v)| v == 0.0) {
                    continue;
                }
                let d: Complex64 = z.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
                for &(k, v) in &jac {
                    dtau[k] += d * v;
                }
            }
        }
        fq *= &mats[m];
    }
    let u = UnitaryMatrix(prefix.pop().unwrap());
    let tau = target.overlap(&u);
    Ok((u, tau, dtau))
}

fn pulses_as_signal(p: &dyn PulseFamily) -> &dyn ControlSignal {
    p
}

// Copyright 2026 The robust-pulse Authors
// SPDX-License-Identifier: Apache-2.0

//! One-dimensional Gaussian quadrature rules normalized to probability
//! measures.
//!
//! Every rule returned here has weights summing to one, so applying it to a
//! function gives an expectation rather than a raw integral. Nodes are found
//! by Newton iteration on the three-term recurrence of the orthogonal
//! polynomial family, starting from the eigenvalues of the Jacobi matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Probability measure a rule integrates against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Measure {
    /// Uniform density `1/(b-a)` on `[a, b]`.
    Uniform { a: f64, b: f64 },
    /// Standard normal density.
    StandardNormal,
}

impl Measure {
    /// Uniform measure on the unit-width interval centred at zero.
    pub const UNIT_UNIFORM: Measure = Measure::Uniform { a: -0.5, b: 0.5 };

    pub fn center(&self) -> f64 {
        match *self {
            Measure::Uniform { a, b } => 0.5 * (a + b),
            Measure::StandardNormal => 0.0,
        }
    }

    /// The `n`-point Gauss rule for this measure.
    pub fn rule(&self, n: usize) -> Result<Rule1D> {
        match *self {
            Measure::Uniform { a, b } => gauss_legendre(n, (a, b)),
            Measure::StandardNormal => gauss_hermite_prob(n),
        }
    }

    /// Exact `E[x^k]` under this measure.
    pub fn raw_moment(&self, k: u32) -> f64 {
        match *self {
            Measure::Uniform { a, b } => {
                let k1 = k as f64 + 1.0;
                (b.powf(k1) - a.powf(k1)) / (k1 * (b - a))
            }
            Measure::StandardNormal => {
                if k % 2 == 1 {
                    0.0
                } else {
                    // (k-1)!!
                    (1..k).step_by(2).map(|j| j as f64).product()
                }
            }
        }
    }
}

/// Nodes and probability weights of a Gaussian rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule1D {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    measure: Measure,
}

impl Rule1D {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `sum_j w_j f(x_j)`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        integrate_1d(self, f)
    }
}

/// Weighted sum with Neumaier compensation, so that cancelling terms of
/// large magnitude (odd moments at the outer Hermite nodes) leave no residue.
pub fn integrate_1d<F: Fn(f64) -> f64>(rule: &Rule1D, f: F) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let term = w * f(x);
        let t = sum + term;
        comp += if sum.abs() >= term.abs() {
            (sum - t) + term
        } else {
            (term - t) + sum
        };
        sum = t;
    }
    sum + comp
}

/// Legendre polynomial `P_n(x)` and its derivative.
pub fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    let nf = n as f64;
    // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1), valid off the endpoints.
    let dp = nf * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Probabilists' Hermite polynomial `He_n(x)` together with `He_{n-1}(x)`.
pub fn hermite_prob_eval(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut h_prev, mut h) = (1.0, x);
    for k in 1..n {
        let next = x * h - k as f64 * h_prev;
        h_prev = h;
        h = next;
    }
    (h, h_prev)
}

/// Eigenvalues of the symmetric tridiagonal Jacobi matrix with zero diagonal
/// and the given off-diagonal, sorted ascending.
fn jacobi_eigenvalues(off_diag: impl Fn(usize) -> f64, n: usize) -> Vec<f64> {
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = off_diag(k);
        m[(k - 1, k)] = b;
        m[(k, k - 1)] = b;
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

fn newton_polish(mut x: f64, step: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..NEWTON_MAX_ITER {
        let dx = step(x);
        x -= dx;
        if dx.abs() <= NEWTON_TOL * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Force exact antisymmetry of nodes about zero and symmetry of weights.
fn symmetrize(nodes: &mut [f64], weights: &mut [f64]) {
    let n = nodes.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
}

fn normalize(weights: &mut [f64]) {
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
}

/// `n`-point Gauss-Legendre rule on `[a, b]`, weights summing to one.
pub fn gauss_legendre(n: usize, interval: (f64, f64)) -> Result<Rule1D> {
    let (a, b) = interval;
    if n == 0 {
        return Err(invalid("quadrature order must be at least 1"));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(invalid(format!("invalid interval [{a}, {b}]")));
    }
    let guesses = jacobi_eigenvalues(
        |k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        },
        n,
    );
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for g in guesses {
        let x = newton_polish(g, |x| {
            let (p, dp) = legendre_eval(n, x);
            p / dp
        });
        let (_, dp) = legendre_eval(n, x);
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    symmetrize(&mut nodes, &mut weights);
    normalize(&mut weights);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let nodes = nodes.into_iter().map(|x| mid + half * x).collect();
    Ok(Rule1D {
        nodes,
        weights,
        measure: Measure::Uniform { a, b },
    })
}

/// `n`-point Gauss rule for the standard normal density (probabilists'
/// Hermite polynomials).
pub fn gauss_hermite_prob(n: usize) -> Result<Rule1D> {
    if n == 0 {
        return Err(invalid("quadrature order must be at least 1"));
    }
    let guesses = jacobi_eigenvalues(|k| (k as f64).sqrt(), n);
    let nf = n as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for g in guesses {
        let x = newton_polish(g, |x| {
            let (h, h_prev) = hermite_prob_eval(n, x);
            h / (nf * h_prev)
        });
        let (_, h_prev) = hermite_prob_eval(n, x);
        nodes.push(x);
        // n! / (n He_{n-1})^2, the n! folded in by the final normalization.
        weights.push(1.0 / (nf * h_prev * h_prev));
    }
    symmetrize(&mut nodes, &mut weights);
    normalize(&mut weights);
    Ok(Rule1D {
        nodes,
        weights,
        measure: Measure::StandardNormal,
    })
}

// Copyright 2026 The robust-pulse Authors
// SPDX-License-Identifier: Apache-2.0

//! Control pulse parameterizations.
//!
//! Two families are provided: a Fourier series under a `sin^2` envelope, and
//! piecewise-constant amplitudes. Both are linear in their parameters, so the
//! parameter Jacobian at a time `t` does not depend on the current
//! coefficients.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Time-dependent control amplitudes, one per channel.
pub trait ControlSignal: Sync {
    fn channels(&self) -> usize;
    fn horizon(&self) -> f64;
    fn amplitude(&self, channel: usize, t: f64) -> f64;

    /// Number of equal-length constant segments, if the signal is piecewise
    /// constant on a uniform partition of `[0, horizon]`.
    fn constant_segments(&self) -> Option<usize> {
        None
    }
}

/// A control signal with a flat parameter vector.
pub trait PulseFamily: ControlSignal {
    fn n_params(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, theta: &[f64]) -> Result<()>;

    /// Appends `(k, d u_channel(t) / d theta_k)` for every nonzero entry.
    fn jacobian_into(&self, channel: usize, t: f64, out: &mut Vec<(usize, f64)>);
}

/// Fourier coefficients of one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierChannel {
    pub label: String,
    /// `a_0 .. a_N`
    pub a: Vec<f64>,
    /// `b_1 .. b_N`
    pub b: Vec<f64>,
}

/// `u_j(t) = G(t) (a_0 + sum_n a_n cos(2 n pi t / T_p) + b_n sin(2 n pi t / T_p))`
/// with `G(t) = sin^2(pi t / T_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierPulse {
    period: f64,
    harmonics: usize,
    channels: Vec<FourierChannel>,
}

impl FourierPulse {
    pub fn new(period: f64, harmonics: usize, channels: Vec<FourierChannel>) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(invalid(format!("Fourier period must be positive, got {period}")));
        }
        if harmonics == 0 {
            return Err(invalid("Fourier pulse needs at least one harmonic"));
        }
        if channels.is_empty() {
            return Err(invalid("pulse needs at least one channel"));
        }
        for c in &channels {
            if c.a.len() != harmonics + 1 || c.b.len() != harmonics {
                return Err(Error::Fixture(format!(
                    "channel '{}': expected {} a-coefficients and {} b-coefficients, got {} and {}",
                    c.label,
                    harmonics + 1,
                    harmonics,
                    c.a.len(),
                    c.b.len()
                )));
            }
            if c.a.iter().chain(&c.b).any(|x| !x.is_finite()) {
                return Err(invalid(format!("channel '{}' has non-finite coefficients", c.label)));
            }
        }
        Ok(Self {
            period,
            harmonics,
            channels,
        })
    }

    /// All-zero coefficients on the given channel labels.
    pub fn zeros(period: f64, harmonics: usize, labels: &[&str]) -> Result<Self> {
        let channels = labels
            .iter()
            .map(|l| FourierChannel {
                label: l.to_string(),
                a: vec![0.0; harmonics + 1],
                b: vec![0.0; harmonics],
            })
            .collect();
        Self::new(period, harmonics, channels)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn harmonics(&self) -> usize {
        self.harmonics
    }

    pub fn channel_data(&self) -> &[FourierChannel] {
        &self.channels
    }

    fn per_channel(&self) -> usize {
        2 * self.harmonics + 1
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.period).contains(&t) {
            return Err(invalid(format!("t={t} outside [0, {}]", self.period)));
        }
        Ok(())
    }

    pub fn envelope(&self, t: f64) -> f64 {
        (PI * t / self.period).sin().powi(2)
    }

    /// Basis values `[G, G cos(w t), .., G cos(N w t), G sin(w t), .., G sin(N w t)]`.
    fn basis(&self, t: f64) -> Vec<f64> {
        let g = self.envelope(t);
        let n = self.harmonics;
        let mut out = vec![0.0; 2 * n + 1];
        out[0] = g;
        let w = 2.0 * PI * t / self.period;
        for k in 1..=n {
            let (s, c) = (k as f64 * w).sin_cos();
            out[k] = g * c;
            out[n + k] = g * s;
        }
        out
    }

    /// Checked evaluation of channel `j` at `t`.
    pub fn eval(&self, j: usize, t: f64) -> Result<f64> {
        self.check_time(t)?;
        self.check_channel(j)?;
        Ok(self.amplitude(j, t))
    }

    /// Checked Jacobian of channel `j` at `t` w.r.t. that channel's
    /// `[a_0..a_N, b_1..b_N]`.
    pub fn jacobian(&self, j: usize, t: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        self.check_channel(j)?;
        Ok(self.basis(t))
    }

    fn check_channel(&self, j: usize) -> Result<()> {
        if j >= self.channels.len() {
            return Err(invalid(format!("channel {j} out of range")));
        }
        Ok(())
    }
}

impl ControlSignal for FourierPulse {
    fn channels(&self) -> usize {
        self.channels.len()
    }

    fn horizon(&self) -> f64 {
        self.period
    }

    fn amplitude(&self, j: usize, t: f64) -> f64 {
        let c = &self.channels[j];
        let n = self.harmonics;
        let w = 2.0 * PI * t / self.period;
        let mut s = c.a[0];
        for k in 1..=n {
            let (sn, cs) = (k as f64 * w).sin_cos();
            s += c.a[k] * cs + c.b[k - 1] * sn;
        }
        self.envelope(t) * s
    }
}

impl PulseFamily for FourierPulse {
    fn n_params(&self) -> usize {
        self.channels.len() * self.per_channel()
    }

    fn params(&self) -> Vec<f64> {
        self.channels
            .iter()
            .flat_map(|c| c.a.iter().chain(&c.b).copied())
            .collect()
    }

    fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                found: theta.len(),
            });
        }
        let n = self.harmonics;
        for (c, chunk) in self.channels.iter_mut().zip(theta.chunks(2 * n + 1)) {
            c.a.copy_from_slice(&chunk[..=n]);
            c.b.copy_from_slice(&chunk[n + 1..]);
        }
        Ok(())
    }

    fn jacobian_into(&self, channel: usize, t: f64, out: &mut Vec<(usize, f64)>) {
        let off = channel * self.per_channel();
        out.extend(self.basis(t).into_iter().enumerate().map(|(k, v)| (off + k, v)));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseChannel {
    pub label: String,
    pub amps: Vec<f64>,
}

/// Piecewise-constant amplitudes on equal segments of `[0, T]`. Segments are
/// right-open except the last, which is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePulse {
    horizon: f64,
    segments: usize,
    channels: Vec<PiecewiseChannel>,
    bound: Option<f64>,
}

impl PiecewisePulse {
    pub fn new(horizon: f64, segments: usize, channels: Vec<PiecewiseChannel>) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        if segments == 0 {
            return Err(invalid("piecewise pulse needs at least one segment"));
        }
        if channels.is_empty() {
            return Err(invalid("pulse needs at least one channel"));
        }
        for c in &channels {
            if c.amps.len() != segments {
                return Err(Error::Fixture(format!(
                    "channel '{}': expected {} amplitudes, got {}",
                    c.label,
                    segments,
                    c.amps.len()
                )));
            }
            if c.amps.iter().any(|x| !x.is_finite()) {
                return Err(invalid(format!("channel '{}' has non-finite amplitudes", c.label)));
            }
        }
        Ok(Self {
            horizon,
            segments,
            channels,
            bound: None,
        })
    }

    pub fn zeros(horizon: f64, segments: usize, labels: &[&str]) -> Result<Self> {
        let channels = labels
            .iter()
            .map(|l| PiecewiseChannel {
                label: l.to_string(),
                amps: vec![0.0; segments],
            })
            .collect();
        Self::new(horizon, segments, channels)
    }

    /// Clamps amplitudes to `[-bound, bound]` now and on every update.
    pub fn with_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(invalid("amplitude bound must be positive"));
        }
        self.bound = Some(bound);
        self.clamp();
        Ok(self)
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    fn clamp(&mut self) {
        if let Some(b) = self.bound {
            for c in &mut self.channels {
                c.amps.iter_mut().for_each(|x| *x = x.clamp(-b, b));
            }
        }
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn channel_data(&self) -> &[PiecewiseChannel] {
        &self.channels
    }

    pub fn segment_index(&self, t: f64) -> usize {
        let k = (t / self.horizon * self.segments as f64).floor();
        (k.max(0.0) as usize).min(self.segments - 1)
    }

    pub fn eval(&self, j: usize, t: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(invalid(format!("t={t} outside [0, {}]", self.horizon)));
        }
        if j >= self.channels.len() {
            return Err(invalid(format!("channel {j} out of range")));
        }
        Ok(self.amplitude(j, t))
    }
}

impl ControlSignal for PiecewisePulse {
    fn channels(&self) -> usize {
        self.channels.len()
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn amplitude(&self, j: usize, t: f64) -> f64 {
        self.channels[j].amps[self.segment_index(t)]
    }

    fn constant_segments(&self) -> Option<usize> {
        Some(self.segments)
    }
}

impl PulseFamily for PiecewisePulse {
    fn n_params(&self) -> usize {
        self.channels.len() * self.segments
    }

    fn params(&self) -> Vec<f64> {
        self.channels.iter().flat_map(|c| c.amps.iter().copied()).collect()
    }

    fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                found: theta.len(),
            });
        }
        for (c, chunk) in self.channels.iter_mut().zip(theta.chunks(self.segments)) {
            c.amps.copy_from_slice(chunk);
        }
        self.clamp();
        Ok(())
    }

    fn jacobian_into(&self, channel: usize, t: f64, out: &mut Vec<(usize, f64)>) {
        out.push((channel * self.segments + self.segment_index(t), 1.0));
    }
}

/// Either pulse family, as stored in pulse files.
#[derive(Debug, Clone, PartialEq)]
pub enum Pulse {
    Fourier(FourierPulse),
    Piecewise(PiecewisePulse),
}

impl Pulse {
    pub fn family(&self) -> &dyn PulseFamily {
        match self {
            Pulse::Fourier(p) => p,
            Pulse::Piecewise(p) => p,
        }
    }

    pub fn family_mut(&mut self) -> &mut dyn PulseFamily {
        match self {
            Pulse::Fourier(p) => p,
            Pulse::Piecewise(p) => p,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Pulse::Fourier(_) => "fourier",
            Pulse::Piecewise(_) => "piecewise",
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            Pulse::Fourier(p) => p.channels.iter().map(|c| c.label.clone()).collect(),
            Pulse::Piecewise(p) => p.channels.iter().map(|c| c.label.clone()).collect(),
        }
    }

    pub fn to_file(&self) -> PulseFile {
        match self {
            Pulse::Fourier(p) => PulseFile {
                family: "fourier".into(),
                period: Some(p.period),
                horizon: None,
                harmonics: Some(p.harmonics),
                segments: None,
                channels: p
                    .channels
                    .iter()
                    .map(|c| ChannelRecord {
                        label: c.label.clone(),
                        a: Some(c.a.clone()),
                        b: Some(c.b.clone()),
                        amps: None,
                    })
                    .collect(),
            },
            Pulse::Piecewise(p) => PulseFile {
                family: "piecewise".into(),
                period: None,
                horizon: Some(p.horizon),
                harmonics: None,
                segments: Some(p.segments),
                channels: p
                    .channels
                    .iter()
                    .map(|c| ChannelRecord {
                        label: c.label.clone(),
                        a: None,
                        b: None,
                        amps: Some(c.amps.clone()),
                    })
                    .collect(),
            },
        }
    }

    pub fn from_file(f: &PulseFile) -> Result<Self> {
        let missing = |what: &str| Error::Fixture(format!("{} pulse file missing '{what}'", f.family));
        match f.family.as_str() {
            "fourier" => {
                let period = f.period.ok_or_else(|| missing("T_p"))?;
                let n = f.harmonics.ok_or_else(|| missing("N"))?;
                let channels = f
                    .channels
                    .iter()
                    .map(|c| {
                        Ok(FourierChannel {
                            label: c.label.clone(),
                            a: c.a.clone().ok_or_else(|| {
                                Error::Fixture(format!("channel '{}' missing 'a'", c.label))
                            })?,
                            b: c.b.clone().ok_or_else(|| {
                                Error::Fixture(format!("channel '{}' missing 'b'", c.label))
                            })?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Pulse::Fourier(FourierPulse::new(period, n, channels)?))
            }
            "piecewise" => {
                let horizon = f.horizon.ok_or_else(|| missing("T"))?;
                let segments = f.segments.ok_or_else(|| missing("segments"))?;
                let channels = f
                    .channels
                    .iter()
                    .map(|c| {
                        Ok(PiecewiseChannel {
                            label: c.label.clone(),
                            amps: c.amps.clone().ok_or_else(|| {
                                Error::Fixture(format!("channel '{}' missing 'amps'", c.label))
                            })?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Pulse::Piecewise(PiecewisePulse::new(horizon, segments, channels)?))
            }
            other => Err(Error::Fixture(format!("unknown pulse family '{other}'"))),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: PulseFile = serde_json::from_str(&text)
            .map_err(|e| Error::Fixture(format!("{}: {e}", path.display())))?;
        Self::from_file(&file)
    }
}

impl ControlSignal for Pulse {
    fn channels(&self) -> usize {
        self.family().channels()
    }
    fn horizon(&self) -> f64 {
        self.family().horizon()
    }
    fn amplitude(&self, channel: usize, t: f64) -> f64 {
        self.family().amplitude(channel, t)
    }
    fn constant_segments(&self) -> Option<usize> {
        self.family().constant_segments()
    }
}

impl PulseFamily for Pulse {
    fn n_params(&self) -> usize {
        self.family().n_params()
    }
    fn params(&self) -> Vec<f64> {
        self.family().params()
    }
    fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        self.family_mut().set_params(theta)
    }
    fn jacobian_into(&self, channel: usize, t: f64, out: &mut Vec<(usize, f64)>) {
        self.family().jacobian_into(channel, t, out)
    }
}

/// On-disk pulse description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseFile {
    pub family: String,
    #[serde(rename = "T_p", default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub harmonics: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    pub channels: Vec<ChannelRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelRecord {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amps: Option<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hadamard_like() -> FourierPulse {
        FourierPulse::new(
            10.0,
            3,
            vec![
                FourierChannel {
                    label: "u_x".into(),
                    a: vec![-1.10205484, -0.16444018, 0.356119, 1.80099137],
                    b: vec![0.74186792, -1.1333456, -1.22726687],
                },
                FourierChannel {
                    label: "u_y".into(),
                    a: vec![2.24002595, 3.0787707, -0.54292804, -1.32754733],
                    b: vec![2.01127864, 1.7822432, 1.51006954],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn fourier_endpoint_and_center() {
        let p = hadamard_like();
        assert_eq!(p.eval(0, 0.0).unwrap(), 0.0);
        let mut q = FourierPulse::zeros(10.0, 3, &["x"]).unwrap();
        q.set_params(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(q.eval(0, 5.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn fourier_midpoint_hand_value() {
        // at t = T_p/2: cos(n pi) = (-1)^n, sin(n pi) = 0, G = 1
        let p = hadamard_like();
        let a = [-1.10205484, -0.16444018, 0.356119, 1.80099137];
        let expect = a[0] - a[1] + a[2] - a[3];
        assert_abs_diff_eq!(p.eval(0, 5.0).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn fourier_out_of_range_time() {
        let p = hadamard_like();
        assert!(p.eval(0, -0.1).is_err());
        assert!(p.eval(0, 10.1).is_err());
        assert!(p.jacobian(0, 11.0).is_err());
    }

    #[test]
    fn fourier_jacobian() {
        let p = hadamard_like();
        assert!(p.jacobian(1, 0.0).unwrap().iter().all(|&v| v == 0.0));
        assert_abs_diff_eq!(p.jacobian(0, 5.0).unwrap()[0], 1.0, epsilon = 1e-15);

        let theta = p.params();
        let t = 3.7;
        let h = 1e-6;
        let jac = p.jacobian(1, t).unwrap();
        for k in 0..7 {
            let idx = 7 + k;
            let mut up = p.clone();
            let mut th = theta.clone();
            th[idx] += h;
            up.set_params(&th).unwrap();
            let mut dn = p.clone();
            th[idx] -= 2.0 * h;
            dn.set_params(&th).unwrap();
            let fd = (up.amplitude(1, t) - dn.amplitude(1, t)) / (2.0 * h);
            assert!((fd - jac[k]).abs() < 1e-9, "k={k}: fd={fd} jac={}", jac[k]);
        }
    }

    #[test]
    fn coefficient_count_mismatch_names_channel() {
        let err = FourierPulse::new(
            10.0,
            3,
            vec![FourierChannel {
                label: "u_y".into(),
                a: vec![1.0, 2.0, 3.0],
                b: vec![1.0, 2.0, 3.0],
            }],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Fixture(ref m) if m.contains("u_y")));
    }

    #[test]
    fn piecewise_conventions() {
        let p = PiecewisePulse::new(
            1.0,
            1,
            vec![PiecewiseChannel {
                label: "x".into(),
                amps: vec![0.7],
            }],
        )
        .unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(p.eval(0, t).unwrap(), 0.7);
        }

        let amps: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let p = PiecewisePulse::new(4.0, 100, vec![PiecewiseChannel { label: "x".into(), amps }]).unwrap();
        // boundary between segments 10 and 11 (0-based) belongs to the later one
        assert_eq!(p.eval(0, 0.4).unwrap(), 10.0);
        assert_eq!(p.eval(0, 4.0).unwrap(), 99.0);
        assert!(p.eval(0, 4.01).is_err());
        let mut out = Vec::new();
        p.jacobian_into(0, 0.41, &mut out);
        assert_eq!(out, vec![(10, 1.0)]);
    }

    #[test]
    fn piecewise_bound_clamps() {
        let mut p = PiecewisePulse::zeros(1.0, 4, &["x"]).unwrap().with_bound(1.0).unwrap();
        p.set_params(&[2.0, -3.0, 0.5, 1.0]).unwrap();
        assert_eq!(p.params(), vec![1.0, -1.0, 0.5, 1.0]);
    }

    #[test]
    fn pulse_file_round_trip() {
        let p = Pulse::Fourier(hadamard_like());
        let json = serde_json::to_string(&p.to_file()).unwrap();
        assert!(json.contains("\"T_p\":10.0"));
        let back = Pulse::from_file(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn fourier_boundary_conditions(coefs in prop::collection::vec(-5.0f64..5.0, 7)) {
            let mut p = FourierPulse::zeros(10.0, 3, &["x"]).unwrap();
            p.set_params(&coefs).unwrap();
            prop_assert!(p.amplitude(0, 0.0).abs() < 1e-14);
            prop_assert!(p.amplitude(0, 10.0).abs() < 1e-14);
            let h = 1e-7;
            prop_assert!((p.amplitude(0, h) / h).abs() < 1e-6);
            prop_assert!((p.amplitude(0, 10.0 - h) / h).abs() < 1e-6);
        }

        #[test]
        fn families_are_linear(
            x in prop::collection::vec(-3.0f64..3.0, 14),
            y in prop::collection::vec(-3.0f64..3.0, 14),
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
            t in 0.0f64..10.0,
        ) {
            let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
            let mut fx = FourierPulse::zeros(10.0, 3, &["x", "y"]).unwrap();
            let mut fy = fx.clone();
            let mut fc = fx.clone();
            fx.set_params(&x).unwrap();
            fy.set_params(&y).unwrap();
            fc.set_params(&combo).unwrap();
            for j in 0..2 {
                let lhs = fc.amplitude(j, t);
                let rhs = alpha * fx.amplitude(j, t) + beta * fy.amplitude(j, t);
                prop_assert!((lhs - rhs).abs() < 1e-10);
            }
            let mut px = PiecewisePulse::zeros(10.0, 7, &["x", "y"]).unwrap();
            let mut py = px.clone();
            let mut pc = px.clone();
            px.set_params(&x).unwrap();
            py.set_params(&y).unwrap();
            pc.set_params(&combo).unwrap();
            for j in 0..2 {
                let lhs = pc.amplitude(j, t);
                let rhs = alpha * px.amplitude(j, t) + beta * py.amplitude(j, t);
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }
}

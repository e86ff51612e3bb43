// Copyright 2026 The robust-pulse Authors
// SPDX-License-Identifier: Apache-2.0

//! Sampling sets for expectations over uncertainty parameters: Smolyak sparse
//! grids built by the combination formula, full tensor-product grids, and
//! seeded Monte Carlo batches.
//!
//! All nodes live in standardized coordinates; mapping to physical
//! uncertainty values is the job of [`crate::objective::UncertaintyMap`].

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{Measure, Rule1D};

/// Coordinates closer than this (per axis) are treated as the same node.
pub const MERGE_TOL: f64 = 1e-12;
/// Merged weights smaller than this in magnitude are dropped.
pub const PRUNE_TOL: f64 = 1e-14;
/// Default cap on the number of dense tensor-product nodes.
pub const DEFAULT_DENSE_CAP: usize = 1_000_000;
/// Identifier of the generator behind every Monte Carlo draw.
pub const MC_RNG_ID: &str = "chacha8 (rand_chacha 0.9), seed_from_u64";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub coords: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SamplingKind {
    Smolyak { level: usize },
    DenseTensor { orders: Vec<usize> },
    MonteCarlo { samples: usize, seed: u64 },
}

impl SamplingKind {
    pub fn label(&self) -> &'static str {
        match self {
            SamplingKind::Smolyak { .. } => "smolyak",
            SamplingKind::DenseTensor { .. } => "dense-tensor",
            SamplingKind::MonteCarlo { .. } => "monte-carlo",
        }
    }
}

impl fmt::Display for SamplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingKind::Smolyak { level } => write!(f, "smolyak(K={level})"),
            SamplingKind::DenseTensor { orders } => write!(f, "dense{orders:?}"),
            SamplingKind::MonteCarlo { samples, seed } => {
                write!(f, "monte-carlo(N={samples}, seed={seed}, rng={MC_RNG_ID})")
            }
        }
    }
}

/// Weighted nodes in standardized uncertainty space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSet {
    dim: usize,
    kind: SamplingKind,
    points: Vec<Node>,
}

/// Smolyak sparse grid of level `K` in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrid {
    pub dim: usize,
    pub level: usize,
    pub measures: Vec<Measure>,
    pub points: Vec<Node>,
}

impl SparseGrid {
    /// 1D order used at level `j`.
    pub fn growth(j: usize) -> usize {
        j
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }

    pub fn into_sampling_set(self) -> SamplingSet {
        SamplingSet {
            dim: self.dim,
            kind: SamplingKind::Smolyak { level: self.level },
            points: self.points,
        }
    }
}

fn broadcast_measures(dim: usize, measures: &[Measure]) -> Result<Vec<Measure>> {
    match measures.len() {
        1 => Ok(vec![measures[0]; dim]),
        n if n == dim => Ok(measures.to_vec()),
        n => Err(invalid(format!(
            "expected 1 or {dim} measures, got {n}"
        ))),
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All multi-indices `j` with `1 <= j_k <= max_part` and `lo <= |j| <= hi`.
fn multi_indices(dim: usize, lo: usize, hi: usize, max_part: usize) -> Vec<Vec<usize>> {
    fn rec(
        k: usize,
        dim: usize,
        sum: usize,
        lo: usize,
        hi: usize,
        max_part: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if k == dim {
            if sum >= lo {
                out.push(cur.clone());
            }
            return;
        }
        let remaining = dim - k - 1;
        for j in 1..=max_part {
            if sum + j + remaining > hi {
                break;
            }
            cur.push(j);
            rec(k + 1, dim, sum + j, lo, hi, max_part, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, dim, 0, lo, hi, max_part, &mut Vec::with_capacity(dim), &mut out);
    out
}

/// Canonical 1D node table for one axis: merges coincident nodes across the
/// rules of different orders so tensor nodes can be keyed exactly.
struct AxisTable {
    values: Vec<f64>,
    rules: Vec<(Rule1D, Vec<u32>)>,
}

impl AxisTable {
    fn new(measure: Measure, max_order: usize) -> Result<Self> {
        let mut values: Vec<f64> = Vec::new();
        let mut rules = Vec::with_capacity(max_order);
        for n in 1..=max_order {
            let rule = measure.rule(n)?;
            let ids = rule
                .nodes()
                .iter()
                .map(|&x| match values.iter().position(|&v| (v - x).abs() <= MERGE_TOL) {
                    Some(i) => i as u32,
                    None => {
                        values.push(x);
                        (values.len() - 1) as u32
                    }
                })
                .collect();
            rules.push((rule, ids));
        }
        Ok(Self { values, rules })
    }

    fn rule(&self, order: usize) -> &(Rule1D, Vec<u32>) {
        &self.rules[order - 1]
    }
}

/// Smolyak sparse grid by the combination formula with growth `n_j = j`.
///
/// `measures` holds either one measure for all axes or one per axis.
pub fn smolyak_grid(dim: usize, level: usize, measures: &[Measure]) -> Result<SparseGrid> {
    if dim == 0 || level == 0 {
        return Err(invalid("sparse grid needs dim >= 1 and level >= 1"));
    }
    let measures = broadcast_measures(dim, measures)?;
    let axes = measures
        .iter()
        .map(|&m| AxisTable::new(m, SparseGrid::growth(level)))
        .collect::<Result<Vec<_>>>()?;

    let lo = level.max(dim);
    let hi = level + dim - 1;
    let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for idx in multi_indices(dim, lo, hi, level) {
        let s: usize = idx.iter().sum();
        let sign = if (hi - s) % 2 == 0 { 1.0 } else { -1.0 };
        let coef = sign * binomial(dim - 1, s - level);
        let rules: Vec<_> = idx
            .iter()
            .zip(&axes)
            .map(|(&j, axis)| axis.rule(SparseGrid::growth(j)))
            .collect();
        for_each_tensor_point(&rules, |key, w| {
            *acc.entry(key.to_vec()).or_insert(0.0) += coef * w;
        });
    }

    let mut points: Vec<Node> = acc
        .into_iter()
        .filter(|(_, w)| w.abs() >= PRUNE_TOL)
        .map(|(key, weight)| Node {
            coords: key
                .iter()
                .zip(&axes)
                .map(|(&id, axis)| axis.values[id as usize])
                .collect(),
            weight,
        })
        .collect();
    sort_nodes(&mut points);
    Ok(SparseGrid {
        dim,
        level,
        measures,
        points,
    })
}

fn for_each_tensor_point(rules: &[&(Rule1D, Vec<u32>)], mut f: impl FnMut(&[u32], f64)) {
    let d = rules.len();
    let mut pos = vec![0usize; d];
    let mut key = vec![0u32; d];
    loop {
        let mut w = 1.0;
        for k in 0..d {
            let (rule, ids) = rules[k];
            key[k] = ids[pos[k]];
            w *= rule.weights()[pos[k]];
        }
        f(&key, w);
        // odometer increment
        let mut k = 0;
        loop {
            if k == d {
                return;
            }
            pos[k] += 1;
            if pos[k] < rules[k].0.order() {
                break;
            }
            pos[k] = 0;
            k += 1;
        }
    }
}

fn sort_nodes(points: &mut [Node]) {
    points.sort_by(|a, b| {
        a.coords
            .iter()
            .zip(&b.coords)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

/// Full tensor-product grid, capped at [`DEFAULT_DENSE_CAP`] nodes.
pub fn dense_grid(orders: &[usize], measures: &[Measure]) -> Result<SamplingSet> {
    dense_grid_with_cap(orders, measures, DEFAULT_DENSE_CAP)
}

pub fn dense_grid_with_cap(orders: &[usize], measures: &[Measure], cap: usize) -> Result<SamplingSet> {
    let dim = orders.len();
    if dim == 0 || orders.iter().any(|&n| n == 0) {
        return Err(invalid("dense grid orders must be positive"));
    }
    let total = orders
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .unwrap_or(usize::MAX);
    if total > cap {
        return Err(Error::ResourceLimit(format!(
            "dense grid with {total} nodes exceeds cap {cap}"
        )));
    }
    let measures = broadcast_measures(dim, measures)?;
    let rules = orders
        .iter()
        .zip(&measures)
        .map(|(&n, m)| m.rule(n).map(|r| (r, (0..n as u32).collect::<Vec<_>>())))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<_> = rules.iter().collect();
    let mut points = Vec::with_capacity(total);
    for_each_tensor_point(&refs, |key, w| {
        points.push(Node {
            coords: key
                .iter()
                .zip(&rules)
                .map(|(&i, (r, _))| r.nodes()[i as usize])
                .collect(),
            weight: w,
        });
    });
    sort_nodes(&mut points);
    Ok(SamplingSet {
        dim,
        kind: SamplingKind::DenseTensor {
            orders: orders.to_vec(),
        },
        points,
    })
}

fn draw(rng: &mut ChaCha8Rng, m: &Measure) -> f64 {
    match *m {
        Measure::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
        Measure::StandardNormal => rng.sample(StandardNormal),
    }
}

/// `n` i.i.d. draws with equal weights `1/n`, reproducible from `seed`.
pub fn monte_carlo_set(dim: usize, n: usize, measures: &[Measure], seed: u64) -> Result<SamplingSet> {
    MonteCarloStream::new(dim, measures, seed)?.next_set(n)
}

/// Seeded source of successive Monte Carlo batches.
#[derive(Debug, Clone)]
pub struct MonteCarloStream {
    dim: usize,
    measures: Vec<Measure>,
    seed: u64,
    rng: ChaCha8Rng,
}

impl MonteCarloStream {
    pub fn new(dim: usize, measures: &[Measure], seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("Monte Carlo set needs dim >= 1"));
        }
        Ok(Self {
            dim,
            measures: broadcast_measures(dim, measures)?,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        self.measures.iter().map(|m| draw(&mut self.rng, m)).collect()
    }

    pub fn next_set(&mut self, n: usize) -> Result<SamplingSet> {
        if n == 0 {
            return Err(invalid("Monte Carlo set needs N >= 1"));
        }
        let w = 1.0 / n as f64;
        let points = (0..n)
            .map(|_| Node {
                coords: self.next_point(),
                weight: w,
            })
            .collect();
        Ok(SamplingSet {
            dim: self.dim,
            kind: SamplingKind::MonteCarlo {
                samples: n,
                seed: self.seed,
            },
            points,
        })
    }
}

impl SamplingSet {
    /// Builds a set from explicit nodes; used when re-loading exported grids.
    pub fn from_nodes(dim: usize, kind: SamplingKind, points: Vec<Node>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("sampling set must be nonempty"));
        }
        if let Some(p) = points.iter().find(|p| p.coords.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.coords.len(),
            });
        }
        Ok(Self { dim, kind, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &SamplingKind {
        &self.kind
    }

    pub fn points(&self) -> &[Node] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }

    /// Copy with every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut s = self.clone();
        s.points.iter_mut().for_each(|p| p.weight *= c);
        s
    }

    /// Evaluates `g` at every node, possibly concurrently; output follows
    /// node order.
    pub fn map_nodes<T, F>(&self, g: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync,
    {
        self.points.par_iter().map(|p| g(&p.coords)).collect()
    }

    /// Weighted sum of per-node values in fixed node order.
    pub fn weighted_sum(&self, values: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(values)
            .map(|(p, v)| p.weight * v)
            .sum()
    }

    /// `sum_e w_e g(e)`.
    pub fn estimate<F>(&self, g: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        self.weighted_sum(&self.map_nodes(g))
    }

    /// `sum_e w_e g(e)^power`.
    pub fn estimate_moment<F>(&self, g: F, power: u32) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        if power == 0 {
            return Err(invalid("moment power must be at least 1"));
        }
        Ok(self.estimate(|e| g(e).powi(power as i32)))
    }

    /// `E[g^2] - E[g]^2` from a single pass over the nodes.
    pub fn variance<F>(&self, g: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let vals = self.map_nodes(g);
        variance_of(self, &vals)
    }

    /// Writes the set as CSV: one comment row then `coords..., weight` per
    /// node in 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let level = match &self.kind {
            SamplingKind::Smolyak { level } => level.to_string(),
            _ => "NA".to_string(),
        };
        writeln!(w, "# dim={},level={},kind={}", self.dim, level, self.kind.label())?;
        for p in &self.points {
            let mut row: Vec<String> = p.coords.iter().map(|x| format!("{x:.16e}")).collect();
            row.push(format!("{:.16e}", p.weight));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads back the output of [`SamplingSet::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut dim = None;
        let mut kind = None;
        let mut points = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let mut level = None;
                for kv in header.trim().split(',') {
                    match kv.split_once('=') {
                        Some(("dim", v)) => dim = v.parse::<usize>().ok(),
                        Some(("level", v)) => level = v.parse::<usize>().ok(),
                        Some(("kind", v)) => kind = Some(v.to_string()),
                        _ => {}
                    }
                }
                kind = kind.map(|k| match (k.as_str(), level) {
                    ("smolyak", Some(l)) => format!("smolyak:{l}"),
                    _ => k,
                });
                continue;
            }
            let vals = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| invalid(format!("grid csv line {}: {e}", lineno + 1)))?;
            let (weight, coords) = vals
                .split_last()
                .ok_or_else(|| invalid(format!("grid csv line {}: empty row", lineno + 1)))?;
            points.push(Node {
                coords: coords.to_vec(),
                weight: *weight,
            });
        }
        let dim = dim.ok_or_else(|| invalid("grid csv missing header"))?;
        let n = points.len();
        let kind = match kind.as_deref() {
            Some(k) if k.starts_with("smolyak:") => SamplingKind::Smolyak {
                level: k["smolyak:".len()..].parse().unwrap_or(0),
            },
            Some("monte-carlo") => SamplingKind::MonteCarlo { samples: n, seed: 0 },
            _ => SamplingKind::DenseTensor { orders: vec![] },
        };
        Self::from_nodes(dim, kind, points)
    }
}

impl From<SparseGrid> for SamplingSet {
    fn from(g: SparseGrid) -> Self {
        g.into_sampling_set()
    }
}

/// Variance from precomputed node values.
pub fn variance_of(set: &SamplingSet, values: &[f64]) -> f64 {
    let m1 = set.weighted_sum(values);
    let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
    set.weighted_sum(&sq) - m1 * m1
}

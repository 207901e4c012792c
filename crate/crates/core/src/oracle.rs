//! Exact finish-time distributions for small instances.
//!
//! Three independent routes:
//!
//! * one level (`k = 1`): particle `t` halts at the source with probability
//!   `(t - 1) / m`, a birthday-problem product;
//! * bipartite models: dynamic program over the count-vector chain;
//! * Cayley trees: dynamic program over the occupied set of every vertex.

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::model::{ModelSpec, VertexId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("layer size must be at least 2 (got {0})")]
    LayerTooSmall(u64),
    #[error("the count-state space has more than {cap} states")]
    TooManyStates { cap: u64 },
    #[error("the tree has {vertices} vertices, above the cap of {cap}")]
    TooManyVertices { vertices: u64, cap: u64 },
    #[error("exact distributions are not available for {0}")]
    Unsupported(ModelSpec),
    #[error("probability mass drifted from 1 by {0:e}")]
    MassDrift(f64),
}

/// Default state-space cap for [`exact_tf_pmf_counts`].
pub const DEFAULT_STATE_CAP: u64 = 1_000_000;
/// Default vertex cap for [`exact_tf_pmf_enumerate`].
pub const DEFAULT_VERTEX_CAP: u64 = 22;

const MASS_TOLERANCE: f64 = 1e-9;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Distribution of the finish time, restricted to its support.
#[derive(Debug, Clone, PartialEq)]
pub struct FinishTimePmf {
    /// Consecutive steps `first..=last`.
    pub support: Vec<u64>,
    pub prob: Vec<f64>,
    pub mean: f64,
}

impl FinishTimePmf {
    /// Builds a pmf from `(t, mass)` accumulators, trimming zero tails and
    /// rejecting normalization drift above `1e-9`.
    fn from_masses(masses: &[(u64, CompensatedSum)]) -> Result<Self, OracleError> {
        let mut total = CompensatedSum::default();
        for (_, m) in masses {
            total.add(m.value());
        }
        let drift = (total.value() - 1.0).abs();
        if drift > MASS_TOLERANCE {
            return Err(OracleError::MassDrift(drift));
        }
        let first = masses
            .iter()
            .position(|(_, m)| m.value() > 0.0)
            .unwrap_or(0);
        let last = masses
            .iter()
            .rposition(|(_, m)| m.value() > 0.0)
            .unwrap_or(0);
        let kept = &masses[first..=last];
        let support: Vec<u64> = kept.iter().map(|(t, _)| *t).collect();
        let prob: Vec<f64> = kept.iter().map(|(_, m)| m.value()).collect();
        let mut mean = CompensatedSum::default();
        for (t, p) in support.iter().zip(&prob) {
            mean.add(*t as f64 * p);
        }
        Ok(FinishTimePmf {
            support,
            prob,
            mean: mean.value(),
        })
    }

    /// `P(t_f = t)`, zero outside the support.
    pub fn prob_at(&self, t: u64) -> f64 {
        match self.support.first() {
            Some(&first) if t >= first => {
                self.prob.get((t - first) as usize).copied().unwrap_or(0.0)
            }
            _ => 0.0,
        }
    }

    pub fn min_support(&self) -> u64 {
        self.support.first().copied().unwrap_or(0)
    }

    pub fn max_support(&self) -> u64 {
        self.support.last().copied().unwrap_or(0)
    }

    /// Most likely finish time (earliest on ties).
    pub fn mode(&self) -> u64 {
        let mut best = 0;
        for i in 1..self.prob.len() {
            if self.prob[i] > self.prob[best] {
                best = i;
            }
        }
        self.support.get(best).copied().unwrap_or(0)
    }

    pub fn total_mass(&self) -> f64 {
        let mut s = CompensatedSum::default();
        for &p in &self.prob {
            s.add(p);
        }
        s.value()
    }

    pub fn variance(&self) -> f64 {
        let mut s = CompensatedSum::default();
        for (&t, &p) in self.support.iter().zip(&self.prob) {
            let dev = t as f64 - self.mean;
            s.add(dev * dev * p);
        }
        s.value()
    }

    /// Total-variation distance to an empirical distribution given as
    /// `(t, count)` pairs over `trials` samples.
    pub fn tv_distance_to_counts(&self, counts: &[(u64, u64)], trials: u64) -> f64 {
        let n = trials as f64;
        let mut seen = 0.0;
        let mut dist = 0.0;
        for &(t, c) in counts {
            let p = self.prob_at(t);
            seen += p;
            dist += (c as f64 / n - p).abs();
        }
        // Oracle mass on steps never observed.
        dist += (self.total_mass() - seen).max(0.0);
        dist / 2.0
    }
}

/// Exact pmf for one level of `m` vertices:
/// `P(t_f = t) = ((t-1)/m) * prod_{i=1..=t-2} (1 - i/m)` for `2 <= t <= m+1`.
pub fn exact_tf_pmf_k1(m: u64) -> Result<FinishTimePmf, OracleError> {
    if m < 2 {
        return Err(OracleError::LayerTooSmall(m));
    }
    let mf = m as f64;
    let mut survive = 1.0;
    let mut masses = Vec::with_capacity(m as usize);
    for t in 2..=m + 1 {
        if t >= 3 {
            survive *= 1.0 - (t - 2) as f64 / mf;
        }
        let mut acc = CompensatedSum::default();
        acc.add((t - 1) as f64 / mf * survive);
        masses.push((t, acc));
    }
    FinishTimePmf::from_masses(&masses)
}

/// Exact pmf for a bipartite model by dynamic programming over the count
/// vector `(L_1, ..., L_k)`.
///
/// States are numbered in mixed radix (`L_i` has radix `N_i + 1`); every
/// transition adds one particle to some level and therefore moves to a
/// strictly larger index, so a single ascending sweep is a topological
/// order. From state `L` the particle halts at level `i` with probability
/// `prod_{j=1..=i} (1 - L_j/N_j) * L_{i+1}/N_{i+1}` (`L_{k+1}/N_{k+1} = 1`);
/// halting at level 0 finishes the trial at step `sum(L) + 1`.
pub fn exact_tf_pmf_counts(spec: &ModelSpec, state_cap: u64) -> Result<FinishTimePmf, OracleError> {
    if spec.is_tree() || spec.validate().is_err() {
        return Err(OracleError::Unsupported(*spec));
    }
    let k = spec.k() as usize;
    let sizes = spec
        .layer_sizes()
        .map_err(|_| OracleError::TooManyStates { cap: state_cap })?;
    let mut strides = vec![0u64; k + 2];
    let mut states: u64 = 1;
    for i in 1..=k {
        strides[i] = states;
        states = states
            .checked_mul(sizes[i] + 1)
            .filter(|&s| s <= state_cap)
            .ok_or(OracleError::TooManyStates { cap: state_cap })?;
    }

    let max_t = sizes[1..=k].iter().sum::<u64>() + 1;
    let mut finish: Vec<(u64, CompensatedSum)> = (0..=max_t)
        .map(|t| (t, CompensatedSum::default()))
        .collect();
    let mut prob = vec![0.0f64; states as usize];
    prob[0] = 1.0;
    let mut counts = vec![0u64; k + 2];
    for idx in 0..states as usize {
        let p = prob[idx];
        if p == 0.0 {
            continue;
        }
        let mut rest = idx as u64;
        let mut total = 0;
        for i in 1..=k {
            counts[i] = rest % (sizes[i] + 1);
            rest /= sizes[i] + 1;
            total += counts[i];
        }
        counts[k + 1] = 1;
        // reach = probability the particle arrives at level i.
        let mut reach = 1.0;
        for i in 0..=k {
            let blocked = counts[i + 1] as f64 / sizes[i + 1] as f64;
            let halt = reach * blocked;
            if halt > 0.0 {
                if i == 0 {
                    finish[(total + 1) as usize].1.add(p * halt);
                } else {
                    prob[idx + strides[i] as usize] += p * halt;
                }
            }
            reach *= 1.0 - blocked;
            if reach == 0.0 {
                break;
            }
        }
    }
    FinishTimePmf::from_masses(&finish)
}

/// Exact pmf for a small Cayley tree by dynamic programming over occupied
/// vertex sets (bitmasks in level order).
///
/// A walk in the tree is determined by the leaf it heads for, and all
/// `d^k` leaves are equally likely.
pub fn exact_tf_pmf_enumerate(
    spec: &ModelSpec,
    vertex_cap: u64,
) -> Result<FinishTimePmf, OracleError> {
    let (k, d) = match *spec {
        ModelSpec::CayleyTree { k, d } if spec.validate().is_ok() => (k, d),
        _ => return Err(OracleError::Unsupported(*spec)),
    };
    let too_many = |vertices| OracleError::TooManyVertices {
        vertices,
        cap: vertex_cap,
    };
    let vertices = spec.num_vertices().map_err(|_| too_many(u64::MAX))?;
    if vertices > vertex_cap || vertices > 63 {
        return Err(too_many(vertices));
    }

    // Bit of vertex (i, x) = offset[i] + x; each leaf's walk as a bit list.
    let mut offsets = vec![0u64; k as usize + 1];
    for i in 1..=k as usize {
        offsets[i] = offsets[i - 1] + d.pow(i as u32 - 1);
    }
    let bit = |v: VertexId| offsets[v.level as usize] + v.index;
    let leaves = d.pow(k);
    let walks: Vec<Vec<u64>> = (0..leaves)
        .map(|leaf| {
            (0..=k)
                .map(|i| bit(VertexId::new(i, leaf / d.pow(k - i))))
                .collect()
        })
        .collect();
    let leaf_prob = 1.0 / leaves as f64;

    let mut finish: Vec<(u64, CompensatedSum)> = (0..=vertices)
        .map(|t| (t, CompensatedSum::default()))
        .collect();
    let mut layer: HashMap<u64, f64> = HashMap::new();
    layer.insert(0, 1.0);
    for t in 1..=vertices {
        let mut next: HashMap<u64, f64> = HashMap::new();
        for (&mask, &p) in &layer {
            for walk in &walks {
                let halt = walk
                    .windows(2)
                    .position(|pair| mask & (1 << pair[1]) != 0)
                    .unwrap_or(k as usize);
                if halt == 0 {
                    finish[t as usize].1.add(p * leaf_prob);
                } else {
                    *next.entry(mask | 1 << walk[halt]).or_default() += p * leaf_prob;
                }
            }
        }
        if next.is_empty() {
            break;
        }
        layer = next;
    }
    FinishTimePmf::from_masses(&finish)
}

/// Dispatches to whichever exact route applies, with the default caps.
pub fn exact_tf_pmf(spec: &ModelSpec) -> Result<FinishTimePmf, OracleError> {
    match *spec {
        ModelSpec::CayleyTree { .. } => exact_tf_pmf_enumerate(spec, DEFAULT_VERTEX_CAP),
        ModelSpec::EqualLayers { k: 1, m } => exact_tf_pmf_k1(m),
        _ => exact_tf_pmf_counts(spec, DEFAULT_STATE_CAP),
    }
}

//! The upper-blocked process and its coupling with DLA.
//!
//! Every step draws a full walk `u_0 ..= u_k`. For each `j <= k` whose
//! successor `u_{j+1}` is blocked (the sink always is), the blocked set of
//! level `j` gains one vertex: `u_j` if it is not yet blocked, otherwise
//! the lowest-numbered free vertex of the level. Because `u_{j+1}` is
//! uniform and independent of the blocked sets, each level's count grows by
//! an independent `Bernoulli(Lhat_{j+1} / N_{j+1})` per step.

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashSet;
use rand::Rng;

use super::{EngineError, ExecutionMode, Trial, TrialResult};
use crate::model::{ModelSpec, VertexId};
use crate::rng::trial_rng;

/// Blocked counts `Lhat[t][i]` for `t = 0..=t_max`, `i = 0..=k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockedTrace {
    pub rows: Vec<Vec<u64>>,
    /// `(level, step)` of increments dropped because the level was full.
    pub saturation_events: Vec<(u32, u64)>,
}

impl BlockedTrace {
    pub fn at(&self, t: u64) -> &[u64] {
        &self.rows[t as usize]
    }

    pub fn t_max(&self) -> u64 {
        self.rows.len() as u64 - 1
    }
}

/// Simulates the blocked counts directly from the per-level Bernoulli
/// recurrence; each level is capped at its size.
pub fn run_blocked_counts(
    spec: &ModelSpec,
    seed: u64,
    t_max: u64,
) -> Result<BlockedTrace, EngineError> {
    run_blocked_counts_with(spec, &mut trial_rng(seed), t_max)
}

pub fn run_blocked_counts_with<R: Rng + ?Sized>(
    spec: &ModelSpec,
    rng: &mut R,
    t_max: u64,
) -> Result<BlockedTrace, EngineError> {
    spec.validate()?;
    let k = spec.k() as usize;
    let sizes = spec.layer_sizes()?;
    let mut rows = Vec::with_capacity(t_max as usize + 1);
    let mut saturation_events = Vec::new();
    let mut current = vec![0u64; k + 1];
    rows.push(current.clone());
    for t in 1..=t_max {
        let prev = current.clone();
        for i in 0..=k {
            let hit = if i == k {
                true
            } else {
                rng.random_range(0..sizes[i + 1]) < prev[i + 1]
            };
            if hit {
                if current[i] < sizes[i] {
                    current[i] += 1;
                } else {
                    saturation_events.push((i as u32, t));
                }
            }
        }
        rows.push(current.clone());
    }
    Ok(BlockedTrace {
        rows,
        saturation_events,
    })
}

struct BlockedSets {
    sets: Vec<HashSet<u64>>,
    next_free: Vec<u64>,
    sizes: Vec<u64>,
}

impl BlockedSets {
    fn new(sizes: &[u64], k: usize) -> Self {
        BlockedSets {
            sets: vec![HashSet::new(); k + 1],
            next_free: vec![0; k + 1],
            sizes: sizes.to_vec(),
        }
    }

    fn contains(&self, v: VertexId) -> bool {
        self.sets
            .get(v.level as usize)
            .is_none_or(|s| s.contains(&v.index))
    }

    /// Blocks `u`, or a free substitute on the same level. Returns false if
    /// the level is already full.
    fn block(&mut self, u: VertexId) -> bool {
        let i = u.level as usize;
        let set = &mut self.sets[i];
        if set.insert(u.index) {
            return true;
        }
        if set.len() as u64 >= self.sizes[i] {
            return false;
        }
        while set.contains(&self.next_free[i]) {
            self.next_free[i] += 1;
        }
        set.insert(self.next_free[i]);
        true
    }

    fn counts(&self) -> Vec<u64> {
        self.sets.iter().map(|s| s.len() as u64).collect()
    }
}

/// Runs DLA and the upper-blocked process on the same walks for `t_max`
/// steps (bipartite models only).
///
/// The walk is always drawn to level `k` so that the blocked process sees
/// every level. DLA follows it until its first occupied successor. After
/// every step the function checks `B_i(t) ⊆ Bhat_i(t)` for the newly
/// halted vertex and `L_i(t) <= Lhat_i(t)` on every level, returning
/// [`EngineError::CouplingViolation`] otherwise. DLA stops at its finish
/// time; the blocked process keeps running to `t_max`.
pub fn run_coupled_trial(
    spec: &ModelSpec,
    seed: u64,
    t_max: u64,
) -> Result<(TrialResult, BlockedTrace), EngineError> {
    if !spec.is_bipartite() {
        return Err(EngineError::NotBipartite("the coupled trial"));
    }
    if t_max == 0 {
        return Err(EngineError::ZeroMaxSteps);
    }
    let mut rng = trial_rng(seed);
    let k = spec.k() as usize;
    let sizes = spec.layer_sizes()?;
    let mut dla = Trial::new(*spec, ExecutionMode::Vertex)?;
    let mut blocked = BlockedSets::new(&sizes, k);
    let mut rows = Vec::with_capacity(t_max as usize + 1);
    rows.push(vec![0u64; k + 1]);
    let mut saturation_events = Vec::new();
    let mut walk = vec![VertexId::SOURCE; k + 1];

    for t in 1..=t_max {
        for j in 0..k {
            walk[j + 1] = spec.sample_next(walk[j], &mut rng)?;
        }
        let additions: Vec<VertexId> = (0..=k)
            .filter(|&j| j == k || blocked.contains(walk[j + 1]))
            .map(|j| walk[j])
            .collect();
        for u in additions {
            if !blocked.block(u) {
                saturation_events.push((u.level, t));
            }
        }

        if !dla.is_finished() {
            let halt = dla.step_along(|u| Ok(walk[u.level as usize + 1]))?;
            if !blocked.contains(halt.vertex) {
                return Err(EngineError::CouplingViolation {
                    t,
                    level: halt.level,
                });
            }
        }
        let row = blocked.counts();
        if let Some(level) = dla
            .state()
            .counts()
            .iter()
            .zip(&row)
            .position(|(l, lhat)| l > lhat)
        {
            return Err(EngineError::CouplingViolation {
                t,
                level: level as u32,
            });
        }
        rows.push(row);
    }

    Ok((
        dla.into_result(Vec::new()),
        BlockedTrace {
            rows,
            saturation_events,
        },
    ))
}

//! Step-by-step DLA trials.
//!
//! Each step releases one particle at the source. A particle standing at
//! `u` on level `i < k` samples a next-level neighbour `w`; it moves to `w`
//! if `w` is free and otherwise halts at `u`, recording the edge `(u, w)`.
//! A particle that reaches level `k` halts there against the sink. The
//! trial finishes on the step that occupies the source.
//!
//! Bipartite models can run in [`ExecutionMode::Count`], which keeps only
//! the occupancy vector. Vertices inside a bipartite layer are
//! exchangeable, so the count vector is itself a Markov chain: a particle
//! halts at level `i` with probability
//! `prod_{j=1..=i} (1 - L_j / N_j) * L_{i+1} / N_{i+1}`. Count mode samples
//! exactly that chain, labelling the occupied vertices of level `i` as
//! `0..L_i`.

mod blocked;
mod cluster;
mod exact_paths;

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashSet;
use rand::Rng;

pub use blocked::{run_blocked_counts, run_blocked_counts_with, run_coupled_trial, BlockedTrace};
pub use cluster::{Cluster, Color, Node};
pub use exact_paths::count_exact_paths;

use crate::model::{ModelError, ModelSpec, Parent, VertexId};
use crate::rng::trial_rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("count mode needs a bipartite model; trees always run in vertex mode")]
    CountModeOnTree,
    #[error("the trial already finished at step {0}")]
    AlreadyFinished(u64),
    #[error("max_steps must be at least 1")]
    ZeroMaxSteps,
    #[error("{0} is only defined for bipartite models")]
    NotBipartite(&'static str),
    #[error("{0} is only defined for Cayley trees")]
    NotTree(&'static str),
    #[error("depth {j} is outside 0..={k}")]
    DepthOutOfRange { j: u32, k: u32 },
    #[error("coupling violated at step {t}, level {level}")]
    CouplingViolation { t: u64, level: u32 },
    #[error("the trial did not finish")]
    Unfinished,
    #[error("path statistics need a vertex-mode trial")]
    NoVertexData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ExecutionMode {
    /// Full vertex identities, cluster and coloring.
    #[default]
    Vertex,
    /// Occupancy counts only (bipartite models).
    Count,
}

/// Occupancy after `t` steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyState {
    t: u64,
    counts: Vec<u64>,
    occupied: Vec<HashSet<u64>>,
}

impl OccupancyState {
    pub fn new(k: u32) -> Self {
        OccupancyState {
            t: 0,
            counts: vec![0; k as usize + 1],
            occupied: vec![HashSet::new(); k as usize + 1],
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// `L_0 ..= L_k`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Occupied indices of `level`. Empty in count mode.
    pub fn occupied(&self, level: u32) -> &HashSet<u64> {
        &self.occupied[level as usize]
    }

    pub fn is_occupied(&self, v: VertexId) -> bool {
        self.occupied
            .get(v.level as usize)
            .is_some_and(|s| s.contains(&v.index))
    }

    pub fn source_occupied(&self) -> bool {
        self.counts[0] > 0
    }
}

/// Where one particle halted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HaltRecord {
    pub level: u32,
    pub vertex: VertexId,
    pub parent: Parent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialStatus {
    Finished,
    /// `max_steps` ran out before the source was occupied.
    Unfinished,
}

/// Knobs for [`run_trial`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    /// Steps after which the count vector is recorded, ascending.
    pub snapshot_times: Vec<u64>,
    pub max_steps: u64,
    pub mode: ExecutionMode,
}

impl TrialConfig {
    /// Vertex mode, no snapshots, `max_steps = 100 * ceil(T_f)`.
    pub fn for_spec(spec: &ModelSpec) -> Self {
        TrialConfig {
            snapshot_times: Vec::new(),
            max_steps: default_max_steps(spec),
            mode: ExecutionMode::Vertex,
        }
    }
}

/// `100 * ceil(T_f)` with `T_f` the predicted finish time of `spec`.
pub fn default_max_steps(spec: &ModelSpec) -> u64 {
    let tf = crate::analytics::finish_time(spec);
    let steps = 100.0 * libm::ceil(tf);
    if steps.is_finite() && steps < u64::MAX as f64 {
        (steps as u64).max(1)
    } else {
        u64::MAX
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub status: TrialStatus,
    pub mode: ExecutionMode,
    /// Steps executed; equals the finish time for finished trials.
    pub steps: u64,
    pub final_counts: Vec<u64>,
    /// `u_0 ..= u_k`, empty unless finished in vertex mode.
    pub path: Vec<VertexId>,
    /// In-degrees of `u_1 ..= u_k`.
    pub path_indegrees: Vec<u32>,
    pub path_is_blue: Option<bool>,
    pub arborescence_size: Option<u64>,
    /// Red vertices per level, vertex mode only.
    pub red_counts: Option<Vec<u64>>,
    pub snapshots: Vec<(u64, Vec<u64>)>,
    /// `(level, step)` at which a level `1..=k` became completely full.
    pub saturation_events: Vec<(u32, u64)>,
}

impl TrialResult {
    pub fn is_finished(&self) -> bool {
        self.status == TrialStatus::Finished
    }

    pub fn t_f(&self) -> Option<u64> {
        self.is_finished().then_some(self.steps)
    }
}

/// A trial in progress.
#[derive(Debug, Clone)]
pub struct Trial {
    spec: ModelSpec,
    mode: ExecutionMode,
    sizes: Vec<u64>,
    state: OccupancyState,
    cluster: Cluster,
    saturation_events: Vec<(u32, u64)>,
}

impl Trial {
    pub fn new(spec: ModelSpec, mode: ExecutionMode) -> Result<Self, EngineError> {
        spec.validate()?;
        if mode == ExecutionMode::Count && spec.is_tree() {
            return Err(EngineError::CountModeOnTree);
        }
        let sizes = spec.layer_sizes()?;
        Ok(Trial {
            spec,
            mode,
            sizes,
            state: OccupancyState::new(spec.k()),
            cluster: Cluster::new(spec.k()),
            saturation_events: Vec::new(),
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn mode(&self) -> ExecutionMode {
        self.mode
    }

    pub fn state(&self) -> &OccupancyState {
        &self.state
    }

    /// Empty in count mode.
    pub fn cluster(&self) -> &Cluster {
        &self.cluster
    }

    pub fn is_finished(&self) -> bool {
        self.state.source_occupied()
    }

    /// Releases one particle and lets it walk until it halts.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<HaltRecord, EngineError> {
        if self.is_finished() {
            return Err(EngineError::AlreadyFinished(self.state.t));
        }
        match self.mode {
            ExecutionMode::Vertex => {
                let spec = self.spec;
                self.step_along(|u| spec.sample_next(u, rng))
            }
            ExecutionMode::Count => Ok(self.step_counts(rng)),
        }
    }

    /// Vertex-mode step where `next(u)` supplies the walk's successor of `u`.
    pub(crate) fn step_along<F>(&mut self, mut next: F) -> Result<HaltRecord, EngineError>
    where
        F: FnMut(VertexId) -> Result<VertexId, ModelError>,
    {
        debug_assert_eq!(self.mode, ExecutionMode::Vertex);
        let k = self.spec.k();
        let mut u = VertexId::SOURCE;
        let parent = loop {
            if u.level == k {
                break Parent::Sink;
            }
            let w = next(u)?;
            if self.state.is_occupied(w) {
                break Parent::Vertex(w);
            }
            u = w;
        };
        self.state.occupied[u.level as usize].insert(u.index);
        self.cluster.attach(u, parent);
        Ok(self.record_halt(u, parent))
    }

    fn step_counts<R: Rng + ?Sized>(&mut self, rng: &mut R) -> HaltRecord {
        let k = self.spec.k();
        let mut level = 0;
        let parent = loop {
            if level == k {
                break Parent::Sink;
            }
            let next = level + 1;
            let w = rng.random_range(0..self.sizes[next as usize]);
            if w < self.state.counts[next as usize] {
                break Parent::Vertex(VertexId::new(next, w));
            }
            level = next;
        };
        let u = VertexId::new(level, self.state.counts[level as usize]);
        self.record_halt(u, parent)
    }

    fn record_halt(&mut self, u: VertexId, parent: Parent) -> HaltRecord {
        let i = u.level as usize;
        self.state.counts[i] += 1;
        self.state.t += 1;
        if u.level > 0 && self.state.counts[i] == self.sizes[i] {
            self.saturation_events.push((u.level, self.state.t));
        }
        HaltRecord {
            level: u.level,
            vertex: u,
            parent,
        }
    }

    /// Exact and non-exact occupied paths hanging below level `k - j`
    /// (trees only).
    pub fn count_exact_paths(&self, j: u32) -> Result<(u64, u64), EngineError> {
        count_exact_paths(&self.state, &self.cluster, &self.spec, j)
    }

    /// The occupied path `u_0 ..= u_k` from the source, following halt
    /// edges. Empty unless the source is occupied in vertex mode.
    pub fn connecting_path(&self) -> Vec<VertexId> {
        let mut path = Vec::new();
        if self.mode != ExecutionMode::Vertex || !self.is_finished() {
            return path;
        }
        let mut u = VertexId::SOURCE;
        path.push(u);
        while let Some(Parent::Vertex(w)) = self.cluster.parent(u) {
            path.push(w);
            u = w;
        }
        path
    }

    /// Packages the current state as a result.
    pub fn into_result(self, snapshots: Vec<(u64, Vec<u64>)>) -> TrialResult {
        let status = if self.is_finished() {
            TrialStatus::Finished
        } else {
            TrialStatus::Unfinished
        };
        let vertex_mode = self.mode == ExecutionMode::Vertex;
        let path = self.connecting_path();
        let path_indegrees: Vec<u32> = path
            .iter()
            .skip(1)
            .map(|&v| self.cluster.indegree(v))
            .collect();
        let finished_vertex = vertex_mode && status == TrialStatus::Finished;
        let path_is_blue = finished_vertex.then(|| {
            path.iter()
                .all(|&v| self.cluster.color(v) == Some(Color::Blue))
        });
        let arborescence_size =
            finished_vertex.then(|| self.cluster.arborescence_size(path[path.len() - 1]));
        TrialResult {
            status,
            mode: self.mode,
            steps: self.state.t,
            final_counts: self.state.counts.clone(),
            path,
            path_indegrees,
            path_is_blue,
            arborescence_size,
            red_counts: vertex_mode.then(|| self.cluster.red_counts()),
            snapshots,
            saturation_events: self.saturation_events,
        }
    }
}

/// Runs one trial on the stream seeded by `seed`.
pub fn run_trial(
    spec: &ModelSpec,
    seed: u64,
    config: &TrialConfig,
) -> Result<TrialResult, EngineError> {
    run_trial_with(spec, &mut trial_rng(seed), config, |_, _| {})
}

/// Runs one trial, calling `observe` after every step with the new state.
///
/// Snapshot times past the finish step record the final (frozen) counts.
pub fn run_trial_with<R, F>(
    spec: &ModelSpec,
    rng: &mut R,
    config: &TrialConfig,
    mut observe: F,
) -> Result<TrialResult, EngineError>
where
    R: Rng + ?Sized,
    F: FnMut(&OccupancyState, &HaltRecord),
{
    if config.max_steps == 0 {
        return Err(EngineError::ZeroMaxSteps);
    }
    let mut trial = Trial::new(*spec, config.mode)?;
    let mut times = config.snapshot_times.iter().copied().peekable();
    let mut snapshots = Vec::new();
    while let Some(&t) = times.peek() {
        if t > 0 {
            break;
        }
        snapshots.push((t, trial.state.counts.clone()));
        times.next();
    }
    while !trial.is_finished() && trial.state.t < config.max_steps {
        let halt = trial.step(rng)?;
        observe(&trial.state, &halt);
        while let Some(&t) = times.peek() {
            if t > trial.state.t {
                break;
            }
            snapshots.push((t, trial.state.counts.clone()));
            times.next();
        }
    }
    if trial.is_finished() {
        snapshots.extend(times.map(|t| (t, trial.state.counts.clone())));
    }
    Ok(trial.into_result(snapshots))
}

/// In-degrees of `u_1 ..= u_k` and whether the connecting path is all blue.
pub fn path_statistics(result: &TrialResult) -> Result<(Vec<u32>, bool), EngineError> {
    if !result.is_finished() {
        return Err(EngineError::Unfinished);
    }
    let blue = result.path_is_blue.ok_or(EngineError::NoVertexData)?;
    Ok((result.path_indegrees.clone(), blue))
}

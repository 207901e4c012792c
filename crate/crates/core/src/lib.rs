//! Diffusion limited aggregation (DLA) on finite layered graphs.
//!
//! Particles are released one at a time from a single source vertex at
//! level 0 and walk forward level by level towards an always-occupied sink
//! sitting below level `k`. A particle halts at the last unoccupied vertex
//! before its walk would enter an occupied vertex. The process finishes
//! when the source itself becomes occupied.
//!
//! Three geometries are supported: equal layers (complete bipartite
//! connections between layers of `m` vertices), geometrically growing
//! layers (`d^i` vertices at level `i`), and Cayley trees of branching
//! factor `d`.
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO:
//!
//! * [`model`]: geometries, vertex identities, uniform next-level sampling.
//! * [`engine`]: step-by-step trials, the red/blue cluster coloring, the
//!   upper-blocked comparison process and exact-path counting.
//! * [`analytics`]: closed-form occupancy and finish-time predictions and
//!   the expectation recurrences.
//! * [`oracle`]: exact finish-time distributions for small instances.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analytics;
pub mod engine;
pub mod model;
pub mod oracle;
pub mod rng;

pub use analytics::{AnalyticsError, PredictionSet};
pub use engine::{
    BlockedTrace, Cluster, Color, EngineError, ExecutionMode, HaltRecord, OccupancyState,
    TrialConfig, TrialResult, TrialStatus,
};
pub use model::{ModelError, ModelSpec, Parent, VertexId};
pub use oracle::{FinishTimePmf, OracleError};
pub use rng::{split_seed, trial_rng, TrialRng};

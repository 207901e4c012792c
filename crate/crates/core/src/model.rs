//! Layered graph geometries.
//!
//! Graphs are never materialized. Vertex `(i, x)` is the `x`-th vertex of
//! level `i`; adjacency between consecutive bipartite levels is complete,
//! and in a Cayley tree the children of `(i, x)` are `(i + 1, d * x + c)`
//! for `c` in `0..d`. The sink sits implicitly at level `k + 1` and is
//! occupied from the start.

use core::fmt;

use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("level count k must be at least 1 (got {0})")]
    ZeroLevels(u32),
    #[error("equal layers need at least 2 vertices per layer (got {0})")]
    LayerTooSmall(u64),
    #[error("growth/branching factor d must be at least 2 (got {0})")]
    FactorTooSmall(u64),
    #[error("level {level} is outside 0..={max}")]
    LevelOutOfRange { level: u32, max: u32 },
    #[error("level {0} has more than 2^64 vertices")]
    LayerTooLarge(u32),
    #[error("vertex {0} does not exist in this model")]
    NoSuchVertex(VertexId),
    #[error("a particle at level {0} halts; it has no next level to sample")]
    TerminalLevel(u32),
}

/// Which layered graph a trial runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelSpec {
    /// `k` levels of `m` vertices each, complete bipartite between levels.
    EqualLayers { k: u32, m: u64 },
    /// `k` levels, level `i` has `d^i` vertices, complete bipartite.
    GrowingLayers { k: u32, d: u64 },
    /// Cayley tree of height `k` and branching factor `d`.
    CayleyTree { k: u32, d: u64 },
}

/// A vertex at `level`, numbered densely within its level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId {
    pub level: u32,
    pub index: u64,
}

impl VertexId {
    pub const SOURCE: VertexId = VertexId { level: 0, index: 0 };

    pub const fn new(level: u32, index: u64) -> Self {
        VertexId { level, index }
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.level, self.index)
    }
}

/// Target of a halt edge: a vertex one level down, or the sink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parent {
    Vertex(VertexId),
    Sink,
}

impl ModelSpec {
    pub fn equal(k: u32, m: u64) -> Result<Self, ModelError> {
        let spec = ModelSpec::EqualLayers { k, m };
        spec.validate()?;
        Ok(spec)
    }

    pub fn growing(k: u32, d: u64) -> Result<Self, ModelError> {
        let spec = ModelSpec::GrowingLayers { k, d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn tree(k: u32, d: u64) -> Result<Self, ModelError> {
        let spec = ModelSpec::CayleyTree { k, d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.k() == 0 {
            return Err(ModelError::ZeroLevels(0));
        }
        match *self {
            ModelSpec::EqualLayers { m, .. } if m < 2 => Err(ModelError::LayerTooSmall(m)),
            ModelSpec::GrowingLayers { d, .. } | ModelSpec::CayleyTree { d, .. } if d < 2 => {
                Err(ModelError::FactorTooSmall(d))
            }
            _ => Ok(()),
        }
    }

    /// Number of levels below the source (the sink is at level `k + 1`).
    pub fn k(&self) -> u32 {
        match *self {
            ModelSpec::EqualLayers { k, .. }
            | ModelSpec::GrowingLayers { k, .. }
            | ModelSpec::CayleyTree { k, .. } => k,
        }
    }

    /// Short model name used in file formats: `equal`, `growing` or `tree`.
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::EqualLayers { .. } => "equal",
            ModelSpec::GrowingLayers { .. } => "growing",
            ModelSpec::CayleyTree { .. } => "tree",
        }
    }

    /// True for the two complete-bipartite geometries.
    pub fn is_bipartite(&self) -> bool {
        !self.is_tree()
    }

    pub fn is_tree(&self) -> bool {
        matches!(self, ModelSpec::CayleyTree { .. })
    }

    fn check_level(&self, i: u32) -> Result<(), ModelError> {
        let max = self.k() + 1;
        if i > max {
            Err(ModelError::LevelOutOfRange { level: i, max })
        } else {
            Ok(())
        }
    }

    /// `N_i`, the number of vertices at level `i` (`0 <= i <= k + 1`).
    /// Levels 0 and `k + 1` hold the source and the sink.
    pub fn layer_size(&self, i: u32) -> Result<u64, ModelError> {
        self.check_level(i)?;
        if i == 0 || i == self.k() + 1 {
            return Ok(1);
        }
        match *self {
            ModelSpec::EqualLayers { m, .. } => Ok(m),
            ModelSpec::GrowingLayers { d, .. } | ModelSpec::CayleyTree { d, .. } => {
                d.checked_pow(i).ok_or(ModelError::LayerTooLarge(i))
            }
        }
    }

    /// `ln N_i`, defined even where `N_i` overflows `u64`.
    pub fn ln_layer_size(&self, i: u32) -> Result<f64, ModelError> {
        self.check_level(i)?;
        if i == 0 || i == self.k() + 1 {
            return Ok(0.0);
        }
        Ok(match *self {
            ModelSpec::EqualLayers { m, .. } => libm::log(m as f64),
            ModelSpec::GrowingLayers { d, .. } | ModelSpec::CayleyTree { d, .. } => {
                f64::from(i) * libm::log(d as f64)
            }
        })
    }

    /// Layer sizes `N_0 ..= N_{k+1}`.
    pub fn layer_sizes(&self) -> Result<alloc::vec::Vec<u64>, ModelError> {
        (0..=self.k() + 1).map(|i| self.layer_size(i)).collect()
    }

    /// Total vertex count of levels `0..=k` (the sink is not counted).
    pub fn num_vertices(&self) -> Result<u64, ModelError> {
        let mut total: u64 = 0;
        for i in 0..=self.k() {
            total = total
                .checked_add(self.layer_size(i)?)
                .ok_or(ModelError::LayerTooLarge(i))?;
        }
        Ok(total)
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v.level <= self.k() && self.layer_size(v.level).is_ok_and(|n| v.index < n)
    }

    /// Picks the next vertex of a walk standing at `u`: uniform over level
    /// `u.level + 1` for bipartite models, uniform over the `d` children of
    /// `u` for trees. Consumes exactly one bounded draw from `rng`.
    pub fn sample_next<R: Rng + ?Sized>(
        &self,
        u: VertexId,
        rng: &mut R,
    ) -> Result<VertexId, ModelError> {
        if u.level >= self.k() {
            return Err(ModelError::TerminalLevel(u.level));
        }
        if !self.contains(u) {
            return Err(ModelError::NoSuchVertex(u));
        }
        let level = u.level + 1;
        let index = match *self {
            ModelSpec::EqualLayers { m, .. } => rng.random_range(0..m),
            ModelSpec::GrowingLayers { .. } => rng.random_range(0..self.layer_size(level)?),
            ModelSpec::CayleyTree { d, .. } => u.index * d + rng.random_range(0..d),
        };
        Ok(VertexId { level, index })
    }

    /// Child `c` of tree vertex `u`.
    pub fn tree_child(&self, u: VertexId, c: u64) -> Option<VertexId> {
        match *self {
            ModelSpec::CayleyTree { k, d } if u.level < k && c < d && self.contains(u) => {
                Some(VertexId::new(u.level + 1, u.index * d + c))
            }
            _ => None,
        }
    }

    /// The unique tree vertex one level up from `v`.
    pub fn tree_parent(&self, v: VertexId) -> Option<VertexId> {
        match *self {
            ModelSpec::CayleyTree { d, .. } if v.level >= 1 && self.contains(v) => {
                Some(VertexId::new(v.level - 1, v.index / d))
            }
            _ => None,
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ModelSpec::EqualLayers { k, m } => write!(f, "equal(k={k}, m={m})"),
            ModelSpec::GrowingLayers { k, d } => write!(f, "growing(k={k}, d={d})"),
            ModelSpec::CayleyTree { k, d } => write!(f, "tree(k={k}, d={d})"),
        }
    }
}

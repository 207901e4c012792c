use hashbrown::HashMap;

use super::{Cluster, EngineError, OccupancyState};
use crate::model::{ModelSpec, Parent, VertexId};

/// Counts occupied paths hanging from level `k - j` of a Cayley tree.
///
/// An occupied vertex `w` at level `k - j` always carries an occupied path
/// down to level `k` (its chain of halt edges). The path is *exact* when
/// those `j + 1` vertices are the only occupied vertices of `w`'s subtree
/// and every ancestor of `w` is free; it is *non-exact* when the subtree
/// holds further occupied vertices. Returns `(exact, non_exact)`.
pub fn count_exact_paths(
    state: &OccupancyState,
    cluster: &Cluster,
    spec: &ModelSpec,
    j: u32,
) -> Result<(u64, u64), EngineError> {
    let (k, d) = match *spec {
        ModelSpec::CayleyTree { k, d } => (k, d),
        _ => return Err(EngineError::NotTree("exact path counting")),
    };
    if j > k {
        return Err(EngineError::DepthOutOfRange { j, k });
    }
    let root_level = k - j;
    let mut subtree_sizes: HashMap<u64, u64> = HashMap::new();
    for level in root_level..=k {
        let scale = d.pow(level - root_level);
        for &x in state.occupied(level) {
            *subtree_sizes.entry(x / scale).or_default() += 1;
        }
    }

    let mut exact = 0;
    let mut non_exact = 0;
    for &w in state.occupied(root_level) {
        let size = subtree_sizes[&w];
        if size > u64::from(j) + 1 {
            non_exact += 1;
            continue;
        }
        debug_assert!(chain_reaches_sink(cluster, VertexId::new(root_level, w)));
        let prefix_open = (0..root_level).all(|level| {
            let ancestor = w / d.pow(root_level - level);
            !state.occupied(level).contains(&ancestor)
        });
        if prefix_open {
            exact += 1;
        }
    }
    Ok((exact, non_exact))
}

fn chain_reaches_sink(cluster: &Cluster, mut v: VertexId) -> bool {
    loop {
        match cluster.parent(v) {
            Some(Parent::Sink) => return true,
            Some(Parent::Vertex(w)) => v = w,
            None => return false,
        }
    }
}

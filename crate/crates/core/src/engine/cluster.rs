use alloc::vec;
use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};

use crate::model::{Parent, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Color {
    Red,
    Blue,
}

/// A halted particle: its halt edge, color and current in-degree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub parent: Parent,
    pub color: Color,
    pub indegree: u32,
    first_child: Option<u64>,
}

/// The tree of halted particles, with edges directed towards the sink.
///
/// A vertex is blue while it is the only in-neighbour of its parent and
/// red once it shares the parent with a sibling. Vertices at level `k`
/// hang off the sink and are always blue.
#[derive(Debug, Clone, Default)]
pub struct Cluster {
    levels: Vec<HashMap<u64, Node>>,
    sink_indegree: u64,
}

impl Cluster {
    pub fn new(k: u32) -> Self {
        Cluster {
            levels: vec![HashMap::new(); k as usize + 1],
            sink_indegree: 0,
        }
    }

    pub fn k(&self) -> u32 {
        (self.levels.len() - 1) as u32
    }

    pub fn node(&self, v: VertexId) -> Option<&Node> {
        self.levels.get(v.level as usize)?.get(&v.index)
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.node(v).is_some()
    }

    pub fn parent(&self, v: VertexId) -> Option<Parent> {
        self.node(v).map(|n| n.parent)
    }

    pub fn color(&self, v: VertexId) -> Option<Color> {
        self.node(v).map(|n| n.color)
    }

    /// In-degree of `v` (zero for unoccupied vertices).
    pub fn indegree(&self, v: VertexId) -> u32 {
        self.node(v).map_or(0, |n| n.indegree)
    }

    pub fn sink_indegree(&self) -> u64 {
        self.sink_indegree
    }

    /// Occupied vertices of one level, in no particular order.
    pub fn level(&self, level: u32) -> impl Iterator<Item = (VertexId, &Node)> + '_ {
        self.levels[level as usize]
            .iter()
            .map(move |(&index, node)| (VertexId::new(level, index), node))
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.iter().all(HashMap::is_empty)
    }

    /// Adds the halt edge `(u, w)` for a particle that just halted at `u`
    /// and recolors. `w` must be occupied (or the sink) and one level down.
    pub fn attach(&mut self, u: VertexId, w: Parent) {
        debug_assert!(!self.contains(u), "{u} halted twice");
        match w {
            Parent::Sink => {
                debug_assert_eq!(u.level, self.k());
                self.sink_indegree += 1;
            }
            Parent::Vertex(w) => {
                debug_assert_eq!(w.level, u.level + 1);
                let parent = self.levels[w.level as usize]
                    .get_mut(&w.index)
                    .expect("halt edge into an unoccupied vertex");
                parent.indegree += 1;
                if parent.indegree == 1 {
                    parent.first_child = Some(u.index);
                }
            }
        }
        self.levels[u.level as usize].insert(
            u.index,
            Node {
                parent: w,
                color: Color::Blue,
                indegree: 0,
                first_child: None,
            },
        );
        self.color_update(u, w);
    }

    /// Colors `u` after its edge to `w` was added: blue if it is the first
    /// in-neighbour of `w` (or `w` is the sink); otherwise `u` and every
    /// earlier in-neighbour of `w` become red.
    pub fn color_update(&mut self, u: VertexId, w: Parent) {
        let w = match w {
            Parent::Sink => {
                self.set_color(u, Color::Blue);
                return;
            }
            Parent::Vertex(w) => w,
        };
        let (indegree, first) = {
            let p = &self.levels[w.level as usize][&w.index];
            (p.indegree, p.first_child)
        };
        if indegree <= 1 {
            self.set_color(u, Color::Blue);
        } else {
            self.set_color(u, Color::Red);
            // Later siblings were already recolored when the second one arrived.
            if let Some(first) = first {
                self.set_color(VertexId::new(u.level, first), Color::Red);
            }
        }
    }

    fn set_color(&mut self, v: VertexId, color: Color) {
        if let Some(node) = self.levels[v.level as usize].get_mut(&v.index) {
            node.color = color;
        }
    }

    /// Number of red vertices per level `0..=k`.
    pub fn red_counts(&self) -> Vec<u64> {
        self.levels
            .iter()
            .map(|lvl| lvl.values().filter(|n| n.color == Color::Red).count() as u64)
            .collect()
    }

    /// Vertices whose directed path reaches `root`, `root` included.
    pub fn arborescence_size(&self, root: VertexId) -> u64 {
        if !self.contains(root) {
            return 0;
        }
        let mut frontier: HashSet<u64> = HashSet::new();
        frontier.insert(root.index);
        let mut size = 1;
        for level in (0..root.level).rev() {
            let next: HashSet<u64> = self.levels[level as usize]
                .iter()
                .filter(
                    |(_, n)| matches!(n.parent, Parent::Vertex(p) if frontier.contains(&p.index)),
                )
                .map(|(&x, _)| x)
                .collect();
            size += next.len() as u64;
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        size
    }

    /// Recounts in-degrees and colors from the halt edges alone and reports
    /// the first vertex whose stored state disagrees.
    pub fn check_consistency(&self) -> Result<(), VertexId> {
        let mut indegree: Vec<HashMap<u64, u32>> = vec![HashMap::new(); self.levels.len()];
        for (level, nodes) in self.levels.iter().enumerate() {
            for (&x, node) in nodes {
                match node.parent {
                    Parent::Sink if level == self.levels.len() - 1 => {}
                    Parent::Vertex(p) if p.level as usize == level + 1 && self.contains(p) => {
                        *indegree[p.level as usize].entry(p.index).or_default() += 1;
                    }
                    _ => return Err(VertexId::new(level as u32, x)),
                }
            }
        }
        for (level, nodes) in self.levels.iter().enumerate() {
            for (&x, node) in nodes {
                let v = VertexId::new(level as u32, x);
                if node.indegree != indegree[level].get(&x).copied().unwrap_or(0) {
                    return Err(v);
                }
                let expect = match node.parent {
                    Parent::Sink => Color::Blue,
                    Parent::Vertex(p) if indegree[p.level as usize][&p.index] == 1 => Color::Blue,
                    Parent::Vertex(_) => Color::Red,
                };
                if node.color != expect {
                    return Err(v);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(level: u32, index: u64) -> VertexId {
        VertexId::new(level, index)
    }

    #[test]
    fn first_in_neighbour_is_blue() {
        let mut c = Cluster::new(2);
        c.attach(v(2, 0), Parent::Sink);
        c.attach(v(1, 3), Parent::Vertex(v(2, 0)));
        assert_eq!(c.color(v(1, 3)), Some(Color::Blue));
        assert_eq!(c.indegree(v(2, 0)), 1);
        assert!(c.check_consistency().is_ok());
    }

    #[test]
    fn second_in_neighbour_turns_both_red() {
        let mut c = Cluster::new(2);
        c.attach(v(2, 0), Parent::Sink);
        c.attach(v(1, 3), Parent::Vertex(v(2, 0)));
        c.attach(v(1, 4), Parent::Vertex(v(2, 0)));
        assert_eq!(c.color(v(1, 3)), Some(Color::Red));
        assert_eq!(c.color(v(1, 4)), Some(Color::Red));
        c.attach(v(1, 5), Parent::Vertex(v(2, 0)));
        assert_eq!(c.color(v(1, 5)), Some(Color::Red));
        assert_eq!(c.red_counts(), vec![0, 3, 0]);
        assert!(c.check_consistency().is_ok());
    }

    #[test]
    fn sink_children_stay_blue() {
        let mut c = Cluster::new(1);
        for x in 0..4 {
            c.attach(v(1, x), Parent::Sink);
        }
        assert!(c.level(1).all(|(_, n)| n.color == Color::Blue));
        assert_eq!(c.sink_indegree(), 4);
        assert!(c.check_consistency().is_ok());
    }

    #[test]
    fn arborescence_counts_descendants() {
        let mut c = Cluster::new(2);
        c.attach(v(2, 0), Parent::Sink);
        c.attach(v(2, 1), Parent::Sink);
        c.attach(v(1, 0), Parent::Vertex(v(2, 0)));
        c.attach(v(1, 1), Parent::Vertex(v(2, 0)));
        c.attach(v(1, 2), Parent::Vertex(v(2, 1)));
        c.attach(v(0, 0), Parent::Vertex(v(1, 0)));
        assert_eq!(c.arborescence_size(v(2, 0)), 4);
        assert_eq!(c.arborescence_size(v(2, 1)), 2);
        assert_eq!(c.arborescence_size(v(2, 5)), 0);
    }

    #[test]
    fn consistency_check_catches_tampering() {
        let mut c = Cluster::new(2);
        c.attach(v(2, 0), Parent::Sink);
        c.attach(v(1, 0), Parent::Vertex(v(2, 0)));
        c.set_color(v(1, 0), Color::Red);
        assert_eq!(c.check_consistency(), Err(v(1, 0)));
    }
}

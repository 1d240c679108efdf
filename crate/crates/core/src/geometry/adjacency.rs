use std::collections::{BTreeSet, VecDeque};

use super::{Face, FaceId};

/// Face adjacency: two faces are neighbors iff they share at least one
/// undirected triangle edge after welding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    neighbors: Vec<BTreeSet<FaceId>>,
}

impl AdjacencyGraph {
    pub fn build(faces: &[Face]) -> Self {
        let mut edges: Vec<(u32, u32, FaceId)> = Vec::new();
        for face in faces {
            for t in &face.triangles {
                for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                    edges.push((a.min(b), a.max(b), face.id));
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();

        let mut neighbors = vec![BTreeSet::new(); faces.len()];
        let mut start = 0;
        while start < edges.len() {
            let key = (edges[start].0, edges[start].1);
            let mut end = start + 1;
            while end < edges.len() && (edges[end].0, edges[end].1) == key {
                end += 1;
            }
            let run = &edges[start..end];
            for (i, &(_, _, fa)) in run.iter().enumerate() {
                for &(_, _, fb) in &run[i + 1..] {
                    if fa != fb {
                        neighbors[fa as usize].insert(fb);
                        neighbors[fb as usize].insert(fa);
                    }
                }
            }
            start = end;
        }
        Self { neighbors }
    }

    /// Number of faces (nodes) in the graph.
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, face: FaceId) -> &BTreeSet<FaceId> {
        &self.neighbors[face as usize]
    }

    pub fn are_adjacent(&self, a: FaceId, b: FaceId) -> bool {
        self.neighbors
            .get(a as usize)
            .is_some_and(|n| n.contains(&b))
    }

    /// Breadth-first flood from `start`, stepping only onto faces in `allowed`.
    /// `start` itself is always part of the result.
    pub fn component_within(&self, start: FaceId, allowed: &BTreeSet<FaceId>) -> BTreeSet<FaceId> {
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(face) = queue.pop_front() {
            for &n in self.neighbors(face) {
                if allowed.contains(&n) && seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// Connected components of the subgraph induced by `subset`, ordered by
    /// their smallest face id.
    pub fn components_of(&self, subset: &BTreeSet<FaceId>) -> Vec<BTreeSet<FaceId>> {
        let mut remaining = subset.clone();
        let mut out = Vec::new();
        while let Some(&first) = remaining.iter().next() {
            let comp = self.component_within(first, subset);
            for f in &comp {
                remaining.remove(f);
            }
            out.push(comp);
        }
        out
    }

    /// All connected components of the whole graph.
    pub fn components(&self) -> Vec<BTreeSet<FaceId>> {
        let all: BTreeSet<FaceId> = (0..self.neighbors.len() as FaceId).collect();
        self.components_of(&all)
    }

    pub fn is_connected_subset(&self, subset: &BTreeSet<FaceId>) -> bool {
        match subset.iter().next() {
            None => false,
            Some(&first) => self.component_within(first, subset).len() == subset.len(),
        }
    }
}

//! Union-find over sharp links with horizontal displacement tags.

use super::lattice::{gates, SharpLattice};
use crate::circuit::CircuitRealization;

/// Disjoint sets over link indices. `offset[v]` is the horizontal
/// displacement `x_v - x_parent(v)` accumulated along merge paths, so two
/// links of one cluster reached with different displacements mean the
/// cluster winds around the periodic direction.
#[derive(Debug, Clone)]
pub struct ClusterForest {
    parent: Vec<u32>,
    rank: Vec<u8>,
    offset: Vec<i32>,
    members: usize,
    merges: usize,
    wraps: bool,
}

impl ClusterForest {
    pub fn new(size: usize) -> Self {
        Self {
            parent: (0..size as u32).collect(),
            rank: vec![0; size],
            offset: vec![0; size],
            members: 0,
            merges: 0,
            wraps: false,
        }
    }

    /// Root of `v` and the displacement `x_v - x_root`.
    pub fn find(&mut self, v: usize) -> (usize, i32) {
        let mut root = v;
        let mut total = 0;
        while self.parent[root] as usize != root {
            total += self.offset[root];
            root = self.parent[root] as usize;
        }
        // compress, rewriting each offset relative to the root
        let mut node = v;
        let mut remaining = total;
        while self.parent[node] as usize != root && node != root {
            let next = self.parent[node] as usize;
            let step = self.offset[node];
            self.parent[node] = root as u32;
            self.offset[node] = remaining;
            remaining -= step;
            node = next;
        }
        (root, total)
    }

    /// Records `x_v - x_u = d`. Returns true when two clusters merged.
    pub fn union(&mut self, u: usize, v: usize, d: i32) -> bool {
        let (ru, ou) = self.find(u);
        let (rv, ov) = self.find(v);
        if ru == rv {
            if ov - ou != d {
                self.wraps = true;
            }
            return false;
        }
        // x_rv - x_ru = (x_v - ov) - (x_u - ou) = d - ov + ou
        let delta = d - ov + ou;
        let (child, parent, shift) = if self.rank[ru] < self.rank[rv] {
            (ru, rv, -delta)
        } else {
            (rv, ru, delta)
        };
        self.parent[child] = parent as u32;
        self.offset[child] = shift;
        if self.rank[child] == self.rank[parent] {
            self.rank[parent] += 1;
        }
        self.merges += 1;
        true
    }

    pub fn merges(&self) -> usize {
        self.merges
    }

    pub fn wraps(&self) -> bool {
        self.wraps
    }

    /// Number of clusters among the registered members.
    pub fn cluster_count(&self) -> usize {
        self.members - self.merges
    }
}

/// Clusters of a sharp lattice: sharp links touching a common gate are
/// adjacent. Within a gate on bond `(a, a + 1)` the `b` legs sit one unit
/// to the right of the `a` legs, across the periodic seam included.
pub fn cluster(realization: &CircuitRealization, lattice: &SharpLattice) -> ClusterForest {
    let l = lattice.sites();
    let sharp = lattice.sharp_flags();
    let mut forest = ClusterForest::new(sharp.len());
    forest.members = lattice.sharp_count();
    for gate in gates(realization) {
        let legs = gate.legs(l);
        let mut first: Option<(usize, i32)> = None;
        for (j, &leg) in legs.iter().enumerate() {
            if !sharp[leg] {
                continue;
            }
            let dx = (j % 2) as i32;
            match first {
                None => first = Some((leg, dx)),
                Some((anchor, ax)) => {
                    forest.union(anchor, leg, dx - ax);
                }
            }
        }
    }
    forest
}

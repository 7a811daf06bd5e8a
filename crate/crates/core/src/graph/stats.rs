use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{NodeKind, Period, TemporalGraph};

/// Disjoint-set forest with union by size and path halving.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn size_of(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralStats {
    pub period: Period,
    pub person_degree_histogram: BTreeMap<usize, usize>,
    pub startup_degree_histogram: BTreeMap<usize, usize>,
    /// Component sizes, largest first.
    pub component_sizes: Vec<usize>,
    pub lcc_fraction: f64,
    /// Indexed by node id; true for members of the largest component.
    pub lcc_membership: Vec<bool>,
}

pub fn structural_stats(graph: &TemporalGraph, period: Period) -> StructuralStats {
    let n = graph.node_count_at(period);
    let mut uf = UnionFind::new(n);
    for e in graph.edges_as_of(period) {
        uf.union(e.person.index(), e.startup.index());
    }
    let mut person_hist = BTreeMap::new();
    let mut startup_hist = BTreeMap::new();
    for node in graph.nodes_as_of(period) {
        let d = graph.degree(node, period);
        let hist = match graph.kind(node) {
            NodeKind::Person => &mut person_hist,
            NodeKind::StartUp => &mut startup_hist,
        };
        *hist.entry(d).or_insert(0) += 1;
    }
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..n {
        let r = uf.find(i);
        *sizes.entry(r).or_insert(0) += 1;
    }
    // Largest root; ties go to the smallest root id so membership is stable.
    let lcc_root = sizes
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(r, _)| *r);
    let mut component_sizes: Vec<usize> = sizes.values().copied().collect();
    component_sizes.sort_unstable_by(|a, b| b.cmp(a));
    let lcc_membership: Vec<bool> = (0..n).map(|i| Some(uf.find(i)) == lcc_root).collect();
    let lcc_fraction = if n == 0 { 0.0 } else { component_sizes[0] as f64 / n as f64 };
    StructuralStats {
        period,
        person_degree_histogram: person_hist,
        startup_degree_histogram: startup_hist,
        component_sizes,
        lcc_fraction,
        lcc_membership,
    }
}

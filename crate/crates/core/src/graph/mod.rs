//! Temporal bipartite person/start-up network.
//!
//! The graph is a base snapshot (period 0) followed by monthly increments.
//! Nodes and edges are only ever appended, so every as-of query is a prefix
//! lookup and later increments cannot change what an earlier period sees.

mod records;
mod stats;

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use records::{
    Calendar, DealType, Degree, FundingRound, Gender, Industry, Outcome, PersonRecord, Sector,
    StartUpRecord, INDUSTRY_LABELS,
};
pub use stats::{structural_stats, StructuralStats, UnionFind};

/// Graph period: 0 is the base snapshot, `t > 0` the t-th monthly increment.
pub type Period = u32;

/// Dense node identifier. Ids are assigned in order of appearance and are
/// never reused, so the nodes present as-of any period form a prefix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Person,
    StartUp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    Invest,
    Employ,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub person: NodeId,
    pub startup: NodeId,
    pub kind: EdgeKind,
    pub period: Period,
}

/// Nodes and edges added in one period.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GraphIncrement {
    pub period: Period,
    pub new_nodes: Vec<(NodeId, NodeKind)>,
    pub new_edges: Vec<Edge>,
}

impl GraphIncrement {
    pub fn empty(period: Period) -> Self {
        Self { period, ..Self::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.new_nodes.is_empty() && self.new_edges.is_empty()
    }
}

/// One dated record of the raw event stream. `month` is an absolute month
/// index; [`TemporalGraph::from_events`] maps it onto graph periods.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GraphEvent {
    Node { id: NodeId, kind: NodeKind, month: i64 },
    Edge { person: NodeId, startup: NodeId, kind: EdgeKind, month: i64 },
}

impl GraphEvent {
    pub fn month(&self) -> i64 {
        match self {
            GraphEvent::Node { month, .. } | GraphEvent::Edge { month, .. } => *month,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("edge {person}-{startup} does not join a person to a start-up")]
    BipartiteViolation { person: NodeId, startup: NodeId },
    #[error("increment for period {got} applied when period {expected} was due")]
    OutOfOrderIncrement { expected: Period, got: Period },
    #[error("edge endpoint {0} is not in the graph")]
    DanglingEdge(NodeId),
    #[error("node {got} added out of sequence (next id is {expected})")]
    NonSequentialNode { expected: NodeId, got: NodeId },
    #[error("period {got} is beyond the last period {max}")]
    PeriodOutOfRange { got: Period, max: Period },
}

#[derive(Clone, Debug)]
pub struct TemporalGraph {
    kinds: Vec<NodeKind>,
    added: Vec<Period>,
    /// Cumulative node count after each period.
    node_end: Vec<usize>,
    edges: Vec<Edge>,
    /// Cumulative edge count after each period.
    edge_end: Vec<usize>,
    /// First-connection list per node, nondecreasing in period.
    adjacency: Vec<Vec<(NodeId, Period)>>,
    /// (person, start-up) -> period of their first edge.
    pair_first: HashMap<(u32, u32), Period>,
}

impl Default for TemporalGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl TemporalGraph {
    /// An empty graph whose base period 0 has been opened.
    pub fn new() -> Self {
        Self {
            kinds: Vec::new(),
            added: Vec::new(),
            node_end: vec![0],
            edges: Vec::new(),
            edge_end: vec![0],
            adjacency: Vec::new(),
            pair_first: HashMap::new(),
        }
    }

    /// Builds `G^0` from every event dated at or before `cutoff_month`.
    /// Later events are ignored; see [`TemporalGraph::from_events`].
    pub fn build_initial(events: &[GraphEvent], cutoff_month: i64) -> Result<Self, GraphError> {
        let base: Vec<GraphEvent> =
            events.iter().copied().filter(|e| e.month() <= cutoff_month).collect();
        let mut g = Self::new();
        let inc = Self::collect_increment(&base, 0)?;
        g.append(inc)?;
        Ok(g)
    }

    /// Splits the events after `cutoff_month` into monthly increments
    /// `1..=last`, including empty months.
    pub fn increments_after(
        events: &[GraphEvent],
        cutoff_month: i64,
        last_month: i64,
    ) -> Result<Vec<GraphIncrement>, GraphError> {
        let span = (last_month - cutoff_month).max(0) as usize;
        let mut buckets: Vec<Vec<GraphEvent>> = vec![Vec::new(); span];
        for e in events {
            let m = e.month();
            if m > cutoff_month && m <= last_month {
                buckets[(m - cutoff_month - 1) as usize].push(*e);
            }
        }
        buckets
            .iter()
            .enumerate()
            .map(|(i, evs)| Self::collect_increment(evs, (i + 1) as Period))
            .collect()
    }

    /// Base snapshot plus every later month up to the last event.
    pub fn from_events(events: &[GraphEvent], cutoff_month: i64) -> Result<Self, GraphError> {
        let mut g = Self::build_initial(events, cutoff_month)?;
        let last = events.iter().map(GraphEvent::month).max().unwrap_or(cutoff_month);
        for inc in Self::increments_after(events, cutoff_month, last)? {
            g.apply_increment(inc)?;
        }
        Ok(g)
    }

    fn collect_increment(events: &[GraphEvent], period: Period) -> Result<GraphIncrement, GraphError> {
        let mut inc = GraphIncrement::empty(period);
        for e in events {
            match *e {
                GraphEvent::Node { id, kind, .. } => inc.new_nodes.push((id, kind)),
                GraphEvent::Edge { person, startup, kind, .. } => {
                    inc.new_edges.push(Edge { person, startup, kind, period })
                }
            }
        }
        inc.new_nodes.sort_by_key(|(id, _)| *id);
        Ok(inc)
    }

    /// Appends the next period. `inc.period` must be `max_period() + 1`.
    pub fn apply_increment(&mut self, inc: GraphIncrement) -> Result<(), GraphError> {
        let expected = self.max_period() + 1;
        if inc.period != expected {
            return Err(GraphError::OutOfOrderIncrement { expected, got: inc.period });
        }
        self.node_end.push(self.kinds.len());
        self.edge_end.push(self.edges.len());
        let res = self.append(inc);
        if res.is_err() {
            self.node_end.pop();
            self.edge_end.pop();
        }
        res
    }

    /// Adds `inc` into the currently open (last) period. On error the graph
    /// is left unchanged.
    fn append(&mut self, inc: GraphIncrement) -> Result<(), GraphError> {
        let period = inc.period;
        let mut next = self.kinds.len() as u32;
        for (id, _) in &inc.new_nodes {
            if id.0 != next {
                return Err(GraphError::NonSequentialNode { expected: NodeId(next), got: *id });
            }
            next += 1;
        }
        let kind_of = |id: NodeId| -> Option<NodeKind> {
            if id.index() < self.kinds.len() {
                Some(self.kinds[id.index()])
            } else {
                inc.new_nodes.get(id.index() - self.kinds.len()).map(|(_, k)| *k)
            }
        };
        for e in &inc.new_edges {
            if e.period != period {
                return Err(GraphError::MalformedRecord(format!(
                    "edge dated period {} inside increment {}",
                    e.period, period
                )));
            }
            let pk = kind_of(e.person).ok_or(GraphError::DanglingEdge(e.person))?;
            let sk = kind_of(e.startup).ok_or(GraphError::DanglingEdge(e.startup))?;
            if pk != NodeKind::Person || sk != NodeKind::StartUp {
                return Err(GraphError::BipartiteViolation { person: e.person, startup: e.startup });
            }
        }

        for (_, kind) in &inc.new_nodes {
            self.kinds.push(*kind);
            self.added.push(period);
            self.adjacency.push(Vec::new());
        }
        let mut seen: HashSet<(u32, u32, EdgeKind)> = HashSet::new();
        for e in inc.new_edges {
            if !seen.insert((e.person.0, e.startup.0, e.kind)) {
                continue;
            }
            self.edges.push(e);
            let key = (e.person.0, e.startup.0);
            if let std::collections::hash_map::Entry::Vacant(slot) = self.pair_first.entry(key) {
                slot.insert(period);
                self.adjacency[e.person.index()].push((e.startup, period));
                self.adjacency[e.startup.index()].push((e.person, period));
            }
        }
        *self.node_end.last_mut().unwrap() = self.kinds.len();
        *self.edge_end.last_mut().unwrap() = self.edges.len();
        Ok(())
    }

    pub fn max_period(&self) -> Period {
        (self.node_end.len() - 1) as Period
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn node_count_at(&self, period: Period) -> usize {
        self.node_end[period.min(self.max_period()) as usize]
    }

    pub fn edge_count_at(&self, period: Period) -> usize {
        self.edge_end[period.min(self.max_period()) as usize]
    }

    pub fn kind(&self, node: NodeId) -> NodeKind {
        self.kinds[node.index()]
    }

    pub fn added_period(&self, node: NodeId) -> Period {
        self.added[node.index()]
    }

    pub fn contains(&self, node: NodeId, period: Period) -> bool {
        node.index() < self.kinds.len() && self.added[node.index()] <= period
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edges_as_of(&self, period: Period) -> &[Edge] {
        &self.edges[..self.edge_count_at(period)]
    }

    /// Nodes present as-of `period`, in id order.
    pub fn nodes_as_of(&self, period: Period) -> impl Iterator<Item = NodeId> {
        (0..self.node_count_at(period) as u32).map(NodeId)
    }

    /// Distinct neighbours of `node` as-of `period`, in order of first contact.
    pub fn neighbors(&self, node: NodeId, period: Period) -> impl Iterator<Item = NodeId> + '_ {
        let adj = &self.adjacency[node.index()];
        let end = adj.partition_point(|(_, p)| *p <= period);
        adj[..end].iter().map(|(n, _)| *n)
    }

    pub fn degree(&self, node: NodeId, period: Period) -> usize {
        let adj = &self.adjacency[node.index()];
        adj.partition_point(|(_, p)| *p <= period)
    }

    /// Whether any edge joins the pair as-of `period`.
    pub fn has_pair(&self, person: NodeId, startup: NodeId, period: Period) -> bool {
        self.pair_first.get(&(person.0, startup.0)).is_some_and(|p| *p <= period)
    }

    /// Number of distinct connected (person, start-up) pairs as-of `period`.
    pub fn pair_count(&self, period: Period) -> usize {
        self.pair_first.values().filter(|p| **p <= period).count()
    }

    /// The increment that produced `period` (for period 0, all of `G^0`).
    pub fn increment(&self, period: Period) -> Result<GraphIncrement, GraphError> {
        if period > self.max_period() {
            return Err(GraphError::PeriodOutOfRange { got: period, max: self.max_period() });
        }
        let (n0, e0) = if period == 0 {
            (0, 0)
        } else {
            (self.node_end[period as usize - 1], self.edge_end[period as usize - 1])
        };
        let (n1, e1) = (self.node_end[period as usize], self.edge_end[period as usize]);
        Ok(GraphIncrement {
            period,
            new_nodes: (n0..n1).map(|i| (NodeId(i as u32), self.kinds[i])).collect(),
            new_edges: self.edges[e0..e1].to_vec(),
        })
    }

    /// New nodes, endpoints of new edges, and everything within `n_hops`
    /// of them as-of `inc.period`. Sorted by id.
    pub fn affected_nodes(&self, inc: &GraphIncrement, n_hops: usize) -> Vec<NodeId> {
        let period = inc.period;
        let mut seen: BTreeSet<NodeId> = BTreeSet::new();
        let mut frontier: Vec<NodeId> = Vec::new();
        let seeds = inc
            .new_nodes
            .iter()
            .map(|(n, _)| *n)
            .chain(inc.new_edges.iter().flat_map(|e| [e.person, e.startup]));
        for n in seeds {
            if self.contains(n, period) && seen.insert(n) {
                frontier.push(n);
            }
        }
        for _ in 0..n_hops {
            let mut next = Vec::new();
            for n in frontier {
                for m in self.neighbors(n, period) {
                    if seen.insert(m) {
                        next.push(m);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        seen.into_iter().collect()
    }

    /// Raw degree (distinct neighbours) of every node present as-of
    /// `period`, indexed by node id.
    pub fn degree_centrality(&self, period: Period) -> Vec<f64> {
        self.nodes_as_of(period).map(|n| self.degree(n, period) as f64).collect()
    }
}

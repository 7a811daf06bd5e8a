use std::collections::{BTreeSet, HashSet, VecDeque};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vcnet::graph::{
    structural_stats, Edge, EdgeKind, GraphEvent, GraphIncrement, NodeId, NodeKind, TemporalGraph,
};

/// Random chronological event stream with `n_events` records spread over
/// `months` months. Node ids follow order of appearance.
fn random_stream(seed: u64, n_events: usize, months: i64) -> Vec<GraphEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut persons: Vec<u32> = Vec::new();
    let mut startups: Vec<u32> = Vec::new();
    let mut next = 0u32;
    let mut events = Vec::with_capacity(n_events);
    let mut month_marks: Vec<i64> = (0..n_events).map(|_| rng.gen_range(0..months)).collect();
    month_marks.sort_unstable();
    for month in month_marks {
        let want_edge = !persons.is_empty() && !startups.is_empty() && rng.gen_bool(0.6);
        if want_edge {
            let p = persons[rng.gen_range(0..persons.len())];
            let s = startups[rng.gen_range(0..startups.len())];
            let kind = if rng.gen_bool(0.7) { EdgeKind::Invest } else { EdgeKind::Employ };
            events.push(GraphEvent::Edge { person: NodeId(p), startup: NodeId(s), kind, month });
        } else {
            let kind = if rng.gen_bool(0.5) { NodeKind::Person } else { NodeKind::StartUp };
            match kind {
                NodeKind::Person => persons.push(next),
                NodeKind::StartUp => startups.push(next),
            }
            events.push(GraphEvent::Node { id: NodeId(next), kind, month });
            next += 1;
        }
    }
    events
}

fn edge_set(edges: &[Edge]) -> BTreeSet<(u32, u32, bool, u32)> {
    edges
        .iter()
        .map(|e| (e.person.0, e.startup.0, e.kind == EdgeKind::Invest, e.period))
        .collect()
}

#[test]
fn base_counts_match_linear_scan() {
    let events = random_stream(7, 1000, 40);
    let cutoff = 20;
    let g = TemporalGraph::build_initial(&events, cutoff).unwrap();

    let mut nodes = 0;
    let mut distinct: HashSet<(u32, u32, EdgeKind)> = HashSet::new();
    for e in &events {
        match *e {
            GraphEvent::Node { month, .. } if month <= cutoff => nodes += 1,
            GraphEvent::Edge { person, startup, kind, month } if month <= cutoff => {
                distinct.insert((person.0, startup.0, kind));
            }
            _ => {}
        }
    }
    assert_eq!(g.node_count(), nodes);
    assert_eq!(g.edges().len(), distinct.len());
}

#[test]
fn fifty_increments_match_one_shot_build() {
    let events = random_stream(11, 1500, 51);
    let one_shot = TemporalGraph::from_events(&events, 0).unwrap();

    let mut stepwise = TemporalGraph::build_initial(&events, 0).unwrap();
    let incs = TemporalGraph::increments_after(&events, 0, 50).unwrap();
    assert_eq!(incs.len(), 50);
    for inc in incs {
        stepwise.apply_increment(inc).unwrap();
    }
    assert_eq!(stepwise.max_period(), one_shot.max_period());
    assert_eq!(stepwise.node_count(), one_shot.node_count());
    assert_eq!(edge_set(stepwise.edges()), edge_set(one_shot.edges()));
    for t in 0..=50 {
        assert_eq!(stepwise.node_count_at(t), one_shot.node_count_at(t));
        assert_eq!(stepwise.edge_count_at(t), one_shot.edge_count_at(t));
    }
}

#[test]
fn degrees_match_adjacency_matrix_row_sums() {
    let events = random_stream(3, 400, 1);
    let g = TemporalGraph::from_events(&events, 0).unwrap();
    let n = g.node_count();
    assert!(n >= 100, "fixture too small: {n}");
    let mut adj = vec![vec![0u8; n]; n];
    for e in &events {
        if let GraphEvent::Edge { person, startup, .. } = *e {
            adj[person.index()][startup.index()] = 1;
            adj[startup.index()][person.index()] = 1;
        }
    }
    let centrality = g.degree_centrality(0);
    for i in 0..n {
        let row: usize = adj[i].iter().map(|&x| x as usize).sum();
        assert_eq!(centrality[i], row as f64, "node {i}");
    }
}

#[test]
fn isolated_node_has_zero_degree() {
    let ev = [GraphEvent::Node { id: NodeId(0), kind: NodeKind::Person, month: 0 }];
    let g = TemporalGraph::from_events(&ev, 0).unwrap();
    assert_eq!(g.degree_centrality(0), vec![0.0]);
}

/// Components by breadth-first search over an explicit edge list.
fn bfs_component_sizes(n: usize, edges: &[Edge]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.person.index()].push(e.startup.index());
        adj[e.startup.index()].push(e.person.index());
    }
    let mut seen = vec![false; n];
    let mut sizes = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        let mut size = 0;
        while let Some(u) = q.pop_front() {
            size += 1;
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
        sizes.push(size);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

#[test]
fn component_sizes_match_bfs() {
    let events = random_stream(19, 800, 10);
    let g = TemporalGraph::from_events(&events, 0).unwrap();
    for t in [0, 4, g.max_period()] {
        let stats = structural_stats(&g, t);
        let expected = bfs_component_sizes(g.node_count_at(t), g.edges_as_of(t));
        assert_eq!(stats.component_sizes, expected);
        let members = stats.lcc_membership.iter().filter(|m| **m).count();
        assert_eq!(members, expected[0]);
    }
}

/// Brute-force n-hop closure of the increment's seed nodes.
fn bfs_affected(g: &TemporalGraph, inc: &GraphIncrement, hops: usize) -> Vec<NodeId> {
    let t = inc.period;
    let mut dist: std::collections::HashMap<NodeId, usize> = Default::default();
    let mut q = VecDeque::new();
    for n in inc.new_nodes.iter().map(|x| x.0).chain(inc.new_edges.iter().flat_map(|e| [e.person, e.startup])) {
        if dist.insert(n, 0).is_none() {
            q.push_back(n);
        }
    }
    while let Some(u) = q.pop_front() {
        let du = dist[&u];
        if du == hops {
            continue;
        }
        for v in g.neighbors(u, t) {
            if !dist.contains_key(&v) {
                dist.insert(v, du + 1);
                q.push_back(v);
            }
        }
    }
    let mut out: Vec<NodeId> = dist.into_keys().collect();
    out.sort();
    out
}

#[test]
fn affected_nodes_match_bfs_oracle() {
    let events = random_stream(23, 600, 13);
    let g = TemporalGraph::from_events(&events, 0).unwrap();
    for t in 1..=g.max_period() {
        let inc = g.increment(t).unwrap();
        for hops in 1..=3 {
            assert_eq!(g.affected_nodes(&inc, hops), bfs_affected(&g, &inc, hops));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn replay_equals_one_shot(seed in any::<u64>(), n in 10usize..300, months in 1i64..12) {
        let events = random_stream(seed, n, months);
        let one_shot = TemporalGraph::from_events(&events, 0).unwrap();
        let mut g = TemporalGraph::build_initial(&events, 0).unwrap();
        for inc in TemporalGraph::increments_after(&events, 0, one_shot.max_period() as i64).unwrap() {
            g.apply_increment(inc).unwrap();
        }
        prop_assert_eq!(g.node_count(), one_shot.node_count());
        prop_assert_eq!(edge_set(g.edges()), edge_set(one_shot.edges()));
    }

    #[test]
    fn as_of_sets_are_monotone(seed in any::<u64>(), n in 10usize..300, months in 2i64..12) {
        let events = random_stream(seed, n, months);
        let g = TemporalGraph::from_events(&events, 0).unwrap();
        for t in 1..=g.max_period() {
            prop_assert!(g.node_count_at(t - 1) <= g.node_count_at(t));
            let before = edge_set(g.edges_as_of(t - 1));
            let after = edge_set(g.edges_as_of(t));
            prop_assert!(before.is_subset(&after));
            for node in g.nodes_as_of(t - 1) {
                prop_assert!(g.degree(node, t - 1) <= g.degree(node, t));
            }
        }
    }

    #[test]
    fn as_of_queries_ignore_later_increments(seed in any::<u64>(), n in 10usize..300, months in 2i64..12, cut in 0i64..11) {
        let events = random_stream(seed, n, months);
        let full = TemporalGraph::from_events(&events, 0).unwrap();
        let cut = cut.min(full.max_period() as i64);
        let truncated: Vec<GraphEvent> = events.iter().copied().filter(|e| e.month() <= cut).collect();
        let partial = TemporalGraph::from_events(&truncated, 0).unwrap();
        let t = partial.max_period();
        for node in partial.nodes_as_of(t) {
            let a: Vec<NodeId> = partial.neighbors(node, t).collect();
            let b: Vec<NodeId> = full.neighbors(node, t).collect();
            prop_assert_eq!(a, b);
        }
        prop_assert_eq!(edge_set(partial.edges_as_of(t)), edge_set(full.edges_as_of(t)));
    }

    #[test]
    fn affected_sets_nest(seed in any::<u64>(), n in 10usize..300, months in 2i64..8, hops in 1usize..4) {
        let events = random_stream(seed, n, months);
        let g = TemporalGraph::from_events(&events, 0).unwrap();
        for t in 1..=g.max_period() {
            let inc = g.increment(t).unwrap();
            let small: BTreeSet<NodeId> = g.affected_nodes(&inc, hops).into_iter().collect();
            let large: BTreeSet<NodeId> = g.affected_nodes(&inc, hops + 1).into_iter().collect();
            prop_assert!(small.is_subset(&large));
        }
    }

    #[test]
    fn every_stored_edge_is_bipartite(seed in any::<u64>(), n in 10usize..300) {
        let events = random_stream(seed, n, 5);
        let g = TemporalGraph::from_events(&events, 0).unwrap();
        for e in g.edges() {
            prop_assert_eq!(g.kind(e.person), NodeKind::Person);
            prop_assert_eq!(g.kind(e.startup), NodeKind::StartUp);
            prop_assert!(g.added_period(e.person) <= e.period);
            prop_assert!(g.added_period(e.startup) <= e.period);
        }
    }
}

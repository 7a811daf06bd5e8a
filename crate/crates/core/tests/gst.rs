use std::collections::HashMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vcnet::graph::NodeId;
use vcnet::gst::{gst_forward, isolated_node_update, forward_on_tape, GstConfig, GstStack, Neighborhood};
use vcnet::numerics::gradcheck::check_gradients;
use vcnet::numerics::{BoundParams, ParamStore, Tape, Tensor, Var};

mod support;

struct Fixture {
    stack: GstStack,
    table: Vec<Vec<f64>>,
    targets: Vec<usize>,
    adj: HashMap<usize, Vec<usize>>,
}

/// Random bipartite toy graph: even ids are persons, odd ids start-ups.
fn random_fixture(seed: u64, layers: usize, heads: usize, dim: usize, scale_full_d: bool) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(4..10);
    let cfg = GstConfig { dim, heads, layers, scale_full_d };
    let stack = GstStack::new(cfg, "g", &mut rng).unwrap();
    let table: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for p in (0..n).step_by(2) {
        for s in (1..n).step_by(2) {
            if rng.gen_bool(0.5) {
                adj.entry(p).or_default().push(s);
                adj.entry(s).or_default().push(p);
            }
        }
    }
    let mut targets: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
    if targets.is_empty() {
        targets.push(0);
    }
    Fixture { stack, table, targets, adj }
}

fn run_library(f: &Fixture) -> Tensor {
    let flat: Vec<f64> = f.table.iter().flatten().copied().collect();
    let table = Tensor::matrix(f.table.len(), f.stack.config.dim, flat).unwrap();
    let targets: Vec<NodeId> = f.targets.iter().map(|&t| NodeId(t as u32)).collect();
    let adj = f.adj.clone();
    let (out, _) = gst_forward(&f.stack, &table, &targets, move |n| {
        adj.get(&n.index()).cloned().unwrap_or_default().into_iter().map(|i| NodeId(i as u32))
    })
    .unwrap();
    out
}

fn max_abs_diff(a: &Tensor, b: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in b.iter().enumerate() {
        for (x, y) in a.row(i).iter().zip(row) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

#[test]
fn star_graph_one_layer_two_heads_matches_script() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let cfg = GstConfig { dim: 4, heads: 2, layers: 1, scale_full_d: false };
    let stack = GstStack::new(cfg, "g", &mut rng).unwrap();
    let table: Vec<Vec<f64>> = (0..5).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut adj = HashMap::new();
    adj.insert(0, vec![1, 2, 3, 4]);
    for s in 1..5 {
        adj.insert(s, vec![0]);
    }
    let f = Fixture { stack, table, targets: vec![0, 1, 2, 3, 4], adj };
    let expected = support::gst_script(&f.stack, &f.table, &f.targets, &f.adj);
    assert!(max_abs_diff(&run_library(&f), &expected) < 1e-10);
}

#[test]
fn randomized_instances_match_script() {
    for seed in 0..25 {
        let layers = 1 + (seed as usize % 3);
        let heads = [1, 2, 4][seed as usize % 3];
        let f = random_fixture(seed, layers, heads, 8, seed % 4 == 0);
        let expected = support::gst_script(&f.stack, &f.table, &f.targets, &f.adj);
        let diff = max_abs_diff(&run_library(&f), &expected);
        assert!(diff < 1e-10, "seed {seed}: diff {diff}");
    }
}

#[test]
fn isolated_node_matches_direct_formula() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let cfg = GstConfig { dim: 6, heads: 3, layers: 2, scale_full_d: false };
        let stack = GstStack::new(cfg, "g", &mut rng).unwrap();
        let e: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut h = e.clone();
        for layer in &stack.layers {
            let wa = stack.params.value(layer.update);
            // The information half of [h ; 0] contributes nothing.
            h = (0..6).map(|j| (0..6).map(|i| h[i] * wa.get(i, j)).sum::<f64>() + h[j]).collect();
        }
        let got = isolated_node_update(&stack, &e).unwrap();
        for (a, b) in got.iter().zip(&h) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn attention_rows_sum_to_one() {
    for seed in 0..10 {
        let f = random_fixture(seed + 500, 3, 2, 8, false);
        let flat: Vec<f64> = f.table.iter().flatten().copied().collect();
        let table = Tensor::matrix(f.table.len(), 8, flat).unwrap();
        let targets: Vec<NodeId> = f.targets.iter().map(|&t| NodeId(t as u32)).collect();
        let adj = f.adj.clone();
        let (_, recs) = gst_forward(&f.stack, &table, &targets, |n| {
            adj.get(&n.index()).cloned().unwrap_or_default().into_iter().map(|i| NodeId(i as u32))
        })
        .unwrap();
        let mut sums: HashMap<(NodeId, usize, usize), f64> = HashMap::new();
        for r in &recs {
            assert!(r.score > 0.0 && r.score <= 1.0);
            *sums.entry((r.target, r.layer, r.head)).or_default() += r.score;
        }
        for s in sums.values() {
            assert!((s - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = GstConfig { dim: 4, heads: 2, layers: 2, scale_full_d: false };
    let stack = GstStack::new(cfg, "g", &mut rng).unwrap();
    // 6-node toy: persons 0,2,4 and start-ups 1,3,5.
    let edges = [(0, 1), (0, 3), (2, 1), (2, 5), (4, 5)];
    let mut pairs = Vec::new();
    for &(p, s) in &edges {
        pairs.push((p, s));
        pairs.push((s, p));
    }
    let nbhd = Neighborhood::new(6, 6, &pairs).unwrap();
    let input: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let weights: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut emb = ParamStore::new();
    let emb_id = emb.add("rows", Tensor::matrix(6, 4, input.clone()).unwrap());

    let loss_with = |tape: &mut Tape, s: &GstStack, sb: &BoundParams, x: Var| -> Var {
        let out = forward_on_tape(tape, s, sb, x, &nbhd).unwrap();
        let w = tape.constant(Tensor::matrix(6, 4, weights.clone()).unwrap());
        let t = tape.tanh(out.targets).unwrap();
        let m = tape.mul(t, w).unwrap();
        tape.sum(m).unwrap()
    };

    let report = check_gradients(&stack.params, 1e-4, 64, |p| {
        let mut s = stack.clone();
        s.params = p.clone();
        let mut tape = Tape::new();
        let b = tape.bind(&s.params);
        let x = tape.constant(Tensor::matrix(6, 4, input.clone()).unwrap());
        let l = loss_with(&mut tape, &s, &b, x);
        Ok((tape, l, b))
    })
    .unwrap();
    assert!(report.passes(1e-3), "{report:?}");

    let report = check_gradients(&emb, 1e-4, 64, |p| {
        let mut tape = Tape::new();
        let sb = tape.bind_frozen(&stack.params);
        let b = tape.bind(p);
        let l = loss_with(&mut tape, &stack, &sb, b.var(emb_id));
        Ok((tape, l, b))
    })
    .unwrap();
    assert!(report.passes(1e-3), "{report:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn neighbour_order_does_not_matter(seed in any::<u64>(), shuffle in any::<u64>()) {
        let f = random_fixture(seed, 2, 2, 8, false);
        let base = run_library(&f);
        let mut shuffled = Fixture { stack: f.stack.clone(), table: f.table.clone(), targets: f.targets.clone(), adj: f.adj.clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle);
        for list in shuffled.adj.values_mut() {
            for i in (1..list.len()).rev() {
                list.swap(i, rng.gen_range(0..=i));
            }
        }
        let other = run_library(&shuffled);
        for (a, b) in base.data().iter().zip(other.data()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_weights_give_identity(seed in any::<u64>()) {
        let mut f = random_fixture(seed, 3, 2, 8, false);
        f.stack.params.zero_values();
        let out = run_library(&f);
        for (i, &t) in f.targets.iter().enumerate() {
            prop_assert_eq!(out.row(i), &f.table[t][..]);
        }
    }
}

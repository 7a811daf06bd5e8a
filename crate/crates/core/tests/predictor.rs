use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vcnet::graph::NodeId;
use vcnet::gst::{isolated_node_update, GstConfig, GstStack};
use vcnet::numerics::gradcheck::check_gradients;
use vcnet::numerics::{ParamStore, Tape, Tensor};
use vcnet::predictor::{
    predict_cohort, train_classifier, ClassifierConfig, LabeledFeatures, SampleFeatures, SuccessModel,
    PERSON_ATTR_DIM, STARTUP_ATTR_DIM,
};
use vcnet::sequence::EmbeddingSequence;

mod support;

const D: usize = 4;

fn small_config() -> ClassifierConfig {
    ClassifierConfig { hidden: [5, 3], batch_size: 8, ..ClassifierConfig::default() }
}

fn randomize(store: &mut ParamStore, rng: &mut ChaCha8Rng, scale: f64) {
    for p in store.iter_mut() {
        let shape = p.value.shape().to_vec();
        let n = p.value.len();
        p.value = Tensor::new(shape, (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap();
    }
}

fn random_model(seed: u64, layers: usize) -> SuccessModel {
    let gst = GstConfig { dim: D, heads: 2, layers, scale_full_d: false };
    let mut m = SuccessModel::new(D, gst, &small_config(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    randomize(&mut m.head.params, &mut rng, 0.4);
    randomize(&mut m.gst.params, &mut rng, 0.6);
    randomize(&mut m.lstm.params, &mut rng, 0.6);
    m
}

fn random_sample(rng: &mut ChaCha8Rng, id: u32, persons: usize, steps: usize) -> SampleFeatures {
    let first = rng.gen_range(0..steps);
    let sequence = EmbeddingSequence {
        startup: NodeId(id),
        vectors: (0..steps)
            .map(|s| if s >= first { (0..D).map(|_| rng.gen_range(-1.0..1.0)).collect() } else { vec![0.0; D] })
            .collect(),
        present: (0..steps).map(|s| s >= first).collect(),
    };
    let mut attributes: Vec<f64> = (0..STARTUP_ATTR_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
    attributes[..42].iter_mut().for_each(|x| *x = (*x > 0.8) as u8 as f64);
    SampleFeatures {
        startup: NodeId(id),
        period: 1,
        attributes,
        sequence,
        persons: (0..persons).map(|p| NodeId(1000 + id * 10 + p as u32)).collect(),
        person_inputs: (0..persons)
            .map(|_| (0..PERSON_ATTR_DIM + D).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn one_person_ego_net_matches_script() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..25 {
        let m = random_model(seed, 1 + seed as usize % 3);
        let s = random_sample(&mut rng, 1, 1, 4);
        let got = m.fuse(&s).unwrap();
        let want = support::fuse_script(&m, &s);
        assert!(close(&got, &want, 1e-10), "seed {seed}: {got:?} vs {want:?}");
    }
}

#[test]
fn larger_ego_nets_match_script() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for seed in 0..25 {
        let m = random_model(seed, 2);
        let n = rng.gen_range(0..6);
        let s = random_sample(&mut rng, 1, n, 5);
        let got = m.fuse(&s).unwrap();
        assert!(close(&got, &support::fuse_script(&m, &s), 1e-10), "seed {seed}");
    }
}

#[test]
fn head_matches_script() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for seed in 0..25 {
        let m = random_model(seed, 1);
        let z: Vec<f64> = (0..D).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let got = m.predict(&z).unwrap();
        assert!((got - support::predict_script(&m.head, &z)).abs() < 1e-12);
    }
}

#[test]
fn zero_head_predicts_one_half() {
    let mut m = random_model(1, 1);
    m.head.params.zero_values();
    assert_eq!(m.predict(&[0.3, -1.0, 2.0, 0.5]).unwrap(), 0.5);
}

#[test]
fn zero_fusion_stack_returns_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut m = random_model(2, 2);
    m.gst = GstStack::zeroed(m.gst.config, "gst2").unwrap();
    let s = random_sample(&mut rng, 1, 3, 4);
    let mut joined = s.attributes.clone();
    joined.extend(support::lstm_script(&m.lstm, &s.sequence));
    let w = m.head.params.value(m.head.startup_w);
    let b = m.head.params.value(m.head.startup_b);
    let proj: Vec<f64> =
        (0..D).map(|j| b.data()[j] + joined.iter().enumerate().map(|(i, x)| x * w.get(i, j)).sum::<f64>()).collect();
    assert!(close(&m.fuse(&s).unwrap(), &proj, 1e-12));
}

#[test]
fn lone_startup_takes_the_isolated_update() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let m = random_model(3, 3);
    let s = random_sample(&mut rng, 1, 0, 3);
    let mut zeroed = m.clone();
    zeroed.gst = GstStack::zeroed(m.gst.config, "gst2").unwrap();
    let projected = zeroed.fuse(&s).unwrap();
    let want = isolated_node_update(&m.gst, &projected).unwrap();
    assert!(close(&m.fuse(&s).unwrap(), &want, 1e-12));
}

#[test]
fn batch_rows_match_single_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let m = random_model(4, 2);
    let samples: Vec<SampleFeatures> = (0..5).map(|i| random_sample(&mut rng, i, i as usize % 3, 4)).collect();
    let refs: Vec<&SampleFeatures> = samples.iter().collect();
    let mut tape = Tape::new();
    let b = m.bind_frozen(&mut tape);
    let (z, _) = m.fuse_on_tape(&mut tape, &b, &refs).unwrap();
    for (i, s) in samples.iter().enumerate() {
        assert!(close(tape.value(z).row(i), &m.fuse(s).unwrap(), 1e-12), "row {i}");
    }
}

fn batch_loss_check(group: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let m = random_model(5, 2);
    let samples: Vec<SampleFeatures> = (0..3).map(|i| random_sample(&mut rng, i, 1 + i as usize, 3)).collect();
    let targets = Tensor::matrix(3, 1, vec![1.0, 0.0, 1.0]).unwrap();
    let store = match group {
        0 => &m.head.params,
        1 => &m.gst.params,
        _ => &m.lstm.params,
    };
    let report = check_gradients(store, 1e-4, 24, |p: &ParamStore| {
        let mut mm = m.clone();
        match group {
            0 => mm.head.params = p.clone(),
            1 => mm.gst.params = p.clone(),
            _ => mm.lstm.params = p.clone(),
        }
        let refs: Vec<&SampleFeatures> = samples.iter().collect();
        let mut tape = Tape::new();
        let mut b = mm.bind_frozen(&mut tape);
        let live = match group {
            0 => tape.bind(&mm.head.params),
            1 => tape.bind(&mm.gst.params),
            _ => tape.bind(&mm.lstm.params),
        };
        match group {
            0 => b.head = live.clone(),
            1 => b.gst = live.clone(),
            _ => b.lstm = live.clone(),
        }
        let f = mm.forward_on_tape(&mut tape, &b, &refs).map_err(|e| match e {
            vcnet::predictor::PredictError::Tensor(t) => t,
            other => panic!("{other}"),
        })?;
        let loss = tape.bce(f.probability, targets.clone())?;
        Ok((tape, loss, live))
    })
    .unwrap();
    report.max_rel_error
}

#[test]
fn head_gradients_match_finite_differences() {
    let e = batch_loss_check(0);
    assert!(e < 1e-3, "{e}");
}

#[test]
fn fusion_stack_gradients_match_finite_differences() {
    let e = batch_loss_check(1);
    assert!(e < 1e-3, "{e}");
}

#[test]
fn sequence_gradients_match_finite_differences() {
    let e = batch_loss_check(2);
    assert!(e < 1e-3, "{e}");
}

#[test]
fn single_positive_is_learned() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let gst = GstConfig { dim: D, heads: 2, layers: 2, scale_full_d: false };
    let cfg = ClassifierConfig { epochs: 200, ..ClassifierConfig::default() };
    let mut m = SuccessModel::new(D, gst, &cfg, 0).unwrap();
    let s = random_sample(&mut rng, 1, 2, 3);
    let train = vec![LabeledFeatures { features: s.clone(), label: true }];
    let trace = train_classifier(&mut m, &train, &[], &cfg, 0).unwrap();
    assert_eq!(trace.epochs.len(), 200);
    let p = m.predict(&m.fuse(&s).unwrap()).unwrap();
    assert!(p > 0.9, "{p}");
}

#[test]
fn training_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let data: Vec<LabeledFeatures> = (0..20)
        .map(|i| LabeledFeatures { features: random_sample(&mut rng, i, i as usize % 3, 3), label: i % 3 == 0 })
        .collect();
    let cfg = ClassifierConfig { epochs: 3, ..small_config() };
    let run = || {
        let mut m = random_model(7, 2);
        let trace = train_classifier(&mut m, &data[..14], &data[14..], &cfg, 9).unwrap();
        (trace, m.fuse(&data[0].features).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn cohort_is_ranked_by_probability() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let m = random_model(8, 2);
    let mut cohort: Vec<SampleFeatures> = (0..9).map(|i| random_sample(&mut rng, i, i as usize % 4, 3)).collect();
    // A duplicate under another id ties exactly and must follow its twin.
    let mut twin = cohort[2].clone();
    twin.startup = NodeId(99);
    twin.sequence.startup = NodeId(99);
    cohort.push(twin);
    let ranked = predict_cohort(&m, &cohort, 4).unwrap();
    assert_eq!(ranked.len(), cohort.len());
    for (i, r) in ranked.iter().enumerate() {
        assert_eq!(r.rank, i + 1);
        let s = cohort.iter().find(|s| s.startup == r.startup).unwrap();
        assert_eq!(r.probability, m.predict(&m.fuse(s).unwrap()).unwrap());
        if s.persons.len() >= 2 {
            assert!(s.persons.contains(&r.top_attention_person.unwrap()));
        } else {
            assert_eq!(r.top_attention_person, None);
        }
    }
    for w in ranked.windows(2) {
        assert!(w[0].probability > w[1].probability || (w[0].probability == w[1].probability && w[0].startup < w[1].startup));
    }
    let a = ranked.iter().position(|r| r.startup == NodeId(2)).unwrap();
    assert_eq!(ranked[a + 1].startup, NodeId(99));
    assert!(predict_cohort(&m, &[], 4).unwrap().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn person_order_does_not_matter(seed in any::<u64>(), n in 0usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(seed % 7, 2);
        let s = random_sample(&mut rng, 1, n, 3);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut t = s.clone();
        t.persons = order.iter().map(|&i| s.persons[i]).collect();
        t.person_inputs = order.iter().map(|&i| s.person_inputs[i].clone()).collect();
        prop_assert!(close(&m.fuse(&s).unwrap(), &m.fuse(&t).unwrap(), 1e-12));
    }

    #[test]
    fn probabilities_stay_in_unit_interval(seed in any::<u64>(), n in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(seed % 5, 1);
        let s = random_sample(&mut rng, 1, n, 3);
        let p = m.predict(&m.fuse(&s).unwrap()).unwrap();
        prop_assert!(p > 0.0 && p < 1.0);
    }
}
